#pragma once

#include <cstddef>
#include <vector>

namespace hsplat {

/// Row-major H x W x 3 image, interleaved RGB, channel values nominally in
/// [0, 1]. Double storage keeps loss gradients and finite-difference checks
/// exact; quantization happens only at the PNG boundary.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> data; // size = height * width * 3

  Image() = default;
  Image(int h, int w, double fill = 0.0) : height(h), width(w), data(static_cast<size_t>(h) * w * 3, fill) {}

  double& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }

  bool same_shape(const Image& o) const { return height == o.height && width == o.width; }
  std::size_t size() const { return data.size(); }
};

/// Bilinear resample to (out_h, out_w); samples at half-pixel centers with
/// edge clamping.
Image resize_bilinear(const Image& img, int out_h, int out_w);

/// Luma of an RGB image as a flat H*W vector (Rec. 601 weights).
std::vector<double> to_grayscale(const Image& img);

} // namespace hsplat
