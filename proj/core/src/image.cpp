#include "hsplat/image.hpp"

#include "hsplat/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hsplat {

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  require(img.height >= 1 && img.width >= 1, "resize_bilinear: empty image");
  require(out_h >= 1 && out_w >= 1, "resize_bilinear: invalid output size");
  if (out_h == img.height && out_w == img.width) return img;

  Image out(out_h, out_w);
  double sy = static_cast<double>(img.height) / out_h;
  double sx = static_cast<double>(img.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double v = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(v));
    double fy = v - y0;
    int y0c = std::clamp(y0, 0, img.height - 1);
    int y1c = std::clamp(y0 + 1, 0, img.height - 1);
    for (int x = 0; x < out_w; ++x) {
      double u = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(u));
      double fx = u - x0;
      int x0c = std::clamp(x0, 0, img.width - 1);
      int x1c = std::clamp(x0 + 1, 0, img.width - 1);
      for (int c = 0; c < 3; ++c) {
        double top = img.at(y0c, x0c, c) * (1 - fx) + img.at(y0c, x1c, c) * fx;
        double bot = img.at(y1c, x0c, c) * (1 - fx) + img.at(y1c, x1c, c) * fx;
        out.at(y, x, c) = top * (1 - fy) + bot * fy;
      }
    }
  }
  return out;
}

std::vector<double> to_grayscale(const Image& img) {
  std::vector<double> g(static_cast<size_t>(img.height) * img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      g[static_cast<size_t>(y) * img.width + x] =
          0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
  return g;
}

} // namespace hsplat
