#pragma once

#include "hsplat/math.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

namespace hsplat {

/// One 3D Gaussian. All parameters are stored unconstrained: scale in log
/// space, opacity and color in logit space, rotation as an arbitrary nonzero
/// quaternion that is normalized wherever it is used.
struct Gaussian {
  Vec3 position;
  Vec3 log_scale;        // per-axis stddev = exp(log_scale)
  Vec4 rotation{1, 0, 0, 0}; // quaternion (w, x, y, z), normalized at use
  double opacity_logit = 0;  // opacity = sigmoid(opacity_logit)
  Vec3 color_logit;          // RGB = sigmoid(color_logit), channel-wise

  Vec3 scale() const {
    return {std::exp(log_scale.x), std::exp(log_scale.y), std::exp(log_scale.z)};
  }
  double opacity() const { return sigmoid(opacity_logit); }
  Vec3 color() const {
    return {sigmoid(color_logit.x), sigmoid(color_logit.y), sigmoid(color_logit.z)};
  }

  void renormalize_rotation();
  void validate() const;
};

/// A flat cloud of Gaussians. When the cloud was built from a pixel grid the
/// layout hint records that origin as (views, H', W') with N = views*H'*W'.
struct GaussianCloud {
  std::vector<Gaussian> gaussians;
  std::optional<std::array<int, 3>> layout_hint;

  size_t size() const { return gaussians.size(); }
  void validate() const;
};

/// World-space covariance R diag(s^2) R^T of the activated Gaussian.
Mat3 covariance(const Gaussian& g);

/// Binary little-endian PLY with the common splat-viewer layout:
/// float32 x y z, nx ny nz (zeros), f_dc_0..2 (color logits),
/// opacity (logit), scale_0..2 (logs), rot_0..3 (quaternion w x y z).
void export_ply(const GaussianCloud& cloud, const std::filesystem::path& path);
GaussianCloud import_ply(const std::filesystem::path& path);

} // namespace hsplat
