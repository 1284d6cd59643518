#pragma once

#include "hsplat/geometry.hpp"
#include "hsplat/image.hpp"
#include "hsplat/splats.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace hsplat {

struct RenderOptions {
  Vec3 background{1, 1, 1};
  double near_plane = 0.01;          // splats at camera depth <= this are culled
  int tile_size = 16;
  double alpha_clamp = 0.999;        // per-splat alpha ceiling
  double transmittance_cutoff = 1e-4; // stop compositing before T drops below this
  double blur = 0.3;                 // px^2 anti-alias floor added to cov2d

  bool operator==(const RenderOptions&) const = default;
};

struct RenderStats {
  long long drawn = 0;   // splats that survived projection and binning
  long long culled = 0;  // behind the near plane or footprint off-frame
  long long skipped = 0; // degenerate screen covariance
};

struct Projection {
  Vec2 mean2d;  // pixel coordinates
  Sym2 cov2d;   // screen-space covariance, blur floor included
  double depth; // camera-space depth (positive in front of the camera)
};

/// EWA projection of one Gaussian; nullopt when culled.
std::optional<Projection> project_gaussian(const Gaussian& g, const CameraPose& pose,
                                           const RenderOptions& opts = {});

/// Gradients with respect to one Gaussian's unconstrained parameters.
struct GaussianGrad {
  Vec3 position;
  Vec3 log_scale;
  Vec4 rotation{0, 0, 0, 0}; // tangent to the unit-quaternion sphere
  double opacity_logit = 0;
  Vec3 color_logit;
};

/// Forward render result. `retained` carries the depth-sorted tile lists and
/// per-splat projection records that render_backward replays.
struct RenderedView {
  Image color;               // H x W x 3 in [0,1]
  std::vector<double> alpha; // H x W accumulated opacity
  RenderStats stats;

  struct Retained;
  std::shared_ptr<const Retained> retained;
};

RenderedView render(const GaussianCloud& cloud, const CameraPose& pose,
                    const RenderOptions& opts = {});

/// Exact gradient of sum(grad_color * rendered_color) with respect to every
/// parameter of every Gaussian. `view` must come from a render of the same
/// cloud/pose/options; anything else is a contract violation.
std::vector<GaussianGrad> render_backward(const RenderedView& view, const GaussianCloud& cloud,
                                          const Image& grad_color);

} // namespace hsplat
