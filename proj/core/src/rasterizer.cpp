#include "hsplat/rasterizer.hpp"

#include "hsplat/errors.hpp"
#include "hsplat/threading.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>

namespace hsplat {

namespace {

struct SplatRecord {
  int index = -1;      // position in the cloud
  double u = 0, v = 0; // projected mean, pixel coordinates
  Sym2 conic;          // inverse of cov2d
  double depth = 0;
  Vec3 t;              // camera-space position
  double opacity = 0;  // activated
  Vec3 color;          // activated
  int x0 = 0, x1 = 0, y0 = 0, y1 = 0; // inclusive pixel bounding box
};

uint64_t fnv1a(const void* data, size_t n, uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t state_hash(const GaussianCloud& cloud, const CameraPose& pose,
                    const RenderOptions& opts) {
  uint64_t h = 1469598103934665603ull;
  for (const Gaussian& g : cloud.gaussians) {
    const double fields[14] = {g.position.x,   g.position.y,   g.position.z,
                               g.log_scale.x,  g.log_scale.y,  g.log_scale.z,
                               g.rotation.w,   g.rotation.x,   g.rotation.y,
                               g.rotation.z,   g.opacity_logit, g.color_logit.x,
                               g.color_logit.y, g.color_logit.z};
    h = fnv1a(fields, sizeof(fields), h);
  }
  const double pd[4] = {pose.elevation, pose.azimuth, pose.radius, pose.fov_y};
  h = fnv1a(pd, sizeof(pd), h);
  const int pi[2] = {pose.width, pose.height};
  h = fnv1a(pi, sizeof(pi), h);
  const double od[6] = {opts.background.x, opts.background.y, opts.background.z,
                        opts.near_plane,   opts.alpha_clamp,  opts.transmittance_cutoff};
  h = fnv1a(od, sizeof(od), h);
  h = fnv1a(&opts.blur, sizeof(double), h);
  h = fnv1a(&opts.tile_size, sizeof(int), h);
  return h;
}

// Rows of the 2x3 projection Jacobian at camera point t (zeta = -t.z):
//   u = cx + fx*tx/zeta, v = cy - fy*ty/zeta.
void projection_jacobian(const Vec3& t, double fx, double fy, double J[6]) {
  const double zeta = -t.z;
  const double inv = 1.0 / zeta;
  const double inv2 = inv * inv;
  J[0] = fx * inv;        J[1] = 0.0;        J[2] = fx * t.x * inv2;
  J[3] = 0.0;             J[4] = -fy * inv;  J[5] = -fy * t.y * inv2;
}

// cov2d = (J W) Sigma (J W)^T + blur*I given V = J W.
Sym2 screen_covariance(const double V[6], const Mat3& sigma, double blur) {
  double VS[6]; // V * Sigma, 2x3
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c)
      VS[r * 3 + c] = V[r * 3 + 0] * sigma.m[0 * 3 + c] +
                      V[r * 3 + 1] * sigma.m[1 * 3 + c] +
                      V[r * 3 + 2] * sigma.m[2 * 3 + c];
  Sym2 s;
  s.a = VS[0] * V[0] + VS[1] * V[1] + VS[2] * V[2] + blur;
  s.b = VS[0] * V[3] + VS[1] * V[4] + VS[2] * V[5];
  s.c = VS[3] * V[3] + VS[4] * V[4] + VS[5] * V[5] + blur;
  return s;
}

enum class ProjectOutcome { kOk, kCulled, kSkipped };

ProjectOutcome project_record(const Gaussian& g, const ViewTransform& vt, int width,
                              int height, const RenderOptions& opts, SplatRecord& rec) {
  const Vec3 t = vt.to_camera(g.position);
  const double depth = -t.z;
  if (depth <= opts.near_plane) return ProjectOutcome::kCulled;

  const Mat3 sigma = covariance(g);
  double J[6];
  projection_jacobian(t, vt.fx, vt.fy, J);
  double V[6]; // J * W
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c)
      V[r * 3 + c] = J[r * 3 + 0] * vt.rotation.m[0 * 3 + c] +
                     J[r * 3 + 1] * vt.rotation.m[1 * 3 + c] +
                     J[r * 3 + 2] * vt.rotation.m[2 * 3 + c];
  const Sym2 cov = screen_covariance(V, sigma, opts.blur);
  const double det = cov.det();
  if (!(det > 0.0) || !std::isfinite(det)) return ProjectOutcome::kSkipped;

  const double u = vt.cx + vt.fx * t.x / depth;
  const double v = vt.cy - vt.fy * t.y / depth;
  const double mid = 0.5 * (cov.a + cov.c);
  const double lam_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  const double radius = 3.0 * std::sqrt(lam_max);

  const int x0 = std::max(0, static_cast<int>(std::floor(u - radius)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(u + radius)));
  const int y0 = std::max(0, static_cast<int>(std::floor(v - radius)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(v + radius)));
  if (x0 > x1 || y0 > y1) return ProjectOutcome::kCulled;

  rec.u = u;
  rec.v = v;
  rec.conic = cov.inverse();
  rec.depth = depth;
  rec.t = t;
  rec.opacity = g.opacity();
  rec.color = g.color();
  rec.x0 = x0;
  rec.x1 = x1;
  rec.y0 = y0;
  rec.y1 = y1;
  return ProjectOutcome::kOk;
}

} // namespace

struct RenderedView::Retained {
  CameraPose pose;
  RenderOptions opts;
  uint64_t cloud_hash = 0;
  ViewTransform vt;
  std::vector<SplatRecord> records;          // depth-sorted survivors
  std::vector<std::vector<int>> tile_lists;  // record indices per tile, front-to-back
  int tiles_x = 0, tiles_y = 0;
};

std::optional<Projection> project_gaussian(const Gaussian& g, const CameraPose& pose,
                                           const RenderOptions& opts) {
  pose.validate();
  g.validate();
  const ViewTransform vt = view_matrix(pose);
  SplatRecord rec;
  if (project_record(g, vt, pose.width, pose.height, opts, rec) != ProjectOutcome::kOk)
    return std::nullopt;
  Projection p;
  p.mean2d = {rec.u, rec.v};
  p.cov2d = rec.conic.inverse(); // undo: records store the conic
  p.depth = rec.depth;
  return p;
}

RenderedView render(const GaussianCloud& cloud, const CameraPose& pose,
                    const RenderOptions& opts) {
  cloud.validate();
  pose.validate();
  require(opts.tile_size >= 1, "tile size must be positive");

  const int W = pose.width;
  const int H = pose.height;
  const int n = static_cast<int>(cloud.gaussians.size());
  auto retained = std::make_shared<RenderedView::Retained>();
  retained->pose = pose;
  retained->opts = opts;
  retained->cloud_hash = state_hash(cloud, pose, opts);
  retained->vt = view_matrix(pose);
  retained->tiles_x = (W + opts.tile_size - 1) / opts.tile_size;
  retained->tiles_y = (H + opts.tile_size - 1) / opts.tile_size;

  // Project every splat; writes are disjoint so this parallelizes cleanly.
  std::vector<SplatRecord> proj(n);
  std::vector<unsigned char> ok(n, 0);
  std::atomic<long long> culled{0}, skipped{0};
  parallel_for(0, n, [&](int64_t lo, int64_t hi) {
    long long local_culled = 0, local_skipped = 0;
    for (int64_t i = lo; i < hi; ++i) {
      const ProjectOutcome out = project_record(cloud.gaussians[i], retained->vt, W, H,
                                                opts, proj[i]);
      if (out == ProjectOutcome::kOk) {
        proj[i].index = static_cast<int>(i);
        ok[i] = 1;
      } else if (out == ProjectOutcome::kCulled) {
        ++local_culled;
      } else {
        ++local_skipped;
      }
    }
    culled += local_culled;
    skipped += local_skipped;
  });

  auto& records = retained->records;
  records.reserve(n);
  for (int i = 0; i < n; ++i)
    if (ok[i]) records.push_back(proj[i]);
  std::stable_sort(records.begin(), records.end(),
                   [](const SplatRecord& a, const SplatRecord& b) {
                     if (a.depth != b.depth) return a.depth < b.depth;
                     return a.index < b.index;
                   });

  // Bin the sorted records into tiles; list order is compositing order.
  const int ts = opts.tile_size;
  retained->tile_lists.assign(static_cast<size_t>(retained->tiles_x) * retained->tiles_y, {});
  for (int r = 0; r < static_cast<int>(records.size()); ++r) {
    const SplatRecord& rec = records[r];
    const int tx0 = rec.x0 / ts, tx1 = rec.x1 / ts;
    const int ty0 = rec.y0 / ts, ty1 = rec.y1 / ts;
    for (int ty = ty0; ty <= ty1; ++ty)
      for (int tx = tx0; tx <= tx1; ++tx)
        retained->tile_lists[static_cast<size_t>(ty) * retained->tiles_x + tx].push_back(r);
  }

  RenderedView view;
  view.color = Image(H, W);
  view.alpha.assign(static_cast<size_t>(H) * W, 0.0);
  view.stats.drawn = static_cast<long long>(records.size());
  view.stats.culled = culled.load();
  view.stats.skipped = skipped.load();

  const int num_tiles = retained->tiles_x * retained->tiles_y;
  parallel_for(0, num_tiles, [&](int64_t lo, int64_t hi) {
    for (int64_t tile = lo; tile < hi; ++tile) {
      const int tx = static_cast<int>(tile) % retained->tiles_x;
      const int ty = static_cast<int>(tile) / retained->tiles_x;
      const auto& list = retained->tile_lists[tile];
      const int px0 = tx * ts, px1 = std::min(W, px0 + ts);
      const int py0 = ty * ts, py1 = std::min(H, py0 + ts);
      for (int py = py0; py < py1; ++py) {
        for (int px = px0; px < px1; ++px) {
          const double pcx = px + 0.5, pcy = py + 0.5;
          double T = 1.0;
          double c0 = 0, c1 = 0, c2 = 0;
          for (int r : list) {
            const SplatRecord& rec = records[r];
            const double dx = pcx - rec.u, dy = pcy - rec.v;
            const double q = rec.conic.a * dx * dx + 2.0 * rec.conic.b * dx * dy +
                             rec.conic.c * dy * dy;
            const double alpha = std::min(opts.alpha_clamp, rec.opacity * std::exp(-0.5 * q));
            const double T_next = T * (1.0 - alpha);
            if (T_next < opts.transmittance_cutoff) break;
            const double w = alpha * T;
            c0 += rec.color.x * w;
            c1 += rec.color.y * w;
            c2 += rec.color.z * w;
            T = T_next;
          }
          view.color.at(py, px, 0) = c0 + T * opts.background.x;
          view.color.at(py, px, 1) = c1 + T * opts.background.y;
          view.color.at(py, px, 2) = c2 + T * opts.background.z;
          view.alpha[static_cast<size_t>(py) * W + px] = 1.0 - T;
        }
      }
    }
  });

  view.retained = std::move(retained);
  return view;
}

std::vector<GaussianGrad> render_backward(const RenderedView& view, const GaussianCloud& cloud,
                                          const Image& grad_color) {
  require(view.retained != nullptr, "render_backward needs the retained forward state");
  const auto& ret = *view.retained;
  const CameraPose& pose = ret.pose;
  const RenderOptions& opts = ret.opts;
  require(grad_color.height == pose.height && grad_color.width == pose.width,
          "grad_color size does not match the rendered view");
  require(state_hash(cloud, pose, opts) == ret.cloud_hash,
          "retained state does not match this cloud/pose/options");

  const int W = pose.width;
  const auto& records = ret.records;
  const int ts = opts.tile_size;
  const int num_tiles = ret.tiles_x * ret.tiles_y;

  // Per-record screen-space accumulators:
  // [0..2] d color (activated), [3] d opacity (activated),
  // [4..5] d mean2d (u, v), [6..8] d conic (a, b, c).
  using Accum = std::array<double, 9>;
  std::vector<std::vector<Accum>> partials(num_tiles);

  parallel_for(0, num_tiles, [&](int64_t lo, int64_t hi) {
    std::vector<double> alphas; // per-pixel scratch, front-to-back
    for (int64_t tile = lo; tile < hi; ++tile) {
      const auto& list = ret.tile_lists[tile];
      if (list.empty()) continue;
      auto& part = partials[tile];
      part.assign(list.size(), Accum{});
      const int tx = static_cast<int>(tile) % ret.tiles_x;
      const int ty = static_cast<int>(tile) / ret.tiles_x;
      const int px0 = tx * ts, px1 = std::min(W, px0 + ts);
      const int py0 = ty * ts, py1 = std::min(pose.height, py0 + ts);
      alphas.resize(list.size());
      for (int py = py0; py < py1; ++py) {
        for (int px = px0; px < px1; ++px) {
          const double g0 = grad_color.at(py, px, 0);
          const double g1 = grad_color.at(py, px, 1);
          const double g2 = grad_color.at(py, px, 2);
          if (g0 == 0.0 && g1 == 0.0 && g2 == 0.0) continue;
          const double pcx = px + 0.5, pcy = py + 0.5;

          // Replay the forward sweep to find the contributors and final T.
          double T = 1.0;
          int K = 0;
          for (int r : list) {
            const SplatRecord& rec = records[r];
            const double dx = pcx - rec.u, dy = pcy - rec.v;
            const double q = rec.conic.a * dx * dx + 2.0 * rec.conic.b * dx * dy +
                             rec.conic.c * dy * dy;
            const double alpha =
                std::min(opts.alpha_clamp, rec.opacity * std::exp(-0.5 * q));
            const double T_next = T * (1.0 - alpha);
            if (T_next < opts.transmittance_cutoff) break;
            alphas[K] = alpha;
            T = T_next;
            ++K;
          }

          // Back-to-front: Q is the color composited by splats behind i onto
          // the background with unit transmittance; dC/dalpha_i = T_i (c_i - Q).
          double Q0 = opts.background.x, Q1 = opts.background.y, Q2 = opts.background.z;
          double T_cur = T;
          for (int k = K - 1; k >= 0; --k) {
            const int r = list[k];
            const SplatRecord& rec = records[r];
            const double alpha = alphas[k];
            const double T_i = T_cur / (1.0 - alpha);
            Accum& acc = part[k];
            const double aT = alpha * T_i;
            acc[0] += g0 * aT;
            acc[1] += g1 * aT;
            acc[2] += g2 * aT;
            const double dalpha = g0 * T_i * (rec.color.x - Q0) +
                                  g1 * T_i * (rec.color.y - Q1) +
                                  g2 * T_i * (rec.color.z - Q2);
            if (alpha < opts.alpha_clamp) { // clamped alpha is locally constant
              const double dx = pcx - rec.u, dy = pcy - rec.v;
              const double G = alpha / rec.opacity;
              const double dG = dalpha * rec.opacity;
              acc[3] += dalpha * G;
              acc[4] += dG * G * (rec.conic.a * dx + rec.conic.b * dy);
              acc[5] += dG * G * (rec.conic.b * dx + rec.conic.c * dy);
              acc[6] += dG * (-0.5 * G * dx * dx);
              acc[7] += dG * (-G * dx * dy);
              acc[8] += dG * (-0.5 * G * dy * dy);
            }
            Q0 = rec.color.x * alpha + (1.0 - alpha) * Q0;
            Q1 = rec.color.y * alpha + (1.0 - alpha) * Q1;
            Q2 = rec.color.z * alpha + (1.0 - alpha) * Q2;
            T_cur = T_i;
          }
        }
      }
    }
  });

  // Reduce tile partials in tile order so sums are thread-count independent.
  std::vector<Accum> screen(records.size(), Accum{});
  for (int tile = 0; tile < num_tiles; ++tile) {
    const auto& list = ret.tile_lists[tile];
    const auto& part = partials[tile];
    if (part.empty()) continue;
    for (size_t k = 0; k < list.size(); ++k) {
      Accum& dst = screen[list[k]];
      for (int j = 0; j < 9; ++j) dst[j] += part[k][j];
    }
  }
  partials.clear();

  // Chain each record's screen-space gradients to the 14 parameters.
  std::vector<GaussianGrad> grads(cloud.gaussians.size());
  const Mat3& Wrot = ret.vt.rotation;
  const double fx = ret.vt.fx, fy = ret.vt.fy;
  parallel_for(0, static_cast<int64_t>(records.size()), [&](int64_t lo, int64_t hi) {
    for (int64_t ri = lo; ri < hi; ++ri) {
      const SplatRecord& rec = records[ri];
      const Accum& acc = screen[ri];
      const Gaussian& g = cloud.gaussians[rec.index];
      GaussianGrad& out = grads[rec.index];

      const double o = rec.opacity;
      out.opacity_logit = acc[3] * o * (1.0 - o);
      out.color_logit = {acc[0] * rec.color.x * (1.0 - rec.color.x),
                         acc[1] * rec.color.y * (1.0 - rec.color.y),
                         acc[2] * rec.color.z * (1.0 - rec.color.z)};

      // Conic -> cov2d. With N = S^{-1}: dL/dS = -N gN N (Frobenius form).
      const Sym2& N = rec.conic;
      const double gn00 = acc[6], gn01 = 0.5 * acc[7], gn11 = acc[8];
      // N gN:
      const double q00 = N.a * gn00 + N.b * gn01;
      const double q01 = N.a * gn01 + N.b * gn11;
      const double q10 = N.b * gn00 + N.c * gn01;
      const double q11 = N.b * gn01 + N.c * gn11;
      // gS = -(N gN) N:
      const double gs00 = -(q00 * N.a + q01 * N.b);
      const double gs01 = -(q00 * N.b + q01 * N.c);
      const double gs11 = -(q10 * N.b + q11 * N.c);

      const Vec4 quat = g.rotation / norm(g.rotation);
      const Mat3 R = quat_to_mat(quat);
      const Vec3 s = g.scale();
      const Mat3 sigma = covariance(g);
      double J[6];
      projection_jacobian(rec.t, fx, fy, J);
      double V[6];
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c)
          V[r * 3 + c] = J[r * 3 + 0] * Wrot.m[0 * 3 + c] +
                         J[r * 3 + 1] * Wrot.m[1 * 3 + c] +
                         J[r * 3 + 2] * Wrot.m[2 * 3 + c];

      // gSigma = V^T gS V (3x3 symmetric).
      double gsV[6]; // gS * V, 2x3
      for (int c = 0; c < 3; ++c) {
        gsV[0 + c] = gs00 * V[c] + gs01 * V[3 + c];
        gsV[3 + c] = gs01 * V[c] + gs11 * V[3 + c];
      }
      Mat3 gSigma;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          gSigma.m[r * 3 + c] = V[r] * gsV[c] + V[3 + r] * gsV[3 + c];

      // Scale: dL/d s_k = 2 s_k (R^T gSigma R)_kk; log-scale multiplies by s_k.
      const Mat3 A = R.transposed() * gSigma * R;
      out.log_scale = {2.0 * s.x * s.x * A.m[0], 2.0 * s.y * s.y * A.m[4],
                       2.0 * s.z * s.z * A.m[8]};

      // Rotation: dL/dR = 2 gSigma R diag(s^2), then quaternion tangent.
      Mat3 gR = gSigma * R;
      for (int r = 0; r < 3; ++r) {
        gR.m[r * 3 + 0] *= 2.0 * s.x * s.x;
        gR.m[r * 3 + 1] *= 2.0 * s.y * s.y;
        gR.m[r * 3 + 2] *= 2.0 * s.z * s.z;
      }
      Vec4 gq;
      for (int k = 0; k < 4; ++k) {
        const Mat3 dR = quat_to_mat_deriv(quat, k);
        double sum = 0;
        for (int j = 0; j < 9; ++j) sum += gR.m[j] * dR.m[j];
        gq[k] = sum;
      }
      const double radial = dot(gq, quat);
      gq = gq - quat * radial;
      out.rotation = gq;

      // Position: mean2d pulls back through J; cov2d pulls back through the
      // t-dependence of J itself (V = J W).
      Vec3 dt{J[0] * acc[4] + J[3] * acc[5], J[1] * acc[4] + J[4] * acc[5],
              J[2] * acc[4] + J[5] * acc[5]};
      double gV[6]; // 2 gS V Sigma
      {
        double Vs[6]; // V * Sigma
        for (int r = 0; r < 2; ++r)
          for (int c = 0; c < 3; ++c)
            Vs[r * 3 + c] = V[r * 3 + 0] * sigma.m[0 * 3 + c] +
                            V[r * 3 + 1] * sigma.m[1 * 3 + c] +
                            V[r * 3 + 2] * sigma.m[2 * 3 + c];
        for (int c = 0; c < 3; ++c) {
          gV[0 + c] = 2.0 * (gs00 * Vs[c] + gs01 * Vs[3 + c]);
          gV[3 + c] = 2.0 * (gs01 * Vs[c] + gs11 * Vs[3 + c]);
        }
      }
      double gJ[6]; // gV * W^T
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c)
          gJ[r * 3 + c] = gV[r * 3 + 0] * Wrot.m[c * 3 + 0] +
                          gV[r * 3 + 1] * Wrot.m[c * 3 + 1] +
                          gV[r * 3 + 2] * Wrot.m[c * 3 + 2];
      const double zeta = rec.depth;
      const double inv2 = 1.0 / (zeta * zeta);
      const double inv3 = inv2 / zeta;
      dt.x += gJ[2] * fx * inv2;
      dt.y += gJ[5] * (-fy * inv2);
      const double dzeta = gJ[0] * (-fx * inv2) + gJ[2] * (-2.0 * fx * rec.t.x * inv3) +
                           gJ[4] * (fy * inv2) + gJ[5] * (2.0 * fy * rec.t.y * inv3);
      dt.z -= dzeta;
      out.position = Wrot.transposed() * dt;
    }
  });
  return grads;
}

} // namespace hsplat
