#include "hsplat/scheduler.hpp"

#include "hsplat/errors.hpp"
#include "hsplat/rng.hpp"

#include <algorithm>
#include <cmath>

namespace hsplat {

namespace {

void require_step(int t, const NoiseSchedule& sched) {
  require(t >= 1 && t <= sched.T, "timestep out of range [1, T]");
}

void require_same(const LatentSeq& a, const LatentSeq& b, const char* what) {
  require(a.same_shape(b), std::string("latent shape mismatch: ") + what);
}

} // namespace

void NoiseSchedule::validate() const {
  require(T >= 1, "schedule needs at least one step");
  require(static_cast<int>(beta.size()) == T + 1 && alpha.size() == beta.size() &&
              alpha_bar.size() == beta.size() && sigma.size() == beta.size(),
          "schedule tables must have T+1 entries");
  require(alpha_bar[0] == 1.0, "alpha_bar[0] must be 1");
  for (int t = 1; t <= T; ++t) {
    require(beta[t] > 0.0 && beta[t] < 1.0, "beta must lie in (0, 1)");
    if (t > 1) require(beta[t] >= beta[t - 1], "beta must be non-decreasing");
    require(alpha_bar[t] < alpha_bar[t - 1], "alpha_bar must be strictly decreasing");
  }
}

NoiseSchedule make_schedule(int T, double beta_min, double beta_max, BetaSpacing spacing) {
  require(T >= 1, "schedule needs at least one step");
  require(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0,
          "beta range must satisfy 0 < beta_min <= beta_max < 1");
  NoiseSchedule s;
  s.T = T;
  s.beta.assign(T + 1, 0.0);
  s.alpha.assign(T + 1, 1.0);
  s.alpha_bar.assign(T + 1, 1.0);
  s.sigma.assign(T + 1, 0.0);
  if (spacing == BetaSpacing::kLinear) {
    for (int t = 1; t <= T; ++t)
      s.beta[t] = T == 1 ? beta_min
                         : beta_min + (beta_max - beta_min) * (t - 1) / double(T - 1);
  } else {
    // Squared-cosine cumulative schedule, offset 0.008.
    const double off = 0.008;
    auto f = [&](double t) {
      const double x = (t / T + off) / (1.0 + off) * (3.14159265358979323846 / 2.0);
      const double c = std::cos(x);
      return c * c;
    };
    const double f0 = f(0.0);
    double prev_bar = 1.0;
    for (int t = 1; t <= T; ++t) {
      const double bar = f(double(t)) / f0;
      s.beta[t] = std::min(0.999, 1.0 - bar / prev_bar);
      prev_bar = bar;
    }
  }
  for (int t = 1; t <= T; ++t) {
    s.alpha[t] = 1.0 - s.beta[t];
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    s.sigma[t] =
        std::sqrt((1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]) * s.beta[t]);
  }
  s.validate();
  return s;
}

void MixWeights::validate() const {
  require(xi1 >= 0.0 && xi2 >= 0.0, "mix weights must be nonnegative");
}

void LatentSeq::validate() const {
  require(views >= 1 && channels >= 1 && height >= 1 && width >= 1,
          "latent dimensions must be positive");
  require(data.size() == static_cast<size_t>(views) * channels * height * width,
          "latent buffer size does not match its dimensions");
  for (double v : data) require(std::isfinite(v), "latent entries must be finite");
}

LatentSeq ZeroDenoiser::predict(const LatentSeq& z_t, int, double, const LatentSeq&) const {
  LatentSeq out = z_t;
  std::fill(out.data.begin(), out.data.end(), 0.0);
  return out;
}

TargetDenoiser::TargetDenoiser(LatentSeq target, LatentSeq eps, LatentSeq j_bar,
                               NoiseSchedule sched, MixWeights w)
    : target_(std::move(target)), eps_(std::move(eps)), j_bar_(std::move(j_bar)),
      sched_(std::move(sched)), w_(w) {
  require_same(target_, eps_, "oracle target vs eps");
  require_same(target_, j_bar_, "oracle target vs j_bar");
  sched_.validate();
}

LatentSeq TargetDenoiser::predict(const LatentSeq& z_t, int t, double, const LatentSeq&) const {
  require_step(t, sched_);
  require_same(z_t, target_, "oracle input vs target");
  // Desired landing point for the sigma=0 reverse step: the step-(t-1) point
  // of the target's closed-form forward trajectory (the target itself at 0).
  const LatentSeq w_prev = forward_closed_form(target_, eps_, j_bar_, t - 1, sched_, w_);
  // Invert z_{t-1} = (z_t - (1-a_t)/sqrt(1-abar_t) * pred) / sqrt(a_t) for pred.
  const double sqrt_a = std::sqrt(sched_.alpha[t]);
  const double coef = std::sqrt(1.0 - sched_.alpha_bar[t]) / (1.0 - sched_.alpha[t]);
  LatentSeq pred = z_t;
  for (size_t i = 0; i < pred.data.size(); ++i)
    pred.data[i] = (z_t.data[i] - sqrt_a * w_prev.data[i]) * coef;
  return pred;
}

LatentSeq forward_mix_step(const LatentSeq& z_prev, const LatentSeq& eps,
                           const LatentSeq& j_bar, int t, const NoiseSchedule& sched,
                           const MixWeights& w) {
  sched.validate();
  w.validate();
  require_step(t, sched);
  require_same(z_prev, eps, "z_prev vs eps");
  require_same(z_prev, j_bar, "z_prev vs j_bar");
  const double sa = std::sqrt(sched.alpha[t]);
  const double sb = std::sqrt(1.0 - sched.alpha[t]);
  LatentSeq out = z_prev;
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = sa * z_prev.data[i] + sb * (w.xi1 * eps.data[i] + w.xi2 * j_bar.data[i]);
  return out;
}

LatentSeq forward_closed_form(const LatentSeq& z0, const LatentSeq& eps,
                              const LatentSeq& j_bar, int t, const NoiseSchedule& sched,
                              const MixWeights& w) {
  sched.validate();
  w.validate();
  require(t >= 0 && t <= sched.T, "timestep out of range [0, T]");
  require_same(z0, eps, "z0 vs eps");
  require_same(z0, j_bar, "z0 vs j_bar");
  if (t == 0) return z0;
  const double sbar = std::sqrt(sched.alpha_bar[t]);
  double mix_coef = 0;
  for (int s = 1; s <= t; ++s)
    mix_coef += std::sqrt(sched.alpha_bar[t] / sched.alpha_bar[s]) *
                std::sqrt(1.0 - sched.alpha[s]);
  LatentSeq out = z0;
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] =
        sbar * z0.data[i] + mix_coef * (w.xi1 * eps.data[i] + w.xi2 * j_bar.data[i]);
  return out;
}

LatentSeq reverse_step(const LatentSeq& z_t, const LatentSeq& pred, int t,
                       const NoiseSchedule& sched, const LatentSeq& noise) {
  sched.validate();
  require_step(t, sched);
  require_same(z_t, pred, "z_t vs prediction");
  require_same(z_t, noise, "z_t vs noise");
  const double inv_sqrt_a = 1.0 / std::sqrt(sched.alpha[t]);
  const double coef = (1.0 - sched.alpha[t]) / std::sqrt(1.0 - sched.alpha_bar[t]);
  const double sig = sched.sigma[t];
  LatentSeq out = z_t;
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] =
        inv_sqrt_a * (z_t.data[i] - coef * pred.data[i]) + sig * noise.data[i];
  return out;
}

LatentSeq sample_noise(int views, int channels, int height, int width, std::uint64_t seed) {
  LatentSeq out(views, channels, height, width);
  Rng rng(seed);
  for (double& v : out.data) v = rng.normal();
  return out;
}

LatentSeq sample_stage2(const LatentSeq& j_bar, const Denoiser& d, const NoiseSchedule& sched,
                        const MixWeights& w, const LatentSeq& cond, double elevation,
                        std::uint64_t seed, bool stochastic,
                        const std::function<void(int, const LatentSeq&)>& on_step) {
  sched.validate();
  w.validate();
  j_bar.validate();
  const LatentSeq eps =
      sample_noise(j_bar.views, j_bar.channels, j_bar.height, j_bar.width, seed);
  LatentSeq z = j_bar;
  for (size_t i = 0; i < z.data.size(); ++i)
    z.data[i] = w.xi1 * eps.data[i] + w.xi2 * j_bar.data[i];

  Rng step_rng(seed ^ 0x9e3779b97f4a7c15ull); // separate stream for sigma_t noise
  LatentSeq noise(j_bar.views, j_bar.channels, j_bar.height, j_bar.width);
  for (int t = sched.T; t >= 1; --t) {
    const LatentSeq pred = d.predict(z, t, elevation, cond);
    require(pred.same_shape(z), "denoiser changed the latent shape");
    if (stochastic && t > 1) {
      for (double& v : noise.data) v = step_rng.normal();
    } else {
      std::fill(noise.data.begin(), noise.data.end(), 0.0);
    }
    z = reverse_step(z, pred, t, sched, noise);
    if (on_step) on_step(t, z);
  }
  return z;
}

LatentSeq upsample(const LatentSeq& in, int factor) {
  in.validate();
  require(factor >= 1, "upsample factor must be a positive integer");
  if (factor == 1) return in;
  const int H = in.height, W = in.width;
  const int oh = H * factor, ow = W * factor;
  LatentSeq out(in.views, in.channels, oh, ow);
  out.down_factor = in.down_factor / factor > 0 ? in.down_factor / factor : 1;
  for (int v = 0; v < in.views; ++v)
    for (int c = 0; c < in.channels; ++c)
      for (int y = 0; y < oh; ++y) {
        const double sy = (y + 0.5) / factor - 0.5;
        const int y0 = std::max(0, std::min(H - 1, static_cast<int>(std::floor(sy))));
        const int y1 = std::min(H - 1, y0 + 1);
        const double fy = std::min(1.0, std::max(0.0, sy - y0));
        for (int x = 0; x < ow; ++x) {
          const double sx = (x + 0.5) / factor - 0.5;
          const int x0 = std::max(0, std::min(W - 1, static_cast<int>(std::floor(sx))));
          const int x1 = std::min(W - 1, x0 + 1);
          const double fx = std::min(1.0, std::max(0.0, sx - x0));
          const double top = (1 - fx) * in.at(v, c, y0, x0) + fx * in.at(v, c, y0, x1);
          const double bot = (1 - fx) * in.at(v, c, y1, x0) + fx * in.at(v, c, y1, x1);
          out.at(v, c, y, x) = (1 - fy) * top + fy * bot;
        }
      }
  return out;
}

LatentSeq downsample(const LatentSeq& in, int factor) {
  in.validate();
  require(factor >= 1, "downsample factor must be a positive integer");
  if (factor == 1) return in;
  require(in.height % factor == 0 && in.width % factor == 0,
          "downsample factor must divide both image dimensions");
  const int oh = in.height / factor, ow = in.width / factor;
  LatentSeq out(in.views, in.channels, oh, ow);
  out.down_factor = in.down_factor * factor;
  const double inv = 1.0 / (static_cast<double>(factor) * factor);
  for (int v = 0; v < in.views; ++v)
    for (int c = 0; c < in.channels; ++c)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          double s = 0;
          for (int i = 0; i < factor; ++i)
            for (int j = 0; j < factor; ++j)
              s += in.at(v, c, y * factor + i, x * factor + j);
          out.at(v, c, y, x) = s * inv;
        }
  return out;
}

} // namespace hsplat
