#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace hsplat {

/// DDPM-style noise schedule. Tables are indexed by timestep t in [0, T];
/// index 0 is the identity step (beta 0, alpha_bar 1) so alpha_bar[t] is the
/// product of alpha over steps 1..t.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;      // beta[0] = 0
  std::vector<double> alpha;     // 1 - beta
  std::vector<double> alpha_bar; // cumulative product, alpha_bar[0] = 1
  std::vector<double> sigma;     // posterior std; sigma[1] = 0

  void validate() const;
};

enum class BetaSpacing { kLinear, kCosine };

/// Linear spacing interpolates beta from beta_min to beta_max. Cosine spacing
/// follows the squared-cosine cumulative schedule (offset 0.008, betas capped
/// at 0.999) and ignores beta_min/beta_max.
NoiseSchedule make_schedule(int T, double beta_min, double beta_max,
                            BetaSpacing spacing = BetaSpacing::kLinear);

/// Blend weights for noise (xi1) and the upsampled low-resolution result (xi2).
struct MixWeights {
  double xi1 = 0.4;
  double xi2 = 0.6;

  void validate() const;
};

/// views x channels x height x width tensor. At this scale "latent" pixels are
/// plain pixels; channel count is caller-defined. down_factor tags how much
/// coarser this tensor is than the full-resolution stage.
struct LatentSeq {
  int views = 0, channels = 0, height = 0, width = 0;
  int down_factor = 1;
  std::vector<double> data;

  LatentSeq() = default;
  LatentSeq(int v, int c, int h, int w, double fill = 0.0)
      : views(v), channels(c), height(h), width(w),
        data(static_cast<size_t>(v) * c * h * w, fill) {}

  double& at(int v, int c, int y, int x) {
    return data[((static_cast<size_t>(v) * channels + c) * height + y) * width + x];
  }
  double at(int v, int c, int y, int x) const {
    return data[((static_cast<size_t>(v) * channels + c) * height + y) * width + x];
  }
  std::size_t size() const { return data.size(); }
  bool same_shape(const LatentSeq& o) const {
    return views == o.views && channels == o.channels && height == o.height &&
           width == o.width;
  }
  void validate() const; // dims positive, entries finite
};

/// Predicts the perturbation to remove at step t, conditioned on an elevation
/// and an arbitrary conditioning tensor (may be empty).
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual LatentSeq predict(const LatentSeq& z_t, int t, double elevation,
                            const LatentSeq& cond) const = 0;
};

/// Always predicts zero; reverse steps degenerate to pure rescaling.
class ZeroDenoiser : public Denoiser {
 public:
  LatentSeq predict(const LatentSeq& z_t, int, double, const LatentSeq&) const override;
};

/// Oracle that drives deterministic sampling exactly onto `target`: at step t
/// it predicts the perturbation that makes the sigma=0 reverse step land on
/// the closed-form forward trajectory of the target (see forward_closed_form),
/// so z_0 equals the target no matter where sampling started.
class TargetDenoiser : public Denoiser {
 public:
  TargetDenoiser(LatentSeq target, LatentSeq eps, LatentSeq j_bar, NoiseSchedule sched,
                 MixWeights w);
  LatentSeq predict(const LatentSeq& z_t, int t, double elevation,
                    const LatentSeq& cond) const override;

 private:
  LatentSeq target_, eps_, j_bar_;
  NoiseSchedule sched_;
  MixWeights w_;
};

/// One mixed forward step:
///   z_t = sqrt(alpha_t) * z_prev + sqrt(1 - alpha_t) * (xi1*eps + xi2*j_bar).
LatentSeq forward_mix_step(const LatentSeq& z_prev, const LatentSeq& eps,
                           const LatentSeq& j_bar, int t, const NoiseSchedule& sched,
                           const MixWeights& w);

/// Closed form of t iterated forward_mix_step calls with the same eps and
/// j_bar every step. Unrolling the recurrence gives
///   z_t = sqrt(abar_t) * z_0
///       + [ sum_{s=1..t} sqrt(abar_t / abar_s) * sqrt(1 - alpha_s) ] * (xi1*eps + xi2*j_bar),
/// since the step-s injection is decayed by sqrt(alpha_{s+1} * ... * alpha_t).
LatentSeq forward_closed_form(const LatentSeq& z0, const LatentSeq& eps,
                              const LatentSeq& j_bar, int t, const NoiseSchedule& sched,
                              const MixWeights& w);

/// One reverse step:
///   z_{t-1} = (z_t - (1-alpha_t)/sqrt(1-abar_t) * pred) / sqrt(alpha_t)
///           + sigma_t * noise.
LatentSeq reverse_step(const LatentSeq& z_t, const LatentSeq& pred, int t,
                       const NoiseSchedule& sched, const LatentSeq& noise);

/// Gaussian tensor with the given shape drawn from a fixed seed; the same
/// helper seeds sample_stage2's initialization, so oracles can reproduce it.
LatentSeq sample_noise(int views, int channels, int height, int width, std::uint64_t seed);

/// Second-stage sampling: initialize z_T = xi1*eps + xi2*j_bar and run the
/// reverse process down to z_0, querying the denoiser each step. When
/// stochastic is false the sigma_t * z term is dropped (deterministic path).
LatentSeq sample_stage2(const LatentSeq& j_bar, const Denoiser& d, const NoiseSchedule& sched,
                        const MixWeights& w, const LatentSeq& cond, double elevation,
                        std::uint64_t seed, bool stochastic = true,
                        const std::function<void(int, const LatentSeq&)>& on_step = {});

/// Bilinear upsample by an integer factor (half-pixel centers).
LatentSeq upsample(const LatentSeq& in, int factor);
/// factor x factor area-mean downsample; dimensions must divide evenly.
LatentSeq downsample(const LatentSeq& in, int factor);

} // namespace hsplat
