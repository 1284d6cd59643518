#pragma once

#include "hsplat/objective.hpp"
#include "hsplat/rasterizer.hpp"
#include "hsplat/splats.hpp"
#include "hsplat/views.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hsplat {

enum class LrSchedule { kConstant, kCosine };

struct OptimConfig {
  int iterations = 2000;
  double learning_rate = 1e-2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  LrSchedule lr_schedule = LrSchedule::kCosine;
  int eval_every = 100;
  std::vector<int> held_out_views;
  uint64_t seed = 42;
  RenderOptions render;

  void validate(int num_views) const;
};

struct IterRecord {
  int iteration = 0;
  int view_index = 0;
  double mse = 0;
  double perceptual = 0;
  double total = 0; // descent objective: mse + lambda_p * perceptual
};

struct CheckpointRecord {
  int iteration = 0; // 0 = before the first update
  double holdout_psnr = 0;
  LossBreakdown holdout_loss; // full objective on the held-out views
};

struct OptimReport {
  std::vector<IterRecord> iterations;
  std::vector<CheckpointRecord> checkpoints; // present only with held-out views
  std::optional<double> init_holdout_psnr;
  std::optional<double> final_holdout_psnr;
  bool init_resampled = false; // grid differed from the reference resolution
  double seconds = 0;          // wall clock; never serialized (breaks reproducibility)
};

/// Deterministic JSON for the report. Timing is deliberately omitted so two
/// identical runs serialize byte-identically.
std::string report_to_json(const OptimReport& report, const OptimConfig& cfg);

/// One Gaussian per grid pixel of each of the 4 views: the pixel ray is
/// advanced to its near intersection with the origin-centered unit sphere
/// (fallback: distance = camera radius), colors seed the color logits, a
/// background-distance matte seeds opacity, and the initial scale is half the
/// local ray spacing. Poses must share an elevation and be azimuth-equidistant.
GaussianCloud init_cloud(const MultiViewSet& views4, int grid_h, int grid_w);

/// Adam refinement of every Gaussian parameter against the non-held-out
/// views, one training view per iteration in round-robin order. The descent
/// objective is mse + lambda_p * perceptual; the identity term is evaluated
/// (not descended) at checkpoints. Deterministic for a fixed config.
std::pair<GaussianCloud, OptimReport> optimize_subject(const GaussianCloud& cloud,
                                                       const MultiViewSet& refs,
                                                       const OptimConfig& cfg,
                                                       const LossWeights& weights);

/// init_cloud on the 4 azimuth-equidistant views of `refs` (requires at least
/// 8 views, divisible by 4), then optimize_subject.
std::pair<GaussianCloud, OptimReport> reconstruct(const MultiViewSet& refs,
                                                  const OptimConfig& cfg,
                                                  const LossWeights& weights,
                                                  int grid_h = 128, int grid_w = 128);

} // namespace hsplat
