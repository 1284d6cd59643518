#include "hsplat/optimizer.hpp"

#include "hsplat/errors.hpp"
#include "hsplat/io_util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <set>

namespace hsplat {

namespace {

constexpr int kParams = 14;
static_assert(sizeof(Gaussian) == kParams * sizeof(double),
              "Gaussian must pack its 14 parameters contiguously");
static_assert(sizeof(GaussianGrad) == kParams * sizeof(double),
              "GaussianGrad must mirror the Gaussian parameter layout");

void load_params(const Gaussian& g, double* p) {
  std::memcpy(p, static_cast<const void*>(&g), sizeof(Gaussian));
}
void store_params(const double* p, Gaussian& g) {
  std::memcpy(static_cast<void*>(&g), p, sizeof(Gaussian));
}

double lr_at(const OptimConfig& cfg, int it) {
  if (cfg.lr_schedule == LrSchedule::kConstant) return cfg.learning_rate;
  const double progress = static_cast<double>(it) / cfg.iterations;
  return cfg.learning_rate * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

struct HoldoutEval {
  double psnr_mean = 0;
  LossBreakdown loss;
};

HoldoutEval eval_holdout(const GaussianCloud& cloud, const MultiViewSet& refs,
                         const std::vector<int>& holdout, const OptimConfig& cfg,
                         const LossWeights& weights, const Embedder& embedder) {
  std::vector<Image> rendered, reference;
  double psnr_sum = 0;
  for (int vi : holdout) {
    RenderedView view = render(cloud, refs.poses[vi], cfg.render);
    psnr_sum += psnr(view.color, refs.images[vi]);
    rendered.push_back(std::move(view.color));
    reference.push_back(refs.images[vi]);
  }
  HoldoutEval out;
  out.psnr_mean = psnr_sum / static_cast<double>(holdout.size());
  out.loss = total_loss(rendered, reference, embedder, weights);
  return out;
}

} // namespace

void OptimConfig::validate(int num_views) const {
  require(iterations >= 1, "optimizer needs at least one iteration");
  require(learning_rate > 0, "learning rate must be positive");
  require(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1,
          "adam betas must lie in [0, 1)");
  require(adam_eps > 0, "adam epsilon must be positive");
  require(eval_every >= 1, "eval_every must be positive");
  std::set<int> seen;
  for (int h : held_out_views) {
    require(h >= 0 && h < num_views, "held-out index outside the view set");
    require(seen.insert(h).second, "duplicate held-out index");
  }
  require(static_cast<int>(held_out_views.size()) < num_views,
          "at least one view must remain for training");
}

GaussianCloud init_cloud(const MultiViewSet& views4, int grid_h, int grid_w) {
  views4.validate();
  require(views4.size() == 4, "initialization takes exactly 4 views");
  require(grid_h >= 1 && grid_w >= 1, "grid must be positive");

  const double elev = views4.poses[0].elevation;
  for (const CameraPose& p : views4.poses)
    require(std::abs(p.elevation - elev) < 1e-9,
            "the four initialization views must share an elevation");
  std::array<double, 4> az;
  for (int i = 0; i < 4; ++i) az[i] = views4.poses[i].azimuth;
  std::sort(az.begin(), az.end());
  for (int i = 1; i < 4; ++i)
    require(std::abs(az[i] - az[0] - 90.0 * i) < 1e-6,
            "the four initialization views must be azimuth-equidistant");

  GaussianCloud cloud;
  cloud.gaussians.reserve(static_cast<size_t>(4) * grid_h * grid_w);
  cloud.layout_hint = {{4, grid_h, grid_w}};

  for (int vi = 0; vi < 4; ++vi) {
    CameraPose pose = views4.poses[vi];
    Image img = views4.images[vi];
    if (img.height != grid_h || img.width != grid_w)
      img = resize_bilinear(img, grid_h, grid_w);
    pose.height = grid_h;
    pose.width = grid_w;

    const double half_fov_span = 2.0 * std::tan(deg_to_rad(pose.fov_y) / 2.0);
    for (int py = 0; py < grid_h; ++py) {
      for (int px = 0; px < grid_w; ++px) {
        const Ray ray = pixel_ray(pose, px, py);
        // Near intersection with the unit sphere the subject lives in;
        // rays that miss keep the nominal subject distance.
        const double b = dot(ray.origin, ray.direction);
        const double disc = b * b - (dot(ray.origin, ray.origin) - 1.0);
        double s = pose.radius;
        if (disc >= 0) {
          const double near_hit = -b - std::sqrt(disc);
          if (near_hit > 0) s = near_hit;
        }

        Gaussian g;
        g.position = ray.origin + ray.direction * s;
        const double pixel_span = s * half_fov_span / grid_h; // world size of one pixel
        const double sigma = 0.5 * pixel_span;
        g.log_scale = {std::log(sigma), std::log(sigma), std::log(sigma)};
        g.rotation = {1, 0, 0, 0};

        double maxdev = 0;
        for (int c = 0; c < 3; ++c) {
          const double v = img.at(py, px, c);
          maxdev = std::max(maxdev, std::abs(v - 1.0)); // distance to white
          const double clamped = std::min(1.0 - 1e-4, std::max(1e-4, v));
          g.color_logit[c] = logit(clamped);
        }
        g.opacity_logit = maxdev > 0.05 ? logit(0.9) : logit(0.01);
        cloud.gaussians.push_back(g);
      }
    }
  }
  return cloud;
}

std::pair<GaussianCloud, OptimReport> optimize_subject(const GaussianCloud& cloud,
                                                       const MultiViewSet& refs,
                                                       const OptimConfig& cfg,
                                                       const LossWeights& weights) {
  const auto start = std::chrono::steady_clock::now();
  cloud.validate();
  refs.validate();
  weights.validate();
  const int num_views = static_cast<int>(refs.size());
  cfg.validate(num_views);

  std::vector<int> train;
  {
    std::set<int> holdout(cfg.held_out_views.begin(), cfg.held_out_views.end());
    for (int i = 0; i < num_views; ++i)
      if (!holdout.count(i)) train.push_back(i);
  }

  GaussianCloud current = cloud;
  const size_t n = current.gaussians.size();
  std::vector<double> m(n * kParams, 0.0), v(n * kParams, 0.0);

  OptimReport report;
  std::unique_ptr<PyramidEmbedder> embedder;
  if (!cfg.held_out_views.empty()) {
    embedder = std::make_unique<PyramidEmbedder>();
    CheckpointRecord ck;
    ck.iteration = 0;
    const HoldoutEval ev =
        eval_holdout(current, refs, cfg.held_out_views, cfg, weights, *embedder);
    ck.holdout_psnr = ev.psnr_mean;
    ck.holdout_loss = ev.loss;
    report.checkpoints.push_back(ck);
    report.init_holdout_psnr = ev.psnr_mean;
  }

  double beta1_pow = 1.0, beta2_pow = 1.0;
  for (int it = 0; it < cfg.iterations; ++it) {
    const int vi = train[it % train.size()];
    RenderedView view = render(current, refs.poses[vi], cfg.render);
    const Image& ref = refs.images[vi];

    IterRecord rec;
    rec.iteration = it;
    rec.view_index = vi;
    rec.mse = mse(view.color, ref);
    rec.perceptual = weights.lambda_p > 0 ? perceptual_proxy(view.color, ref) : 0.0;
    rec.total = rec.mse + weights.lambda_p * rec.perceptual;
    report.iterations.push_back(rec);

    Image grad_pixels = mse_grad(view.color, ref, 1);
    if (weights.lambda_p > 0) {
      const Image gp = perceptual_grad(view.color, ref, 1);
      for (size_t i = 0; i < grad_pixels.data.size(); ++i)
        grad_pixels.data[i] += weights.lambda_p * gp.data[i];
    }
    const std::vector<GaussianGrad> grads = render_backward(view, current, grad_pixels);

    const double lr = lr_at(cfg, it);
    beta1_pow *= cfg.adam_beta1;
    beta2_pow *= cfg.adam_beta2;
    const double m_corr = 1.0 / (1.0 - beta1_pow);
    const double v_corr = 1.0 / (1.0 - beta2_pow);

    for (size_t gi = 0; gi < n; ++gi) {
      double gvals[kParams], pvals[kParams];
      std::memcpy(gvals, static_cast<const void*>(&grads[gi]), sizeof(gvals));
      load_params(current.gaussians[gi], pvals);
      double* mg = m.data() + gi * kParams;
      double* vg = v.data() + gi * kParams;
      for (int k = 0; k < kParams; ++k) {
        const double gk = gvals[k];
        if (!std::isfinite(gk))
          throw ContractViolation("non-finite gradient at iteration " +
                                  std::to_string(it));
        mg[k] = cfg.adam_beta1 * mg[k] + (1.0 - cfg.adam_beta1) * gk;
        vg[k] = cfg.adam_beta2 * vg[k] + (1.0 - cfg.adam_beta2) * gk * gk;
        const double mhat = mg[k] * m_corr;
        const double vhat = vg[k] * v_corr;
        pvals[k] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
      }
      store_params(pvals, current.gaussians[gi]);
      current.gaussians[gi].renormalize_rotation();
    }

    if (!cfg.held_out_views.empty() &&
        ((it + 1) % cfg.eval_every == 0 || it + 1 == cfg.iterations)) {
      CheckpointRecord ck;
      ck.iteration = it + 1;
      const HoldoutEval ev =
          eval_holdout(current, refs, cfg.held_out_views, cfg, weights, *embedder);
      ck.holdout_psnr = ev.psnr_mean;
      ck.holdout_loss = ev.loss;
      report.checkpoints.push_back(ck);
      report.final_holdout_psnr = ev.psnr_mean;
    }
  }

  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(current), std::move(report)};
}

std::pair<GaussianCloud, OptimReport> reconstruct(const MultiViewSet& refs,
                                                  const OptimConfig& cfg,
                                                  const LossWeights& weights, int grid_h,
                                                  int grid_w) {
  refs.validate();
  const int n = static_cast<int>(refs.size());
  require(n >= 8 && n % 4 == 0,
          "reconstruction needs at least 8 views with a count divisible by 4");

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (refs.poses[a].azimuth != refs.poses[b].azimuth)
      return refs.poses[a].azimuth < refs.poses[b].azimuth;
    return a < b;
  });

  MultiViewSet views4;
  for (int k = 0; k < 4; ++k) {
    const int idx = order[static_cast<size_t>(k) * n / 4];
    views4.images.push_back(refs.images[idx]);
    views4.poses.push_back(refs.poses[idx]);
  }

  GaussianCloud init = init_cloud(views4, grid_h, grid_w);
  auto [cloud, report] = optimize_subject(init, refs, cfg, weights);
  report.init_resampled =
      grid_h != refs.images[0].height || grid_w != refs.images[0].width;
  return {std::move(cloud), std::move(report)};
}

std::string report_to_json(const OptimReport& report, const OptimConfig& cfg) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json jc;
  jc["iterations"] = cfg.iterations;
  jc["learning_rate"] = round_sig9(cfg.learning_rate);
  jc["adam_beta1"] = round_sig9(cfg.adam_beta1);
  jc["adam_beta2"] = round_sig9(cfg.adam_beta2);
  jc["adam_eps"] = round_sig9(cfg.adam_eps);
  jc["lr_schedule"] = cfg.lr_schedule == LrSchedule::kCosine ? "cosine" : "constant";
  jc["eval_every"] = cfg.eval_every;
  jc["held_out_views"] = cfg.held_out_views;
  jc["seed"] = cfg.seed;
  jc["background"] = {round_sig9(cfg.render.background.x),
                      round_sig9(cfg.render.background.y),
                      round_sig9(cfg.render.background.z)};
  doc["config"] = std::move(jc);
  doc["init_resampled"] = report.init_resampled;
  if (report.init_holdout_psnr) doc["init_holdout_psnr"] = round_sig9(*report.init_holdout_psnr);
  if (report.final_holdout_psnr)
    doc["final_holdout_psnr"] = round_sig9(*report.final_holdout_psnr);
  doc["iterations"] = nlohmann::ordered_json::array();
  for (const IterRecord& r : report.iterations) {
    nlohmann::ordered_json jr;
    jr["iteration"] = r.iteration;
    jr["view"] = r.view_index;
    jr["mse"] = round_sig9(r.mse);
    jr["perceptual"] = round_sig9(r.perceptual);
    jr["total"] = round_sig9(r.total);
    doc["iterations"].push_back(std::move(jr));
  }
  doc["checkpoints"] = nlohmann::ordered_json::array();
  for (const CheckpointRecord& c : report.checkpoints) {
    nlohmann::ordered_json jr;
    jr["iteration"] = c.iteration;
    jr["holdout_psnr"] = round_sig9(c.holdout_psnr);
    jr["mse"] = round_sig9(c.holdout_loss.mse);
    jr["perceptual"] = round_sig9(c.holdout_loss.perceptual);
    jr["id"] = round_sig9(c.holdout_loss.id);
    jr["total"] = round_sig9(c.holdout_loss.total);
    doc["checkpoints"].push_back(std::move(jr));
  }
  return doc.dump(2) + "\n";
}

} // namespace hsplat
