#include "hsplat/harness.hpp"

#include "hsplat/errors.hpp"
#include "hsplat/io_util.hpp"
#include "hsplat/png_io.hpp"
#include "hsplat/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace hsplat {

namespace {

constexpr double kShellOpacity = 0.97;

double clamp01(double v) { return std::min(0.95, std::max(0.05, v)); }

Vec3 color_logits(double r, double g, double b) {
  return {logit(clamp01(r)), logit(clamp01(g)), logit(clamp01(b))};
}

// Ellipsoid point for a unit direction, and its outward surface normal.
Vec3 ellipsoid_point(const Vec3& axes, const Vec3& dir) {
  return {axes.x * dir.x, axes.y * dir.y, axes.z * dir.z};
}
Vec3 ellipsoid_normal(const Vec3& axes, const Vec3& p) {
  return normalized(Vec3{p.x / (axes.x * axes.x), p.y / (axes.y * axes.y),
                         p.z / (axes.z * axes.z)});
}

struct ShellPalette {
  double ar, br, ag, bg, freq, ab, bb;
};

Gaussian shell_splat(const Vec3& axes, const Vec3& dir, double sigma_t,
                     const ShellPalette& pal) {
  Gaussian g;
  g.position = ellipsoid_point(axes, dir);
  const Vec3 n = ellipsoid_normal(axes, g.position);
  g.rotation = quat_between(Vec3{0, 0, 1}, n); // local z = surface normal
  g.log_scale = {std::log(sigma_t), std::log(sigma_t), std::log(0.25 * sigma_t)};
  g.opacity_logit = logit(kShellOpacity);
  // Appearance is a function of height and the squared lateral coordinates,
  // so it is exactly symmetric under x -> -x and z -> -z.
  const double y = g.position.y, x2 = g.position.x * g.position.x,
               z2 = g.position.z * g.position.z;
  g.color_logit = color_logits(0.62 + pal.ar * y + pal.br * x2,
                               0.52 + pal.ag * std::cos(pal.freq * y) + pal.bg * z2,
                               0.45 + pal.ab * y * y + pal.bb * (x2 + z2));
  return g;
}

struct BlobKind {
  const char* name;
  double theta_deg, phi_deg; // anchor on the shell
  double spread1, spread2;   // tangent-plane stddevs
  double r, g, b;
};

const BlobKind kBlobKinds[] = {
    {"mouth", -22, 0, 0.085, 0.028, 0.62, 0.22, 0.24},
    {"eye_left", 10, 19, 0.032, 0.032, 0.15, 0.13, 0.16},
    {"eye_right", 10, -19, 0.032, 0.032, 0.15, 0.13, 0.16},
    {"nose", -4, 0, 0.035, 0.05, 0.55, 0.42, 0.38},
    {"brow_left", 22, 19, 0.055, 0.012, 0.22, 0.16, 0.12},
    {"brow_right", 22, -19, 0.055, 0.012, 0.22, 0.16, 0.12},
};

Vec3 direction_of(double theta_deg, double phi_deg) {
  const double t = deg_to_rad(theta_deg), p = deg_to_rad(phi_deg);
  return {std::cos(t) * std::sin(p), std::sin(t), std::cos(t) * std::cos(p)};
}

} // namespace

SyntheticSubject gen_subject(uint64_t seed, int n_feature_blobs,
                             const std::vector<double>& expression, bool accessory) {
  require(n_feature_blobs >= 0, "feature blob count must be nonnegative");
  SyntheticSubject subject;
  subject.seed = seed;
  subject.n_feature_blobs = n_feature_blobs;
  subject.expression = expression;
  subject.accessory = accessory;

  Rng rng(seed);
  const Vec3 axes{0.62 * rng.uniform(0.94, 1.06), 0.78 * rng.uniform(0.94, 1.06),
                  0.66 * rng.uniform(0.94, 1.06)};
  ShellPalette pal;
  pal.ar = rng.uniform(0.10, 0.25);
  pal.br = rng.uniform(-0.30, 0.30);
  pal.ag = rng.uniform(0.08, 0.20);
  pal.bg = rng.uniform(-0.30, 0.30);
  pal.freq = rng.uniform(2.0, 4.0);
  pal.ab = rng.uniform(-0.25, 0.25);
  pal.bb = rng.uniform(-0.30, 0.30);

  auto& gs = subject.cloud.gaussians;

  // Shell: latitude rings, each a mirror-closed azimuth orbit. Per ring the
  // points come in quadruples {phi, -phi, pi-phi, pi+phi} built by explicit
  // sign flips, so the splat set is bitwise symmetric under x -> -x and
  // z -> -z (the basis of the mirrored-view check).
  const int rings = 44;
  const double sigma_t = 0.6 * kPi * ((axes.x + axes.y + axes.z) / 3.0) / rings;
  for (int i = 0; i < rings; ++i) {
    const double theta = deg_to_rad(-90.0 + (i + 0.5) * 180.0 / rings);
    const double ct = std::cos(theta), st = std::sin(theta);
    const int count = 4 * std::max<long>(1, std::lround(22.0 * ct));
    const int quarter = count / 4;
    for (int j = 0; j <= quarter; ++j) {
      const double phi = 2.0 * kPi * j / count;
      const double s = std::sin(phi), c = std::cos(phi);
      std::vector<std::pair<double, double>> pts;
      if (j == 0) pts = {{s, c}, {s, -c}};
      else if (j == quarter) pts = {{s, c}, {-s, c}};
      else pts = {{s, c}, {-s, c}, {s, -c}, {-s, -c}};
      for (const auto& [sx, cz] : pts)
        gs.push_back(shell_splat(axes, Vec3{ct * sx, st, ct * cz}, sigma_t, pal));
    }
  }
  subject.parts.push_back({"shell", 0, gs.size()});

  // Feature blobs. Expression shifts enter as pure displacements so that the
  // random stream (and every other splat) is untouched by expression changes.
  const double e0 = expression.size() > 0 ? expression[0] : 0.0;
  const double e1 = expression.size() > 1 ? expression[1] : 0.0;
  const double e2 = expression.size() > 2 ? expression[2] : 0.0;
  const int kNamed = static_cast<int>(std::size(kBlobKinds));
  for (int b = 0; b < n_feature_blobs; ++b) {
    BlobKind kind;
    if (b < kNamed) {
      kind = kBlobKinds[b];
    } else {
      kind = {"extra", rng.uniform(-55.0, 55.0), rng.uniform(0.0, 360.0),
              0.04,    0.04,
              rng.uniform(0.15, 0.75), rng.uniform(0.15, 0.75), rng.uniform(0.15, 0.75)};
    }
    const size_t begin = gs.size();
    const Vec3 dir = direction_of(kind.theta_deg, kind.phi_deg);
    const Vec3 anchor = ellipsoid_point(axes, dir) * 1.01;
    const Vec3 n = ellipsoid_normal(axes, anchor);
    Vec3 up{0, 1, 0};
    if (norm(cross(up, n)) < 1e-9) up = Vec3{1, 0, 0};
    const Vec3 t1 = normalized(cross(up, n));
    const Vec3 t2 = cross(n, t1);

    const bool is_mouth = std::string(kind.name) == "mouth";
    const Vec3 shift = is_mouth ? t1 * (0.1 * e0) + t2 * (0.1 * e1) : Vec3{};
    const double spread_mult = is_mouth ? std::max(0.1, 1.0 + 0.3 * e2) : 1.0;

    const double dr = rng.uniform(-0.04, 0.04);
    const double dg = rng.uniform(-0.04, 0.04);
    const double db = rng.uniform(-0.04, 0.04);
    for (int k = 0; k < 36; ++k) {
      Gaussian g;
      const double j1 = rng.normal() * kind.spread1 * spread_mult;
      const double j2 = rng.normal() * kind.spread2 * spread_mult;
      const double jn = rng.normal() * 0.004;
      g.position = anchor + shift + t1 * j1 + t2 * j2 + n * jn;
      const double s = 0.014 * rng.uniform(0.8, 1.25);
      g.log_scale = {std::log(s), std::log(s), std::log(s)};
      g.rotation = {1, 0, 0, 0};
      g.opacity_logit = logit(kShellOpacity);
      g.color_logit = color_logits(kind.r + dr, kind.g + dg, kind.b + db);
      gs.push_back(g);
    }
    subject.parts.push_back({kind.name, begin, gs.size()});
  }

  if (accessory) {
    const size_t begin = gs.size();
    const int count = 160; // multiple of 4, matching the shell's symmetry
    for (int k = 0; k < count; ++k) {
      const double phi = 2.0 * kPi * k / count;
      const Vec3 dir = direction_of(48.0, rad_to_deg(phi));
      Gaussian g;
      g.position = ellipsoid_point(axes, dir) * 1.03;
      const Vec3 n = ellipsoid_normal(axes, g.position);
      g.rotation = quat_between(Vec3{0, 0, 1}, n);
      g.log_scale = {std::log(0.035), std::log(0.035), std::log(0.012)};
      g.opacity_logit = logit(kShellOpacity);
      g.color_logit = color_logits(0.25, 0.30, 0.55);
      gs.push_back(g);
    }
    subject.parts.push_back({"accessory", begin, gs.size()});
  }

  subject.cloud.validate();
  return subject;
}

MultiViewSet render_subject(const SyntheticSubject& subject,
                            const std::vector<CameraPose>& poses,
                            const RenderOptions& opts) {
  require(!poses.empty(), "render_subject needs at least one pose");
  MultiViewSet set;
  for (const CameraPose& pose : poses) {
    set.images.push_back(render(subject.cloud, pose, opts).color);
    set.poses.push_back(pose);
  }
  return set;
}

void ExperimentSpec::validate() const {
  require(!seeds.empty(), "experiment needs at least one subject seed");
  require(ring.views >= 1 && ring.size >= 1, "experiment ring must be non-degenerate");
  require(!holdout.empty(), "experiment needs held-out view indices");
  require(!variants.empty(), "experiment needs at least one variant");
}

namespace {

void parse_weights(const nlohmann::json& j, LossWeights& w) {
  if (j.contains("lambda_p")) w.lambda_p = j["lambda_p"].get<double>();
  if (j.contains("lambda_i")) w.lambda_i = j["lambda_i"].get<double>();
}

void parse_optim(const nlohmann::json& j, OptimConfig& cfg, int& grid) {
  if (j.contains("iterations")) cfg.iterations = j["iterations"].get<int>();
  if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("eval_every")) cfg.eval_every = j["eval_every"].get<int>();
  if (j.contains("lr_schedule")) {
    const std::string s = j["lr_schedule"].get<std::string>();
    require(s == "cosine" || s == "constant", "lr_schedule must be cosine or constant");
    cfg.lr_schedule = s == "cosine" ? LrSchedule::kCosine : LrSchedule::kConstant;
  }
  if (j.contains("grid")) grid = j["grid"].get<int>();
}

} // namespace

ExperimentSpec ExperimentSpec::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open experiment spec: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("experiment spec " + path.string() + " is not valid JSON: " + e.what());
  }

  ExperimentSpec spec;
  try {
    require(j.contains("seeds"), "experiment spec needs a 'seeds' array");
    for (const auto& s : j["seeds"]) spec.seeds.push_back(s.get<uint64_t>());
    if (j.contains("ring")) {
      const auto& r = j["ring"];
      if (r.contains("views")) spec.ring.views = r["views"].get<int>();
      if (r.contains("elevation")) spec.ring.elevation = r["elevation"].get<double>();
      if (r.contains("radius")) spec.ring.radius = r["radius"].get<double>();
      if (r.contains("fov_y")) spec.ring.fov_y = r["fov_y"].get<double>();
      if (r.contains("size")) spec.ring.size = r["size"].get<int>();
    }
    if (j.contains("subject")) {
      const auto& s = j["subject"];
      if (s.contains("blobs")) spec.subject.blobs = s["blobs"].get<int>();
      if (s.contains("accessory")) spec.subject.accessory = s["accessory"].get<bool>();
      if (s.contains("expression"))
        for (const auto& e : s["expression"])
          spec.subject.expression.push_back(e.get<double>());
    }
    if (j.contains("holdout"))
      for (const auto& h : j["holdout"]) spec.holdout.push_back(h.get<int>());

    VariantSpec base;
    if (j.contains("weights")) parse_weights(j["weights"], base.weights);
    if (j.contains("optimizer")) parse_optim(j["optimizer"], base.optim, base.grid);
    if (j.contains("variants")) {
      for (const auto& v : j["variants"]) {
        VariantSpec var = base;
        require(v.contains("name"), "each variant needs a name");
        var.name = v["name"].get<std::string>();
        if (v.contains("weights")) parse_weights(v["weights"], var.weights);
        if (v.contains("optimizer")) parse_optim(v["optimizer"], var.optim, var.grid);
        spec.variants.push_back(std::move(var));
      }
    } else {
      spec.variants.push_back(std::move(base));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation("experiment spec " + path.string() + " is malformed: " +
                            e.what());
  }
  spec.validate();
  return spec;
}

namespace {

struct Aggregate {
  int n = 0;
  double mean = 0, stderr_ = 0;
};

Aggregate aggregate_of(const std::vector<double>& xs) {
  Aggregate a;
  a.n = static_cast<int>(xs.size());
  if (xs.empty()) return a;
  double sum = 0;
  for (double x : xs) sum += x;
  a.mean = sum / a.n;
  if (a.n >= 2) {
    double ss = 0;
    for (double x : xs) ss += (x - a.mean) * (x - a.mean);
    a.stderr_ = std::sqrt(ss / (a.n - 1)) / std::sqrt(static_cast<double>(a.n));
  }
  return a;
}

} // namespace

std::string run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);

  const std::vector<CameraPose> poses =
      orbit_band(spec.ring.elevation, spec.ring.views, spec.ring.radius, spec.ring.fov_y,
                 spec.ring.size, spec.ring.size);

  // References are rendered once per subject and shared across variants.
  std::vector<MultiViewSet> refs;
  for (uint64_t seed : spec.seeds) {
    const SyntheticSubject subject = gen_subject(
        seed, spec.subject.blobs, spec.subject.expression, spec.subject.accessory);
    refs.push_back(render_subject(subject, poses));
    save_views(out_dir / "subjects" / ("seed_" + std::to_string(seed)) / "refs",
               refs.back());
  }

  nlohmann::ordered_json doc;
  doc["ring"] = {{"views", spec.ring.views},
                 {"elevation", round_sig9(spec.ring.elevation)},
                 {"radius", round_sig9(spec.ring.radius)},
                 {"fov_y", round_sig9(spec.ring.fov_y)},
                 {"size", spec.ring.size}};
  doc["holdout"] = spec.holdout;
  doc["seeds"] = spec.seeds;
  doc["variants"] = nlohmann::ordered_json::array();

  for (const VariantSpec& variant : spec.variants) {
    nlohmann::ordered_json jv;
    jv["name"] = variant.name;
    jv["lambda_p"] = round_sig9(variant.weights.lambda_p);
    jv["lambda_i"] = round_sig9(variant.weights.lambda_i);
    jv["iterations"] = variant.optim.iterations;
    jv["grid"] = variant.grid;
    jv["subjects"] = nlohmann::ordered_json::array();

    std::vector<double> final_psnrs, gains;
    for (size_t si = 0; si < spec.seeds.size(); ++si) {
      const uint64_t seed = spec.seeds[si];
      nlohmann::ordered_json row;
      row["seed"] = seed;
      try {
        OptimConfig cfg = variant.optim;
        cfg.held_out_views = spec.holdout;
        cfg.seed = seed;
        auto [cloud, report] =
            reconstruct(refs[si], cfg, variant.weights, variant.grid, variant.grid);

        const auto subject_dir =
            out_dir / variant.name / ("seed_" + std::to_string(seed));
        export_ply(cloud, subject_dir / "head.ply");
        for (int hv : spec.holdout) {
          char name[48];
          std::snprintf(name, sizeof(name), "holdout_%04d.png", hv);
          write_png(subject_dir / "renders" / name,
                    render(cloud, refs[si].poses[hv], cfg.render).color);
        }

        row["status"] = "ok";
        row["init_psnr"] = round_sig9(report.init_holdout_psnr.value_or(0));
        row["final_psnr"] = round_sig9(report.final_holdout_psnr.value_or(0));
        const double gain = report.final_holdout_psnr.value_or(0) -
                            report.init_holdout_psnr.value_or(0);
        row["gain_db"] = round_sig9(gain);
        if (!report.checkpoints.empty()) {
          const LossBreakdown& last = report.checkpoints.back().holdout_loss;
          row["final_mse"] = round_sig9(last.mse);
          row["final_perceptual"] = round_sig9(last.perceptual);
          row["final_id"] = round_sig9(last.id);
          row["final_total"] = round_sig9(last.total);
        }
        final_psnrs.push_back(report.final_holdout_psnr.value_or(0));
        gains.push_back(gain);
      } catch (const std::exception& e) {
        row["status"] = "failed";
        row["error"] = e.what();
      }
      jv["subjects"].push_back(std::move(row));
    }

    const Aggregate psnr_agg = aggregate_of(final_psnrs);
    const Aggregate gain_agg = aggregate_of(gains);
    jv["aggregate"] = {{"n_ok", psnr_agg.n},
                       {"n_failed", static_cast<int>(spec.seeds.size()) - psnr_agg.n},
                       {"final_psnr_mean", round_sig9(psnr_agg.mean)},
                       {"final_psnr_stderr", round_sig9(psnr_agg.stderr_)},
                       {"gain_db_mean", round_sig9(gain_agg.mean)},
                       {"gain_db_stderr", round_sig9(gain_agg.stderr_)}};
    doc["variants"].push_back(std::move(jv));
  }

  const std::string json = doc.dump(2) + "\n";
  atomic_write_file(out_dir / "report.json", json);
  return json;
}

} // namespace hsplat
