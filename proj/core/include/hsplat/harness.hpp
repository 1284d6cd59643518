#pragma once

#include "hsplat/optimizer.hpp"
#include "hsplat/splats.hpp"
#include "hsplat/views.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hsplat {

/// A named index range [begin, end) into the subject's cloud.
struct SubjectPart {
  std::string name;
  size_t begin = 0, end = 0;
};

/// Procedurally generated stand-in for a captured head: an ellipsoidal shell
/// of oriented splats plus optional feature blobs and an accessory band.
/// Everything fits inside the unit sphere; generation is seed-deterministic.
struct SyntheticSubject {
  GaussianCloud cloud;
  uint64_t seed = 0;
  int n_feature_blobs = 0;
  std::vector<double> expression;
  bool accessory = false;
  std::vector<SubjectPart> parts;
};

/// Expression entries (nominally in [-1, 1]): [0] and [1] slide the mouth
/// blob in its tangent plane by 0.1 per unit; [2] scales the mouth spread.
/// Expression values displace existing splats and never change how many
/// random draws generation makes, so two subjects with the same seed differ
/// only in the displaced part.
SyntheticSubject gen_subject(uint64_t seed, int n_feature_blobs,
                             const std::vector<double>& expression = {},
                             bool accessory = false);

/// Ground-truth renders of the subject from the given poses.
MultiViewSet render_subject(const SyntheticSubject& subject,
                            const std::vector<CameraPose>& poses,
                            const RenderOptions& opts = {});

struct RingSpec {
  int views = 16;
  double elevation = 0;
  double radius = 2.5;
  double fov_y = 40;
  int size = 128; // square images
};

struct SubjectGenSpec {
  int blobs = 5;
  bool accessory = false;
  std::vector<double> expression;
};

/// One experiment arm: a tag plus the configs it runs with. Ablations list
/// several variants differing in weights or optimizer settings.
struct VariantSpec {
  std::string name = "base";
  LossWeights weights;
  OptimConfig optim;
  int grid = 64;
};

struct ExperimentSpec {
  std::vector<uint64_t> seeds;
  RingSpec ring;
  SubjectGenSpec subject;
  std::vector<int> holdout;
  std::vector<VariantSpec> variants;

  void validate() const;
  static ExperimentSpec from_json_file(const std::filesystem::path& path);
};

/// Runs every variant over every subject seed: generate, render references,
/// reconstruct, evaluate held-out views. Writes a bundle under out_dir
/// (report.json, per-subject reference PNGs, per-variant PLYs and held-out
/// renders). A subject that throws is recorded as a failed row; the bundle is
/// still produced. Returns the top-level report JSON.
std::string run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir);

} // namespace hsplat
