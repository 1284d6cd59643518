#include "hsplat/splats.hpp"

#include "hsplat/errors.hpp"
#include "hsplat/io_util.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace hsplat {

void Gaussian::renormalize_rotation() {
  const double n = norm(rotation);
  require(n > 0.0, "gaussian rotation quaternion must be nonzero");
  rotation = rotation / n;
}

void Gaussian::validate() const {
  require(std::isfinite(position.x) && std::isfinite(position.y) && std::isfinite(position.z),
          "gaussian position must be finite");
  require(std::isfinite(log_scale.x) && std::isfinite(log_scale.y) && std::isfinite(log_scale.z),
          "gaussian log-scale must be finite");
  require(std::isfinite(rotation.w) && std::isfinite(rotation.x) &&
              std::isfinite(rotation.y) && std::isfinite(rotation.z) &&
              norm(rotation) > 1e-12,
          "gaussian rotation quaternion must be finite and nonzero");
  require(std::isfinite(opacity_logit), "gaussian opacity logit must be finite");
  require(std::isfinite(color_logit.x) && std::isfinite(color_logit.y) &&
              std::isfinite(color_logit.z),
          "gaussian color logits must be finite");
}

void GaussianCloud::validate() const {
  require(!gaussians.empty(), "gaussian cloud must hold at least one gaussian");
  if (layout_hint) {
    const auto& [views, h, w] = *layout_hint;
    require(views >= 1 && h >= 1 && w >= 1, "cloud layout hint must be positive");
    require(static_cast<size_t>(views) * h * w == gaussians.size(),
            "cloud layout hint does not match the gaussian count");
  }
  for (const Gaussian& g : gaussians) g.validate();
}

Mat3 covariance(const Gaussian& g) {
  const Mat3 r = quat_to_mat(normalized(g.rotation));
  const Vec3 s = g.scale();
  Mat3 rs = r;
  for (int i = 0; i < 3; ++i) {
    rs.m[i * 3 + 0] *= s.x;
    rs.m[i * 3 + 1] *= s.y;
    rs.m[i * 3 + 2] *= s.z;
  }
  return rs * rs.transposed();
}

namespace {

constexpr const char* kPlyProps[] = {
    "x",       "y",       "z",       "nx",     "ny",      "nz",
    "f_dc_0",  "f_dc_1",  "f_dc_2",  "opacity", "scale_0", "scale_1",
    "scale_2", "rot_0",   "rot_1",   "rot_2",   "rot_3"};
constexpr int kPlyPropCount = 17;

void fill_record(const Gaussian& g, float* rec) {
  rec[0] = static_cast<float>(g.position.x);
  rec[1] = static_cast<float>(g.position.y);
  rec[2] = static_cast<float>(g.position.z);
  rec[3] = rec[4] = rec[5] = 0.0f;
  rec[6] = static_cast<float>(g.color_logit.x);
  rec[7] = static_cast<float>(g.color_logit.y);
  rec[8] = static_cast<float>(g.color_logit.z);
  rec[9] = static_cast<float>(g.opacity_logit);
  rec[10] = static_cast<float>(g.log_scale.x);
  rec[11] = static_cast<float>(g.log_scale.y);
  rec[12] = static_cast<float>(g.log_scale.z);
  rec[13] = static_cast<float>(g.rotation.w);
  rec[14] = static_cast<float>(g.rotation.x);
  rec[15] = static_cast<float>(g.rotation.y);
  rec[16] = static_cast<float>(g.rotation.z);
}

Gaussian record_to_gaussian(const float* rec) {
  Gaussian g;
  g.position = {rec[0], rec[1], rec[2]};
  g.color_logit = {rec[6], rec[7], rec[8]};
  g.opacity_logit = rec[9];
  g.log_scale = {rec[10], rec[11], rec[12]};
  g.rotation = {rec[13], rec[14], rec[15], rec[16]};
  return g;
}

} // namespace

void export_ply(const GaussianCloud& cloud, const std::filesystem::path& path) {
  cloud.validate();
  std::ostringstream out;
  out << "ply\n"
      << "format binary_little_endian 1.0\n"
      << "element vertex " << cloud.gaussians.size() << "\n";
  for (const char* prop : kPlyProps) out << "property float " << prop << "\n";
  out << "end_header\n";
  std::string body;
  body.resize(cloud.gaussians.size() * kPlyPropCount * sizeof(float));
  float rec[kPlyPropCount];
  for (size_t i = 0; i < cloud.gaussians.size(); ++i) {
    fill_record(cloud.gaussians[i], rec);
    std::memcpy(body.data() + i * sizeof(rec), rec, sizeof(rec));
  }
  atomic_write_file(path, out.str() + body);
}

GaussianCloud import_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open splat file: " + path.string());

  auto parse_error = [&](const std::string& what) {
    return IoError("splat file " + path.string() + ": " + what);
  };

  std::string line;
  if (!std::getline(in, line) || line != "ply") throw parse_error("missing 'ply' magic");
  if (!std::getline(in, line) || line != "format binary_little_endian 1.0")
    throw parse_error("expected format binary_little_endian 1.0");

  size_t vertex_count = 0;
  bool in_vertex_element = false;
  // Offsets of the documented properties inside one float record; -1 = absent.
  int offsets[kPlyPropCount];
  for (int& o : offsets) o = -1;
  int stride = 0; // floats per vertex, including unknown extras
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "comment") continue;
    if (tok == "element") {
      std::string name;
      ls >> name >> vertex_count;
      in_vertex_element = (name == "vertex");
      if (!in_vertex_element) throw parse_error("unsupported element '" + name + "'");
      continue;
    }
    if (tok == "property") {
      if (!in_vertex_element) throw parse_error("property before vertex element");
      std::string type, name;
      ls >> type >> name;
      if (type != "float")
        throw parse_error("property '" + name + "' must be float, got " + type);
      for (int i = 0; i < kPlyPropCount; ++i)
        if (name == kPlyProps[i]) offsets[i] = stride;
      ++stride;
      continue;
    }
    throw parse_error("unexpected header line '" + line + "'");
  }
  if (!in) throw parse_error("header ended before end_header");
  for (int i = 0; i < kPlyPropCount; ++i)
    if (offsets[i] < 0)
      throw parse_error(std::string("missing property '") + kPlyProps[i] + "'");
  if (vertex_count == 0) throw parse_error("vertex count must be positive");

  std::vector<float> raw(vertex_count * stride);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (static_cast<size_t>(in.gcount()) != raw.size() * sizeof(float))
    throw parse_error("payload truncated: expected " + std::to_string(vertex_count) +
                      " vertices");

  GaussianCloud cloud;
  cloud.gaussians.resize(vertex_count);
  float rec[kPlyPropCount];
  for (size_t v = 0; v < vertex_count; ++v) {
    const float* row = raw.data() + v * stride;
    for (int i = 0; i < kPlyPropCount; ++i) rec[i] = row[offsets[i]];
    cloud.gaussians[v] = record_to_gaussian(rec);
  }
  return cloud;
}

} // namespace hsplat
