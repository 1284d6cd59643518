#include "hsplat/geometry.hpp"

#include "hsplat/errors.hpp"
#include "hsplat/io_util.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace hsplat {

namespace {

double normalize_azimuth(double a) {
  double r = std::fmod(a, 360.0);
  if (r < 0) r += 360.0;
  return r;
}

Vec3 camera_center_of(const CameraPose& pose) {
  const double a = deg_to_rad(pose.azimuth);
  const double e = deg_to_rad(pose.elevation);
  return {pose.radius * std::sin(a) * std::cos(e),
          pose.radius * std::sin(e),
          pose.radius * std::cos(a) * std::cos(e)};
}

} // namespace

void CameraPose::validate() const {
  require(elevation >= -90.0 && elevation <= 90.0,
          "camera elevation must lie in [-90, 90] degrees");
  require(azimuth >= 0.0 && azimuth < 360.0,
          "camera azimuth must be normalized to [0, 360) degrees");
  require(radius > 0.0, "camera radius must be positive");
  require(fov_y > 0.0 && fov_y < 180.0, "camera fov_y must lie in (0, 180) degrees");
  require(width >= 1 && height >= 1, "camera image size must be at least 1x1");
}

Ray Ray::from_origin_direction(const Vec3& origin, const Vec3& direction) {
  const double n = norm(direction);
  require(n > 0.0, "ray direction must be nonzero");
  Ray r;
  r.origin = origin;
  r.direction = direction / n;
  r.moment = cross(r.origin, r.direction);
  return r;
}

Vec3 ViewTransform::camera_center() const {
  // x_cam = R x + t = 0 at the camera origin, so x = -R^T t.
  return rotation.transposed() * (translation * -1.0);
}

ViewTransform ViewTransform::inverse_pose() const {
  ViewTransform inv;
  inv.rotation = rotation.transposed();
  inv.translation = inv.rotation * (translation * -1.0);
  inv.fx = fx;
  inv.fy = fy;
  inv.cx = cx;
  inv.cy = cy;
  return inv;
}

std::vector<CameraPose> rig_poses(const Rig& rig) {
  require(!rig.elevations.empty(), "rig needs at least one elevation band");
  require(rig.azimuth_count >= 1, "rig needs a positive azimuth count");
  std::vector<CameraPose> poses;
  poses.reserve(rig.elevations.size() * static_cast<size_t>(rig.azimuth_count));
  const double step = 360.0 / rig.azimuth_count;
  for (double elev : rig.elevations) {
    for (int i = 0; i < rig.azimuth_count; ++i) {
      CameraPose p;
      p.elevation = elev;
      p.azimuth = normalize_azimuth(step * i);
      p.radius = rig.radius;
      p.fov_y = rig.fov_y;
      p.width = rig.width;
      p.height = rig.height;
      p.validate();
      poses.push_back(p);
    }
  }
  return poses;
}

std::vector<CameraPose> orbit_band(double elevation_deg, int count, double radius,
                                   double fov_y, int width, int height) {
  require(count >= 1, "orbit band needs a positive view count");
  Rig rig;
  rig.elevations = {elevation_deg};
  rig.azimuth_count = count;
  rig.radius = radius;
  rig.fov_y = fov_y;
  rig.width = width;
  rig.height = height;
  return rig_poses(rig);
}

ViewTransform view_matrix(const CameraPose& pose) {
  pose.validate();
  const Vec3 center = camera_center_of(pose);
  const Vec3 zc = center / norm(center); // camera looks along -z toward the origin
  Vec3 up{0, 1, 0};
  if (norm(cross(up, zc)) < 1e-9) up = Vec3{1, 0, 0}; // pole: roll-ambiguous, pick +x
  const Vec3 xc = normalized(cross(up, zc));
  const Vec3 yc = cross(zc, xc);

  ViewTransform vt;
  vt.rotation = Mat3::from_rows(xc, yc, zc);
  vt.translation = (vt.rotation * center) * -1.0;
  vt.fy = (pose.height / 2.0) / std::tan(deg_to_rad(pose.fov_y) / 2.0);
  vt.fx = vt.fy;
  vt.cx = pose.width / 2.0;
  vt.cy = pose.height / 2.0;
  return vt;
}

Ray pixel_ray(const CameraPose& pose, int px, int py) {
  pose.validate();
  require(px >= 0 && px < pose.width && py >= 0 && py < pose.height,
          "pixel index outside the image");
  const ViewTransform vt = view_matrix(pose);
  const double u = px + 0.5;
  const double v = py + 0.5;
  // Invert u = cx + fx*x/zeta, v = cy - fy*y/zeta at camera depth zeta = 1
  // (camera space z = -1), then rotate back to world.
  const Vec3 dir_cam{(u - vt.cx) / vt.fx, -(v - vt.cy) / vt.fy, -1.0};
  const Vec3 dir_world = vt.rotation.transposed() * dir_cam;
  return Ray::from_origin_direction(camera_center_of(pose), dir_world);
}

std::array<double, 6> plucker_embed(const Ray& ray) {
  return {ray.moment.x, ray.moment.y, ray.moment.z,
          ray.direction.x, ray.direction.y, ray.direction.z};
}

std::string cameras_to_json(const std::vector<CameraPose>& poses) {
  nlohmann::ordered_json doc;
  doc["convention"] = kAxisConvention;
  doc["poses"] = nlohmann::ordered_json::array();
  for (const CameraPose& p : poses) {
    p.validate();
    nlohmann::ordered_json jp;
    jp["elevation"] = round_sig9(p.elevation);
    jp["azimuth"] = round_sig9(p.azimuth);
    jp["radius"] = round_sig9(p.radius);
    jp["fov_y"] = round_sig9(p.fov_y);
    jp["width"] = p.width;
    jp["height"] = p.height;
    doc["poses"].push_back(std::move(jp));
  }
  return doc.dump(2) + "\n";
}

void save_cameras(const std::filesystem::path& path, const std::vector<CameraPose>& poses) {
  atomic_write_file(path, cameras_to_json(poses));
}

std::vector<CameraPose> load_cameras(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open camera file: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("camera file " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!doc.contains("convention") || doc["convention"] != kAxisConvention)
    throw ContractViolation("camera file " + path.string() +
                            " uses an unknown axis convention");
  if (!doc.contains("poses") || !doc["poses"].is_array())
    throw ContractViolation("camera file " + path.string() + " has no pose array");
  std::vector<CameraPose> poses;
  for (const auto& jp : doc["poses"]) {
    CameraPose p;
    try {
      p.elevation = jp.at("elevation").get<double>();
      p.azimuth = jp.at("azimuth").get<double>();
      p.radius = jp.at("radius").get<double>();
      p.fov_y = jp.at("fov_y").get<double>();
      p.width = jp.at("width").get<int>();
      p.height = jp.at("height").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw ContractViolation("camera file " + path.string() +
                              " has a malformed pose entry: " + e.what());
    }
    p.validate();
    poses.push_back(p);
  }
  return poses;
}

} // namespace hsplat
