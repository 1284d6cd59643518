#pragma once

#include "hsplat/math.hpp"

#include <array>
#include <filesystem>
#include <vector>

namespace hsplat {

// Axis convention used across the project: right-handed world, +y up, the
// camera looks along its local -z axis at the world origin, azimuth 0 places
// the camera on the +z axis and azimuths grow toward +x. Poles (elevation
// +-90 deg) are roll-ambiguous; the up-vector falls back to +x there.
inline constexpr const char* kAxisConvention = "rh +y-up -z-look az0=+z up-fallback=+x";

/// One rig viewpoint: spherical camera position about the world origin plus
/// pinhole intrinsics derived from the vertical field of view.
struct CameraPose {
  double elevation = 0;  // degrees in [-90, 90]
  double azimuth = 0;    // degrees, normalized to [0, 360)
  double radius = 2.5;   // distance from the head center, > 0
  double fov_y = 40;     // degrees in (0, 180)
  int width = 256;
  int height = 256;

  void validate() const;
  bool operator==(const CameraPose&) const = default;
};

/// The capture rig: a set of elevation bands, each holding equally spaced
/// azimuths (step 360/azimuth_count starting at 0).
struct Rig {
  std::vector<double> elevations;
  int azimuth_count = 0;
  double radius = 2.5;
  double fov_y = 40;
  int width = 256;
  int height = 256;
};

/// A world-space ray in Pluecker form: unit direction plus the translation-
/// invariant moment origin x direction.
struct Ray {
  Vec3 origin;
  Vec3 direction; // unit norm
  Vec3 moment;    // origin x direction

  static Ray from_origin_direction(const Vec3& origin, const Vec3& direction);
};

/// World-to-camera transform with pinhole intrinsics.
struct ViewTransform {
  Mat3 rotation;   // world-to-camera
  Vec3 translation; // camera coords of the world origin offset: x_cam = R x + t
  double fx = 0, fy = 0, cx = 0, cy = 0;

  Vec3 to_camera(const Vec3& p_world) const { return rotation * p_world + translation; }
  Vec3 camera_center() const; // world-space camera origin
  ViewTransform inverse_pose() const; // camera-to-world rotation/translation, intrinsics copied
};

/// All rig viewpoints, elevation-major then azimuth-ascending.
std::vector<CameraPose> rig_poses(const Rig& rig);

/// `count` poses on one elevation band, azimuths equally spaced from 0.
std::vector<CameraPose> orbit_band(double elevation_deg, int count, double radius,
                                   double fov_y = 40, int width = 256, int height = 256);

ViewTransform view_matrix(const CameraPose& pose);

/// Ray through the center of pixel (px, py).
Ray pixel_ray(const CameraPose& pose, int px, int py);

/// (moment, direction) as the 6 conditioning channels.
std::array<double, 6> plucker_embed(const Ray& ray);

/// Camera-set JSON: {"convention": ..., "poses": [...]}. Loading rejects
/// files written under a different axis convention.
void save_cameras(const std::filesystem::path& path, const std::vector<CameraPose>& poses);
std::vector<CameraPose> load_cameras(const std::filesystem::path& path);
std::string cameras_to_json(const std::vector<CameraPose>& poses);

} // namespace hsplat
