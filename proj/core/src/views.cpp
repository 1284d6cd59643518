#include "hsplat/views.hpp"

#include "hsplat/errors.hpp"
#include "hsplat/png_io.hpp"

#include <cstdio>

namespace hsplat {

void MultiViewSet::validate() const {
  require(!images.empty(), "view set must hold at least one view");
  require(images.size() == poses.size(), "view set images and poses must align");
  for (size_t i = 0; i < images.size(); ++i) {
    poses[i].validate();
    require(images[i].height == poses[i].height && images[i].width == poses[i].width,
            "view image size must match its camera");
  }
}

namespace {

std::string view_name(size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%04zu.png", i);
  return buf;
}

} // namespace

void save_views(const std::filesystem::path& dir, const MultiViewSet& views) {
  views.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  for (size_t i = 0; i < views.images.size(); ++i)
    write_png(dir / view_name(i), views.images[i]);
  save_cameras(dir / "cameras.json", views.poses);
}

MultiViewSet load_views(const std::filesystem::path& dir) {
  MultiViewSet set;
  set.poses = load_cameras(dir / "cameras.json");
  require(!set.poses.empty(), "camera file lists no poses");
  for (size_t i = 0; i < set.poses.size(); ++i) {
    const auto path = dir / view_name(i);
    if (!std::filesystem::exists(path))
      throw IoError("missing view image: " + path.string());
    set.images.push_back(read_png(path));
  }
  set.validate();
  return set;
}

} // namespace hsplat
