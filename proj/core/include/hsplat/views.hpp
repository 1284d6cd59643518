#pragma once

#include "hsplat/geometry.hpp"
#include "hsplat/image.hpp"

#include <filesystem>
#include <vector>

namespace hsplat {

/// A set of images with their camera poses, index-aligned.
struct MultiViewSet {
  std::vector<Image> images;
  std::vector<CameraPose> poses;

  size_t size() const { return images.size(); }
  void validate() const;
};

/// Directory layout: view_0000.png, view_0001.png, ... plus cameras.json.
void save_views(const std::filesystem::path& dir, const MultiViewSet& views);
MultiViewSet load_views(const std::filesystem::path& dir);

} // namespace hsplat
