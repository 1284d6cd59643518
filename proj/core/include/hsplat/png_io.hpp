#pragma once

#include "hsplat/image.hpp"

#include <filesystem>

namespace hsplat {

/// 8-bit RGB PNG. Values are clamped to [0,1] and rounded on write; reads
/// map back to [0,1]. Alpha channels are composited over white on read.
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

} // namespace hsplat
