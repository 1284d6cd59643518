#pragma once

#include <filesystem>
#include <string>

namespace hsplat {

/// Rounds to 9 significant digits. All floats in machine-readable JSON pass
/// through this so reports are byte-stable run to run.
double round_sig9(double x);

/// Writes via a sibling temp file and renames into place, so readers never
/// observe a partial file.
void atomic_write_file(const std::filesystem::path& path, const std::string& contents);

} // namespace hsplat
