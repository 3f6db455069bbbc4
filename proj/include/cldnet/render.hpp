#pragma once
// Quick-look imagery: class maps and scalar planes as binary PPM.

#include <array>
#include <cstdint>
#include <filesystem>

#include "cldnet/raster.hpp"

namespace cldnet {

// One distinct color per cloud class; unlabeled renders black.
const std::array<std::array<std::uint8_t, 3>, kNumClasses>& class_palette();

void render_labels_ppm(const CloudLabelGrid& grid,
                       const std::filesystem::path& path);

// Linear grayscale between lo and hi; values outside clamp, negative
// sentinel values (missing) render red.
void render_plane_ppm(const PlaneGrid& plane, const std::filesystem::path& path,
                      float lo, float hi);

}  // namespace cldnet
