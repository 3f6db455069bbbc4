#pragma once
// Per-band physical value ranges and scene normalization.

#include <array>
#include <vector>

#include "cldnet/raster.hpp"

namespace cldnet {

enum class BandKind { albedo, brightness_temperature };

struct ChannelSpec {
  int band = 0;  // 1..16 for B01..B16
  BandKind kind = BandKind::albedo;
  double range_min = 0.0;
  double range_max = 0.0;
  double central_wavelength_um = 0.0;  // metadata only
};

using ChannelTable = std::array<ChannelSpec, kNumBands>;

// Himawari-8/9 AHI band ranges: albedo [0,100]% for B01-B06, statistically
// derived brightness-temperature ranges (kelvin) for B07-B16.
const ChannelTable& default_channel_table();

// Throws RasterError if the table does not cover B01..B16 exactly once or a
// range is empty.
void validate_channel_table(const ChannelTable& table);

struct NormalizedScene {
  GridGeometry geometry;
  std::string timestamp;
  // planes[b] in [0,1]; missing samples are 0 with valid[b] false.
  std::vector<std::vector<float>> planes;
  std::vector<std::vector<std::uint8_t>> valid;
};

NormalizedScene normalize_scene(const SceneGrid& scene, const ChannelTable& table);

}  // namespace cldnet
