#include "cldnet/channels.hpp"

#include <algorithm>
#include <sstream>

namespace cldnet {

const ChannelTable& default_channel_table() {
  static const ChannelTable table = [] {
    ChannelTable t{};
    struct Row { int band; BandKind kind; double lo, hi, wl; };
    const Row rows[kNumBands] = {
        {1, BandKind::albedo, 0, 100, 0.455},
        {2, BandKind::albedo, 0, 100, 0.510},
        {3, BandKind::albedo, 0, 100, 0.645},
        {4, BandKind::albedo, 0, 100, 0.860},
        {5, BandKind::albedo, 0, 100, 1.610},
        {6, BandKind::albedo, 0, 100, 2.260},
        {7, BandKind::brightness_temperature, 220, 335, 3.85},
        {8, BandKind::brightness_temperature, 200, 260, 6.25},
        {9, BandKind::brightness_temperature, 200, 270, 6.95},
        {10, BandKind::brightness_temperature, 200, 275, 7.35},
        {11, BandKind::brightness_temperature, 200, 320, 8.60},
        {12, BandKind::brightness_temperature, 210, 295, 9.63},
        {13, BandKind::brightness_temperature, 200, 330, 10.45},
        {14, BandKind::brightness_temperature, 200, 330, 11.20},
        {15, BandKind::brightness_temperature, 200, 320, 12.35},
        {16, BandKind::brightness_temperature, 200, 295, 13.30},
    };
    for (int i = 0; i < kNumBands; ++i) {
      t[i] = {rows[i].band, rows[i].kind, rows[i].lo, rows[i].hi, rows[i].wl};
    }
    return t;
  }();
  return table;
}

void validate_channel_table(const ChannelTable& table) {
  std::array<bool, kNumBands + 1> seen{};
  for (const auto& spec : table) {
    if (spec.band < 1 || spec.band > kNumBands) {
      std::ostringstream msg;
      msg << "channel spec band " << spec.band << " out of range";
      throw RasterError(msg.str());
    }
    if (seen[spec.band]) {
      std::ostringstream msg;
      msg << "duplicate channel spec for band B" << spec.band;
      throw RasterError(msg.str());
    }
    seen[spec.band] = true;
    if (!(spec.range_min < spec.range_max)) {
      std::ostringstream msg;
      msg << "empty value range for band B" << spec.band;
      throw RasterError(msg.str());
    }
  }
}

NormalizedScene normalize_scene(const SceneGrid& scene, const ChannelTable& table) {
  validate_channel_table(table);
  NormalizedScene out;
  out.geometry = scene.geometry;
  out.timestamp = scene.timestamp;
  const std::size_t n = scene.pixel_count();
  out.planes.resize(kNumBands);
  out.valid.resize(kNumBands);
  for (const auto& spec : table) {
    const int b = spec.band - 1;
    const auto& src = scene.planes.at(b);
    auto& dst = out.planes[b];
    auto& val = out.valid[b];
    dst.resize(n);
    val.resize(n);
    const float lo = static_cast<float>(spec.range_min);
    const float inv = static_cast<float>(1.0 / (spec.range_max - spec.range_min));
    for (std::size_t i = 0; i < n; ++i) {
      const float v = src[i];
      if (v == scene.missing_value) {
        dst[i] = 0.0f;
        val[i] = 0;
      } else {
        dst[i] = std::clamp((v - lo) * inv, 0.0f, 1.0f);
        val[i] = 1;
      }
    }
  }
  return out;
}

}  // namespace cldnet
