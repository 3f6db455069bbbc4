#include "cldnet/features.hpp"

#include <algorithm>
#include <cmath>

namespace cldnet {

std::pair<int, int> FeatureLayout::channel_bands(int channel) {
  if (channel < 0 || channel >= kBaseFeatureChannels)
    throw RasterError("feature channel index out of range");
  if (channel < 16) return {channel + 1, channel + 1};
  int idx = channel - 16;
  if (idx < 15) {
    for (int i = 1; i <= 6; ++i)
      for (int j = i + 1; j <= 6; ++j)
        if (idx-- == 0) return {i, j};
  }
  idx = channel - 31;
  for (int i = 7; i <= 16; ++i)
    for (int j = i + 1; j <= 16; ++j)
      if (idx-- == 0) return {i, j};
  throw RasterError("feature channel index out of range");
}

FeatureStack build_feature_stack(const NormalizedScene& scene) {
  const std::size_t n =
      static_cast<std::size_t>(scene.geometry.rows) * scene.geometry.cols;
  for (const auto& p : scene.planes)
    if (p.size() != n) throw RasterError("normalized plane shape mismatch");

  FeatureStack stack;
  stack.geometry = scene.geometry;
  stack.channels = kBaseFeatureChannels;
  stack.data.resize(n * kBaseFeatureChannels);
  for (int c = 0; c < kBaseFeatureChannels; ++c) {
    const auto [i, j] = FeatureLayout::channel_bands(c);
    float* dst = stack.plane(c);
    if (i == j) {
      std::copy(scene.planes[i - 1].begin(), scene.planes[i - 1].end(), dst);
    } else {
      // a difference is meaningless when either operand is missing
      const float* a = scene.planes[i - 1].data();
      const float* b = scene.planes[j - 1].data();
      const auto& va = scene.valid[i - 1];
      const auto& vb = scene.valid[j - 1];
      for (std::size_t p = 0; p < n; ++p)
        dst[p] = (va[p] && vb[p]) ? a[p] - b[p] : 0.0f;
    }
  }
  return stack;
}

MaskConfig cldnet_o_mask() {
  MaskConfig cfg;
  cfg.mask_bands = {1, 2, 3, 4, 5, 6};
  cfg.mask_ratio = 1.0;
  return cfg;
}

std::vector<int> masked_channels(const MaskConfig& cfg) {
  std::vector<int> out;
  for (int c = 0; c < kBaseFeatureChannels; ++c) {
    const auto [i, j] = FeatureLayout::channel_bands(c);
    const bool mi = cfg.mask_bands.count(i) > 0;
    const bool mj = cfg.mask_bands.count(j) > 0;
    const bool masked = (i == j) ? mi : (mi || mj);
    if (masked) out.push_back(c);
  }
  return out;
}

void apply_mask(FeatureStack& stack, const MaskConfig& cfg) {
  if (cfg.mask_ratio < 0.0 || cfg.mask_ratio > 1.0)
    throw RasterError("mask_ratio must be in [0, 1]");
  const float keep = static_cast<float>(1.0 - cfg.mask_ratio);
  const std::size_t n = stack.plane_size();
  for (int c : masked_channels(cfg)) {
    float* p = stack.plane(c);
    if (keep == 0.0f)
      std::fill(p, p + n, 0.0f);
    else
      for (std::size_t i = 0; i < n; ++i) p[i] *= keep;
  }
}

AuxSelection AuxSelection::viewing_geometry() {
  AuxSelection s;
  s.enabled[int(AuxField::saz)] = true;
  s.enabled[int(AuxField::saa)] = true;
  s.enabled[int(AuxField::soz)] = true;
  s.enabled[int(AuxField::soa)] = true;
  return s;
}

AuxSelection AuxSelection::all() {
  AuxSelection s;
  s.enabled.fill(true);
  return s;
}

AuxiliaryGrid compute_auxiliary_grid(const GridGeometry& geometry,
                                     const std::string& timestamp,
                                     double sub_lon_deg,
                                     const PlaneGrid* altitude,
                                     const PlaneGrid* land_water) {
  AuxiliaryGrid aux;
  aux.geometry = geometry;
  const std::size_t n = static_cast<std::size_t>(geometry.rows) * geometry.cols;
  aux.saz.resize(n);
  aux.saa.resize(n);
  aux.soz.resize(n);
  aux.soa.resize(n);
  aux.longitude.resize(n);
  aux.latitude.resize(n);

  const UtcInstant t = parse_utc(timestamp);
  for (int r = 0; r < geometry.rows; ++r) {
    const double lat = geometry.lat_at(r);
    for (int c = 0; c < geometry.cols; ++c) {
      const double lon = geometry.lon_at(c);
      const std::size_t i = static_cast<std::size_t>(r) * geometry.cols + c;
      const SatelliteAngles sat = satellite_geometry(sub_lon_deg, lat, lon);
      const SolarAngles sun = solar_position(t, lat, lon);
      aux.saz[i] = static_cast<float>(sat.zenith_deg);
      aux.saa[i] = static_cast<float>(sat.azimuth_deg);
      aux.soz[i] = static_cast<float>(sun.zenith_deg);
      aux.soa[i] = static_cast<float>(sun.azimuth_deg);
      aux.longitude[i] = static_cast<float>(lon);
      aux.latitude[i] = static_cast<float>(lat);
    }
  }

  auto take_plane = [&](const PlaneGrid* p, std::vector<float>& dst,
                        const char* what) {
    if (p == nullptr) {
      dst.assign(n, 0.0f);
      return;
    }
    if (!(p->geometry == geometry))
      throw RasterError(std::string("geometry mismatch for static ") + what +
                        " plane");
    dst = p->values;
  };
  take_plane(altitude, aux.altitude, "altitude");
  take_plane(land_water, aux.land_water, "land/water");
  return aux;
}

void concat_aux(FeatureStack& stack, const AuxiliaryGrid& aux,
                const AuxSelection& sel) {
  if (!(aux.geometry == stack.geometry))
    throw RasterError("auxiliary grid geometry mismatch");
  const int extra = sel.count();
  if (extra == 0) return;
  const std::size_t n = stack.plane_size();
  stack.data.resize(n * (stack.channels + extra));

  const std::vector<float>* fields[kAuxFieldCount] = {
      &aux.saz, &aux.saa, &aux.soz, &aux.soa,
      &aux.longitude, &aux.latitude, &aux.altitude, &aux.land_water};
  int out_c = stack.channels;
  for (int f = 0; f < kAuxFieldCount; ++f) {
    if (!sel.enabled[f]) continue;
    const std::vector<float>& src = *fields[f];
    float* dst = stack.data.data() + n * out_c;
    switch (static_cast<AuxField>(f)) {
      case AuxField::saz:
      case AuxField::soz:
        for (std::size_t i = 0; i < n; ++i)
          dst[i] = std::clamp(src[i] / 90.0f, 0.0f, 2.0f) * 0.5f;
        break;
      case AuxField::saa:
      case AuxField::soa:
        for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] / 360.0f;
        break;
      case AuxField::longitude:
        for (std::size_t i = 0; i < n; ++i) {
          float lon = std::fmod(src[i] + 180.0f, 360.0f);
          if (lon < 0) lon += 360.0f;
          dst[i] = lon / 360.0f;
        }
        break;
      case AuxField::latitude:
        for (std::size_t i = 0; i < n; ++i) dst[i] = (src[i] + 90.0f) / 180.0f;
        break;
      case AuxField::altitude:
        for (std::size_t i = 0; i < n; ++i)
          dst[i] = std::clamp(src[i] / 9000.0f, 0.0f, 1.0f);
        break;
      case AuxField::land_water:
        for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] != 0.0f ? 1.0f : 0.0f;
        break;
    }
    ++out_c;
  }
  stack.channels += extra;
}

}  // namespace cldnet
