#pragma once
// Spectral feature reorganization: 16 normalized bands plus all same-kind
// pairwise differences (76 channels), channel masking, and auxiliary
// viewing-geometry channels.

#include <array>
#include <optional>
#include <set>
#include <vector>

#include "cldnet/channels.hpp"
#include "cldnet/geometry.hpp"
#include "cldnet/raster.hpp"

namespace cldnet {

inline constexpr int kBaseFeatureChannels = 76;  // 16 + C(6,2) + C(10,2)

struct FeatureStack {
  GridGeometry geometry;
  int channels = 0;
  // channel-major, rows*cols per channel
  std::vector<float> data;

  std::size_t plane_size() const {
    return static_cast<std::size_t>(geometry.rows) * geometry.cols;
  }
  float* plane(int c) { return data.data() + plane_size() * c; }
  const float* plane(int c) const { return data.data() + plane_size() * c; }
};

// Fixed channel layout. Channels 0-15: normalized B01..B16. Channels 16-30:
// albedo differences Bi-Bj, 1<=i<j<=6, lexicographic. Channels 31-75: BT
// differences Bi-Bj, 7<=i<j<=16, lexicographic.
struct FeatureLayout {
  // bands involved in a base channel; direct channels return {b, b}.
  static std::pair<int, int> channel_bands(int channel);
  static int channel_count() { return kBaseFeatureChannels; }
};

FeatureStack build_feature_stack(const NormalizedScene& scene);

struct MaskConfig {
  std::set<int> mask_bands;  // band numbers 1..16
  double mask_ratio = 1.0;   // 1 = full zeroing; (0,1) scales by 1-ratio
};

// CldNet-O masking: bands B01..B06, ratio 1.
MaskConfig cldnet_o_mask();

// Returns the derived masked-channel index set: a direct channel is masked
// iff its band is masked; a difference channel iff either operand is.
std::vector<int> masked_channels(const MaskConfig& cfg);

// Masks base channels only; aux channels appended after channel 75 are
// never touched.
void apply_mask(FeatureStack& stack, const MaskConfig& cfg);

struct AuxiliaryGrid {
  GridGeometry geometry;
  std::vector<float> saz, saa, soz, soa;  // degrees
  std::vector<float> longitude, latitude;  // degrees
  std::vector<float> altitude;             // meters
  std::vector<float> land_water;           // 0 water, 1 land
};

enum class AuxField { saz, saa, soz, soa, longitude, latitude, altitude, land_water };
inline constexpr int kAuxFieldCount = 8;

struct AuxSelection {
  std::array<bool, kAuxFieldCount> enabled{};  // declared field order

  int count() const {
    int n = 0;
    for (bool b : enabled) n += b;
    return n;
  }
  static AuxSelection none() { return {}; }
  // CldNet-W: SAZ, SAA, SOZ, SOA.
  static AuxSelection viewing_geometry();
  static AuxSelection all();
};

// Computes SAZ/SAA/SOZ/SOA per pixel from the grid geometry and timestamp;
// altitude and land/water come from optional static planes (default 0).
AuxiliaryGrid compute_auxiliary_grid(const GridGeometry& geometry,
                                     const std::string& timestamp,
                                     double sub_lon_deg = kHimawariSubLonDeg,
                                     const PlaneGrid* altitude = nullptr,
                                     const PlaneGrid* land_water = nullptr);

// Appends the selected aux fields (normalized to [0,1]) after the base
// channels in declared field order.
void concat_aux(FeatureStack& stack, const AuxiliaryGrid& aux,
                const AuxSelection& sel);

}  // namespace cldnet
