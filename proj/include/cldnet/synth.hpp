#pragma once
// Deterministic synthetic dataset generation: class-conditioned band
// regimes inside the physical value ranges, blob-shaped label fields, and
// an optional unlabeled "nighttime" region.

#include <cstdint>
#include <filesystem>

#include "cldnet/channels.hpp"
#include "cldnet/raster.hpp"

namespace cldnet {

struct SynthConfig {
  int rows = 96;
  int cols = 96;
  int train_scenes = 8;
  int test_scenes = 2;
  int blob_sites = 24;            // Voronoi sites per scene; >= 10
  double noise_sigma_frac = 0.01;  // noise sigma as a fraction of band span
  double regime_spread = 0.7;      // fraction of band span spanned by class means
  double night_fraction = 0.0;     // fraction of columns flagged UNLABELED
  double origin_lat = 50.0;
  double origin_lon = 120.0;
  double cell_deg = 0.05;
  float missing_value = -9999.0f;
};

// Class-conditioned band mean, physical units. Exposed so tests can run an
// independent nearest-centroid check against the emitted scenes.
double synth_class_mean(const SynthConfig& cfg, const ChannelTable& table,
                        int cls, int band /*1..16*/);

// Writes scenes, label grids, and manifest.csv into out_dir; pure function
// of (cfg, seed).
DatasetManifest generate_synthetic_dataset(const SynthConfig& cfg,
                                           std::uint64_t seed,
                                           const std::filesystem::path& out_dir);

// In-memory generation of one scene + labels (used by tests and by the
// dataset writer).
void generate_synthetic_scene(const SynthConfig& cfg, std::uint64_t seed,
                              int scene_index, SceneGrid& scene,
                              CloudLabelGrid& labels);

}  // namespace cldnet
