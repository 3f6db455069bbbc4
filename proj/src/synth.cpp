#include "cldnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace cldnet {

namespace {

// Hand-rolled variate transforms so emitted bytes depend only on the
// mt19937_64 stream, not on the standard library's distribution internals.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double normal(std::mt19937_64& rng) {
  // Box-Muller, one value per draw pair (the spare is discarded to keep the
  // stream position independent of call history).
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::uint64_t mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::string synth_timestamp(int scene_index, bool test) {
  std::ostringstream ts;
  const int year = test ? 2022 : 2021;
  const int hour = scene_index % 24;
  const int day = 1 + (scene_index / 24) % 28;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-01-%02dT%02d:00:00Z", year, day, hour);
  ts << buf;
  return ts.str();
}

}  // namespace

double synth_class_mean(const SynthConfig& cfg, const ChannelTable& table,
                        int cls, int band) {
  const ChannelSpec& spec = table[band - 1];
  const double span = spec.range_max - spec.range_min;
  // Distinct per-band class orderings: multipliers coprime to 10 keep the
  // ten class means distinct within every band.
  static const int coprime[4] = {1, 3, 7, 9};
  const int p = coprime[band % 4];
  const int slot = (cls * p + band) % kNumClasses;
  const double frac = 0.15 + cfg.regime_spread * slot / (kNumClasses - 1);
  return spec.range_min + span * frac;
}

void generate_synthetic_scene(const SynthConfig& cfg, std::uint64_t seed,
                              int scene_index, SceneGrid& scene,
                              CloudLabelGrid& labels) {
  if (cfg.rows < 32 || cfg.cols < 32)
    throw RasterError("synthetic scenes need rows, cols >= 32");
  const ChannelTable& table = default_channel_table();
  std::mt19937_64 rng(mix(seed) ^ mix(static_cast<std::uint64_t>(scene_index) + 1));

  GridGeometry geom;
  geom.origin_lat = cfg.origin_lat;
  geom.origin_lon = cfg.origin_lon;
  geom.cell_lat = cfg.cell_deg;
  geom.cell_lon = cfg.cell_deg;
  geom.rows = cfg.rows;
  geom.cols = cfg.cols;

  // Voronoi label field; site k carries class k mod 10 so every class has
  // at least one site.
  const int sites = std::max(cfg.blob_sites, kNumClasses);
  std::vector<double> sr(sites), sc(sites);
  for (int k = 0; k < sites; ++k) {
    sr[k] = uniform01(rng) * cfg.rows;
    sc[k] = uniform01(rng) * cfg.cols;
  }
  labels.geometry = geom;
  labels.labels.assign(static_cast<std::size_t>(cfg.rows) * cfg.cols, 0);
  for (int r = 0; r < cfg.rows; ++r) {
    for (int c = 0; c < cfg.cols; ++c) {
      double best = 1e30;
      int best_k = 0;
      for (int k = 0; k < sites; ++k) {
        const double dr = r + 0.5 - sr[k];
        const double dc = c + 0.5 - sc[k];
        const double d2 = dr * dr + dc * dc;
        if (d2 < best) {
          best = d2;
          best_k = k;
        }
      }
      labels.labels[static_cast<std::size_t>(r) * cfg.cols + c] =
          static_cast<std::uint8_t>(best_k % kNumClasses);
    }
  }

  scene.timestamp = synth_timestamp(scene_index, false);
  scene.geometry = geom;
  scene.missing_value = cfg.missing_value;
  scene.planes.assign(kNumBands, {});
  const std::size_t n = labels.labels.size();
  for (int b = 1; b <= kNumBands; ++b) {
    const ChannelSpec& spec = table[b - 1];
    const double span = spec.range_max - spec.range_min;
    const double sigma = cfg.noise_sigma_frac * span;
    auto& plane = scene.planes[b - 1];
    plane.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int cls = labels.labels[i];
      const double v = synth_class_mean(cfg, table, cls, b) + sigma * normal(rng);
      plane[i] = static_cast<float>(
          std::clamp(v, spec.range_min, spec.range_max));
    }
  }

  // Nighttime wedge: the easternmost columns lose their labels.
  if (cfg.night_fraction > 0.0) {
    const int night_cols = static_cast<int>(
        std::lround(cfg.night_fraction * cfg.cols));
    for (int r = 0; r < cfg.rows; ++r)
      for (int c = cfg.cols - night_cols; c < cfg.cols; ++c)
        labels.labels[static_cast<std::size_t>(r) * cfg.cols + c] = kUnlabeled;
  }
}

DatasetManifest generate_synthetic_dataset(const SynthConfig& cfg,
                                           std::uint64_t seed,
                                           const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (!std::filesystem::is_directory(out_dir))
    throw RasterError("cannot create output directory " + out_dir.string());

  DatasetManifest manifest;
  const int total = cfg.train_scenes + cfg.test_scenes;
  for (int i = 0; i < total; ++i) {
    SceneGrid scene;
    CloudLabelGrid labels;
    generate_synthetic_scene(cfg, seed, i, scene, labels);
    const bool is_test = i >= cfg.train_scenes;
    scene.timestamp = synth_timestamp(is_test ? i - cfg.train_scenes : i, is_test);

    char base[32];
    std::snprintf(base, sizeof base, "scene_%03d", i);
    const auto scene_path = out_dir / (std::string(base) + ".grid");
    const auto label_path = out_dir / (std::string(base) + ".labels");
    write_scene(scene, scene_path);
    write_labels(labels, label_path);
    // manifest paths are relative to the manifest location so the emitted
    // bytes don't depend on where the dataset lives
    manifest.entries.push_back({std::string(base) + ".grid",
                                std::string(base) + ".labels",
                                scene.timestamp,
                                is_test ? "test" : "train"});
  }
  write_manifest(manifest, out_dir / "manifest.csv");
  return manifest;
}

}  // namespace cldnet
