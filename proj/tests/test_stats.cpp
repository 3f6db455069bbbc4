#include <doctest.h>

#include <algorithm>
#include <random>

#include "cldnet/channels.hpp"
#include "cldnet/stats.hpp"

using namespace cldnet;

namespace {

SceneGrid scene_with_band_values(int rows, int cols,
                                 const std::vector<std::vector<float>>& per_band) {
  SceneGrid s;
  s.timestamp = "2021-01-01T00:00:00Z";
  s.geometry = {30.0, 110.0, 0.05, 0.05, rows, cols};
  s.planes = per_band;
  return s;
}

}  // namespace

TEST_CASE("constant band yields degenerate range widened by one step") {
  const int rows = 8, cols = 8;
  std::vector<std::vector<float>> planes(kNumBands,
                                         std::vector<float>(rows * cols, 50.0f));
  planes[6].assign(rows * cols, 300.0f);  // B07 constant 300 K
  auto s = scene_with_band_values(rows, cols, planes);
  auto stats = compute_band_statistics(std::vector<SceneGrid>{s}, 16);
  const auto& b7 = stats.bands[6];
  CHECK(b7.raw_low == 300.0);
  CHECK(b7.raw_high == 300.0);
  CHECK(b7.derived_low == 300.0);
  CHECK(b7.derived_high == 305.0);
  CHECK(b7.degenerate);
}

TEST_CASE("uniform samples: derived range inside span, covers 99.9%") {
  std::mt19937 rng(21);
  const int rows = 64, cols = 64;
  std::vector<std::vector<float>> planes(kNumBands);
  std::uniform_real_distribution<float> d(200.0f, 330.0f);
  for (auto& p : planes) {
    p.resize(std::size_t(rows) * cols);
    for (auto& v : p) v = d(rng);
  }
  auto s = scene_with_band_values(rows, cols, planes);
  auto stats = compute_band_statistics(std::vector<SceneGrid>{s}, 32);
  for (int b = 0; b < kNumBands; ++b) {
    const auto& h = stats.bands[b];
    // Direct-count coverage oracle.
    std::size_t covered = 0;
    for (float v : planes[b])
      if (v >= h.derived_low && v <= h.derived_high) ++covered;
    CHECK(double(covered) / planes[b].size() >= 0.999);
    CHECK(h.derived_low >= 195.0);
    CHECK(h.derived_high <= 335.0);
    // cumulative percentage curve is nondecreasing and ends at 100
    for (std::size_t i = 1; i < h.cumulative_pct.size(); ++i)
      CHECK(h.cumulative_pct[i] >= h.cumulative_pct[i - 1]);
    CHECK(h.cumulative_pct.back() == doctest::Approx(100.0));
  }
}

TEST_CASE("single far outlier with 0.1% mass is excluded") {
  const int rows = 25, cols = 40;  // 1000 samples
  std::vector<std::vector<float>> planes(kNumBands,
                                         std::vector<float>(rows * cols, 210.0f));
  planes[6].assign(rows * cols, 210.0f);
  planes[6][123] = 400.0f;
  auto s = scene_with_band_values(rows, cols, planes);
  auto stats = compute_band_statistics(std::vector<SceneGrid>{s}, 16);
  const auto& b7 = stats.bands[6];
  CHECK(b7.raw_high == 210.0);
  CHECK(b7.derived_high < 400.0);
  // Brute-force oracle: the tightest window over 999 of 1000 samples is
  // [210, 210].
  CHECK(b7.raw_low == 210.0);
}

TEST_CASE("brute-force percentile oracle on random data") {
  std::mt19937 rng(33);
  const int rows = 48, cols = 48;
  std::vector<std::vector<float>> planes(kNumBands);
  std::normal_distribution<float> d(260.0f, 20.0f);
  for (auto& p : planes) {
    p.resize(std::size_t(rows) * cols);
    for (auto& v : p) v = std::clamp(d(rng), 150.0f, 370.0f);
  }
  auto s = scene_with_band_values(rows, cols, planes);
  auto stats = compute_band_statistics(std::vector<SceneGrid>{s}, 64);
  for (int b = 0; b < kNumBands; ++b) {
    const auto& h = stats.bands[b];
    auto sorted = planes[b];
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const std::size_t k = std::size_t(std::ceil(0.999 * n));
    // Oracle: h's window must cover at least k samples and be no longer
    // than the best brute-force window.
    std::size_t covered = 0;
    for (float v : sorted)
      if (v >= h.raw_low && v <= h.raw_high) ++covered;
    CHECK(covered >= k);
    double best = 1e30;
    for (std::size_t i = 0; i + k <= n; ++i)
      best = std::min(best, double(sorted[i + k - 1]) - sorted[i]);
    CHECK(h.raw_high - h.raw_low <= best + 1e-6);
  }
}

TEST_CASE("all-missing band is an error naming the band") {
  const int rows = 8, cols = 8;
  std::vector<std::vector<float>> planes(kNumBands,
                                         std::vector<float>(rows * cols, 250.0f));
  auto s = scene_with_band_values(rows, cols, planes);
  s.planes[8].assign(rows * cols, s.missing_value);
  CHECK_THROWS_WITH_AS(compute_band_statistics(std::vector<SceneGrid>{s}, 8),
                       doctest::Contains("B09"), RasterError);
}

TEST_CASE("bins below 2 rejected") {
  std::vector<std::vector<float>> planes(kNumBands,
                                         std::vector<float>(64, 250.0f));
  auto s = scene_with_band_values(8, 8, planes);
  CHECK_THROWS_AS(compute_band_statistics(std::vector<SceneGrid>{s}, 1),
                  RasterError);
}
