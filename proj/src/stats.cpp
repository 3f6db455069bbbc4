#include "cldnet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cldnet {

namespace {

double round_down5(double v) { return std::floor(v / 5.0) * 5.0; }
double round_up5(double v) { return std::ceil(v / 5.0) * 5.0; }

}  // namespace

BandStatistics compute_band_statistics(const std::vector<const SceneGrid*>& scenes,
                                       int bins) {
  if (scenes.empty()) throw RasterError("band statistics need at least one scene");
  if (bins < 2) throw RasterError("band statistics need bins >= 2");

  BandStatistics stats;
  for (int b = 0; b < kNumBands; ++b) {
    std::vector<float> samples;
    for (const SceneGrid* s : scenes) {
      const auto& plane = s->planes.at(b);
      for (float v : plane)
        if (v != s->missing_value) samples.push_back(v);
    }
    BandHistogram& h = stats.bands[b];
    h.band = b + 1;
    if (samples.empty()) {
      std::ostringstream msg;
      msg << "band B" << (b < 9 ? "0" : "") << (b + 1)
          << " has no non-missing samples";
      throw RasterError(msg.str());
    }
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    h.sample_count = n;
    const double vmin = samples.front();
    const double vmax = samples.back();
    h.degenerate = (vmin == vmax);

    // Histogram over the observed span (degenerate span widened by 1 unit so
    // edges stay strictly increasing).
    const double span_lo = vmin;
    const double span_hi = h.degenerate ? vmin + 1.0 : vmax;
    h.bin_edges.resize(bins + 1);
    for (int i = 0; i <= bins; ++i)
      h.bin_edges[i] = span_lo + (span_hi - span_lo) * i / bins;
    h.counts.assign(bins, 0);
    for (float v : samples) {
      int idx = static_cast<int>((v - span_lo) / (span_hi - span_lo) * bins);
      idx = std::clamp(idx, 0, bins - 1);
      ++h.counts[idx];
    }
    h.cumulative_pct.resize(bins);
    std::size_t running = 0;
    for (int i = 0; i < bins; ++i) {
      running += h.counts[i];
      h.cumulative_pct[i] = 100.0 * static_cast<double>(running) / n;
    }

    // Tightest window covering >= 99.9% of the samples, tie-broken toward
    // symmetric trimming (0.05% off each tail).
    const std::size_t k =
        std::min(n, static_cast<std::size_t>(std::ceil(0.999 * n)));
    std::size_t best_i = 0;
    double best_len = std::numeric_limits<double>::infinity();
    const double center = (n - k) / 2.0;
    double best_off = 0.0;
    for (std::size_t i = 0; i + k <= n; ++i) {
      const double len = samples[i + k - 1] - samples[i];
      const double off = std::abs(static_cast<double>(i) - center);
      if (len < best_len || (len == best_len && off < best_off)) {
        best_len = len;
        best_off = off;
        best_i = i;
      }
    }
    h.raw_low = samples[best_i];
    h.raw_high = samples[best_i + k - 1];
    h.derived_low = round_down5(h.raw_low);
    h.derived_high = round_up5(h.raw_high);
    if (h.derived_high <= h.derived_low) h.derived_high = h.derived_low + 5.0;
  }
  return stats;
}

BandStatistics compute_band_statistics(const std::vector<SceneGrid>& scenes,
                                       int bins) {
  std::vector<const SceneGrid*> ptrs;
  ptrs.reserve(scenes.size());
  for (const auto& s : scenes) ptrs.push_back(&s);
  return compute_band_statistics(ptrs, bins);
}

}  // namespace cldnet
