#pragma once
// Per-band frequency statistics and data-driven value-range derivation.

#include <array>
#include <vector>

#include "cldnet/raster.hpp"

namespace cldnet {

struct BandHistogram {
  int band = 0;  // 1..16
  std::vector<double> bin_edges;       // bins+1 edges, physical units
  std::vector<std::size_t> counts;     // bins entries
  std::vector<double> cumulative_pct;  // nondecreasing, ends at 100
  double derived_low = 0.0;            // after outward rounding to 5 units
  double derived_high = 0.0;
  double raw_low = 0.0;   // coverage window endpoints before rounding
  double raw_high = 0.0;
  std::size_t sample_count = 0;
  bool degenerate = false;  // all samples equal
};

struct BandStatistics {
  std::array<BandHistogram, kNumBands> bands;
};

// Derived range: tightest window covering >= 99.9% of the non-missing
// samples (ties broken toward symmetric 0.05%/0.05% trimming), rounded
// outward to multiples of 5 physical units. A band with no non-missing
// samples is an error naming the band.
BandStatistics compute_band_statistics(const std::vector<const SceneGrid*>& scenes,
                                       int bins);
BandStatistics compute_band_statistics(const std::vector<SceneGrid>& scenes,
                                       int bins);

}  // namespace cldnet
