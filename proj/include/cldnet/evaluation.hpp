#pragma once
// Classification scoring: confusion matrix, per-class and aggregate
// metrics, spatial error density, clear-sky confidence, and comparison of
// label grids living on different resolutions.

#include <array>
#include <cstdint>
#include <vector>

#include "cldnet/raster.hpp"

namespace cldnet {

struct ConfusionMatrix {
  // counts[truth * kNumClasses + predicted]
  std::array<std::uint64_t, kNumClasses * kNumClasses> counts{};

  void add(std::uint8_t truth, std::uint8_t predicted, std::uint64_t n = 1);
  // Pairs where the truth is unlabeled are skipped; an unlabeled prediction
  // against a labeled truth is rejected.
  void accumulate(const std::vector<std::uint8_t>& truth,
                  const std::vector<std::uint8_t>& predicted);

  std::uint64_t at(int truth, int predicted) const {
    return counts[static_cast<std::size_t>(truth) * kNumClasses + predicted];
  }
  std::uint64_t row_sum(int truth) const;
  std::uint64_t col_sum(int predicted) const;
  std::uint64_t total() const;
  std::uint64_t diagonal() const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

struct MetricsReport {
  double accuracy = 0.0;
  std::array<ClassMetrics, kNumClasses> per_class{};
  double f1_macro = 0.0;
  double f1_weighted = 0.0;  // class F1 weighted by true-label frequency
  double f1_micro = 0.0;     // equals accuracy for single-label problems
  // Binary agreement on cloud presence: Cl against everything else.
  double binary_accuracy = 0.0;
};

MetricsReport compute_metrics(const ConfusionMatrix& cm);

// Spatial distribution of misclassifications, accumulated over scenes that
// share one grid geometry.
struct ErrorDensity {
  GridGeometry geometry;
  std::vector<std::uint64_t> errors;   // per cell
  std::vector<std::uint64_t> samples;  // labeled comparisons per cell

  explicit ErrorDensity(const GridGeometry& g);
  void accumulate(const std::vector<std::uint8_t>& truth,
                  const std::vector<std::uint8_t>& predicted);
  // errors / samples per cell; cells never compared give 0.
  std::vector<float> density() const;
};

// Confidence that a pixel is cloud-free, from the 11.2 um brightness
// temperature: 0% at 270 K and below, 100% at 288 K and above, linear
// between. Missing input gives -1.
std::vector<float> clear_sky_confidence(const SceneGrid& scene);

// Scores predictions on one grid against truth labels on another. Each
// labeled truth cell is matched to the prediction cell whose center is
// nearest in latitude and longitude; truth cells falling outside the
// prediction grid are skipped.
ConfusionMatrix compare_label_grids(const CloudLabelGrid& truth,
                                    const CloudLabelGrid& predicted);

// Both sampling directions: truth cells looked up in the prediction grid,
// and prediction cells looked up in the truth grid. Rows are always the
// true class. The two matrices coincide when the grids are identical.
struct CrossResolutionReport {
  ConfusionMatrix truth_to_pred;
  ConfusionMatrix pred_to_truth;
};

CrossResolutionReport cross_resolution_compare(const CloudLabelGrid& truth,
                                               const CloudLabelGrid& predicted);

}  // namespace cldnet
