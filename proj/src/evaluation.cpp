#include "cldnet/evaluation.hpp"

#include <cmath>

namespace cldnet {

void ConfusionMatrix::add(std::uint8_t truth, std::uint8_t predicted,
                          std::uint64_t n) {
  if (truth >= kNumClasses || predicted >= kNumClasses)
    throw RasterError("confusion matrix: class code out of range");
  counts[static_cast<std::size_t>(truth) * kNumClasses + predicted] += n;
}

void ConfusionMatrix::accumulate(const std::vector<std::uint8_t>& truth,
                                 const std::vector<std::uint8_t>& predicted) {
  if (truth.size() != predicted.size())
    throw RasterError("confusion matrix: size mismatch");
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == kUnlabeled) continue;
    add(truth[i], predicted[i]);
  }
}

std::uint64_t ConfusionMatrix::row_sum(int truth) const {
  std::uint64_t s = 0;
  for (int p = 0; p < kNumClasses; ++p) s += at(truth, p);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(int predicted) const {
  std::uint64_t s = 0;
  for (int t = 0; t < kNumClasses; ++t) s += at(t, predicted);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

std::uint64_t ConfusionMatrix::diagonal() const {
  std::uint64_t s = 0;
  for (int c = 0; c < kNumClasses; ++c) s += at(c, c);
  return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  return *this;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  MetricsReport r;
  const std::uint64_t total = cm.total();
  if (total == 0) return r;
  const double tot = static_cast<double>(total);
  r.accuracy = static_cast<double>(cm.diagonal()) / tot;
  r.f1_micro = r.accuracy;

  double f1_sum = 0.0, f1_wsum = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& m = r.per_class[c];
    const std::uint64_t tp = cm.at(c, c);
    const std::uint64_t row = cm.row_sum(c);
    const std::uint64_t col = cm.col_sum(c);
    m.support = row;
    m.precision = col > 0 ? static_cast<double>(tp) / col : 0.0;
    m.recall = row > 0 ? static_cast<double>(tp) / row : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    f1_sum += m.f1;
    f1_wsum += m.f1 * static_cast<double>(row);
  }
  r.f1_macro = f1_sum / kNumClasses;
  r.f1_weighted = f1_wsum / tot;

  std::uint64_t agree = 0;
  for (int t = 0; t < kNumClasses; ++t)
    for (int p = 0; p < kNumClasses; ++p)
      if ((t == Cl) == (p == Cl)) agree += cm.at(t, p);
  r.binary_accuracy = static_cast<double>(agree) / tot;
  return r;
}

ErrorDensity::ErrorDensity(const GridGeometry& g) : geometry(g) {
  const std::size_t n = static_cast<std::size_t>(g.rows) * g.cols;
  errors.assign(n, 0);
  samples.assign(n, 0);
}

void ErrorDensity::accumulate(const std::vector<std::uint8_t>& truth,
                              const std::vector<std::uint8_t>& predicted) {
  if (truth.size() != errors.size() || predicted.size() != errors.size())
    throw RasterError("error density: size mismatch");
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == kUnlabeled) continue;
    ++samples[i];
    if (predicted[i] != truth[i]) ++errors[i];
  }
}

std::vector<float> ErrorDensity::density() const {
  std::vector<float> out(errors.size(), 0.0f);
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (samples[i] > 0)
      out[i] = static_cast<float>(static_cast<double>(errors[i]) / samples[i]);
  return out;
}

std::vector<float> clear_sky_confidence(const SceneGrid& scene) {
  if (static_cast<int>(scene.planes.size()) != kNumBands)
    throw RasterError("clear-sky confidence: expected 16 bands");
  const auto& b14 = scene.planes[13];
  std::vector<float> out(b14.size());
  for (std::size_t i = 0; i < b14.size(); ++i) {
    if (b14[i] == scene.missing_value) {
      out[i] = -1.0f;
      continue;
    }
    const double pct = (b14[i] - 270.0) / (288.0 - 270.0) * 100.0;
    out[i] = static_cast<float>(std::clamp(pct, 0.0, 100.0));
  }
  return out;
}

ConfusionMatrix compare_label_grids(const CloudLabelGrid& truth,
                                    const CloudLabelGrid& predicted) {
  const auto& tg = truth.geometry;
  const auto& pg = predicted.geometry;
  if (tg.cell_lat <= 0 || tg.cell_lon <= 0 || pg.cell_lat <= 0 ||
      pg.cell_lon <= 0)
    throw RasterError("cross-resolution comparison needs positive cell sizes");
  ConfusionMatrix cm;
  for (int r = 0; r < tg.rows; ++r) {
    const double lat = tg.lat_at(r);
    const long pr = std::lround((pg.origin_lat - lat) / pg.cell_lat);
    if (pr < 0 || pr >= pg.rows) continue;
    for (int c = 0; c < tg.cols; ++c) {
      const std::uint8_t t = truth.labels[static_cast<std::size_t>(r) * tg.cols + c];
      if (t == kUnlabeled) continue;
      const double lon = tg.lon_at(c);
      const long pc = std::lround((lon - pg.origin_lon) / pg.cell_lon);
      if (pc < 0 || pc >= pg.cols) continue;
      const std::uint8_t p =
          predicted.labels[static_cast<std::size_t>(pr) * pg.cols + pc];
      if (p == kUnlabeled) continue;
      cm.add(t, p);
    }
  }
  return cm;
}

CrossResolutionReport cross_resolution_compare(const CloudLabelGrid& truth,
                                               const CloudLabelGrid& predicted) {
  CrossResolutionReport r;
  r.truth_to_pred = compare_label_grids(truth, predicted);
  // Walk prediction cells, sample the truth grid, transpose back so rows
  // stay the true class.
  const ConfusionMatrix swapped = compare_label_grids(predicted, truth);
  for (int t = 0; t < kNumClasses; ++t)
    for (int p = 0; p < kNumClasses; ++p)
      r.pred_to_truth.add(std::uint8_t(t), std::uint8_t(p), swapped.at(p, t));
  return r;
}

}  // namespace cldnet
