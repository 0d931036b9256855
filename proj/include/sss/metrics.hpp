#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "sss/error.hpp"

namespace sss {

/// Binary confusion counts. Class 1 is the positive class.
struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t fn = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;

  std::int64_t total() const { return tp + fn + fp + tn; }
  bool operator==(const ConfusionMatrix&) const = default;

  /// Labels other than 1 count as negative.
  static ConfusionMatrix from_predictions(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size()) {
      throw ShapeError("confusion matrix: " + std::to_string(truth.size()) + " labels vs " +
                       std::to_string(predicted.size()) + " predictions");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool pos = truth[i] == 1;
      const bool pred_pos = predicted[i] == 1;
      if (pos && pred_pos) ++cm.tp;
      else if (pos) ++cm.fn;
      else if (pred_pos) ++cm.fp;
      else ++cm.tn;
    }
    return cm;
  }
};

struct MetricRow {
  double bac = 0;
  double recall = 0;
  double specificity = 0;
  double precision = 0;
  double f1 = 0;
  double gmean = 0;
  double gmean_s = 0;
};

namespace detail {
// Single correctly-rounded division; 0/0 is defined as 0.
inline double ratio(double num, double den) { return den == 0 ? 0.0 : num / den; }
}  // namespace detail

/// Seven imbalanced-classification metrics. Ratios are formed from the integer
/// counts with one rounding each, so they equal the exact rational values
/// rounded to nearest double. Any 0/0 evaluates to 0.
inline MetricRow compute_metrics(const ConfusionMatrix& cm) {
  if (cm.tp < 0 || cm.fn < 0 || cm.fp < 0 || cm.tn < 0) {
    throw std::invalid_argument("confusion matrix with negative count");
  }
  const double tp = static_cast<double>(cm.tp);
  const double fn = static_cast<double>(cm.fn);
  const double fp = static_cast<double>(cm.fp);
  const double tn = static_cast<double>(cm.tn);
  const double pos = tp + fn;
  const double neg = tn + fp;

  MetricRow m;
  m.recall = detail::ratio(tp, pos);
  m.specificity = detail::ratio(tn, neg);
  m.precision = detail::ratio(tp, tp + fp);
  // (tp/pos + tn/neg) / 2 over a common denominator. A missing class
  // contributes a 0 term, matching the 0/0 -> 0 convention.
  if (pos > 0 && neg > 0) {
    m.bac = (tp * neg + tn * pos) / (2.0 * pos * neg);
  } else {
    m.bac = (m.recall + m.specificity) / 2.0;
  }
  // 2PR/(P+R) simplifies to 2tp/(2tp+fp+fn); both sides are 0 when tp = 0.
  m.f1 = detail::ratio(2.0 * tp, 2.0 * tp + fp + fn);
  m.gmean = std::sqrt(detail::ratio(tp * tn, pos * neg));
  m.gmean_s = std::sqrt(detail::ratio(tp * tp, pos * (tp + fp)));
  return m;
}

/// Centered moving average. Windows shrink symmetrically-truncated at the
/// edges, so each output averages only the samples that exist.
inline std::vector<double> smooth(std::span<const double> series, int window) {
  if (window < 1 || window % 2 == 0) {
    throw std::invalid_argument("smoothing window must be odd and >= 1, got " + std::to_string(window));
  }
  const long n = static_cast<long>(series.size());
  const long half = window / 2;
  std::vector<double> out(series.size());
  for (long i = 0; i < n; ++i) {
    const long lo = std::max(0L, i - half);
    const long hi = std::min(n - 1, i + half);
    double sum = 0;
    for (long j = lo; j <= hi; ++j) sum += series[j];
    out[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

/// Cohen's kappa over a C×C confusion table (rows = truth, cols = prediction).
/// Returns 0 when expected agreement is 1 (single-label degenerate case).
inline double cohen_kappa(std::span<const int> truth, std::span<const int> predicted, int n_classes) {
  if (truth.size() != predicted.size()) throw ShapeError("kappa: label/prediction length mismatch");
  const std::size_t n = truth.size();
  if (n == 0) return 0.0;
  std::vector<double> row(n_classes, 0.0), col(n_classes, 0.0);
  double agree = 0;
  for (std::size_t i = 0; i < n; ++i) {
    row[truth[i]] += 1;
    col[predicted[i]] += 1;
    if (truth[i] == predicted[i]) agree += 1;
  }
  const double dn = static_cast<double>(n);
  const double p_o = agree / dn;
  double p_e = 0;
  for (int c = 0; c < n_classes; ++c) p_e += (row[c] / dn) * (col[c] / dn);
  if (p_e >= 1.0) return 0.0;
  return (p_o - p_e) / (1.0 - p_e);
}

}  // namespace sss
