#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "sss/types.hpp"

namespace sss::baselines {

/// SMOTE: n_needed synthetic rows, each x + u * (neighbour - x) with x a
/// uniformly drawn minority row, neighbour one of its k nearest (Euclidean,
/// self excluded) and u ~ U(0, 1). k is clipped to |minority| - 1; a single
/// minority row is duplicated. An empty minority set yields no rows.
inline Matrix smote(const Matrix& minority, std::size_t n_needed, int k, std::mt19937_64& rng) {
  const Eigen::Index m = minority.rows();
  Matrix out(0, minority.cols());
  if (m == 0 || n_needed == 0) return out;
  out.resize(static_cast<Eigen::Index>(n_needed), minority.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, m - 1);
  if (m == 1) {
    for (std::size_t i = 0; i < n_needed; ++i) out.row(static_cast<Eigen::Index>(i)) = minority.row(0);
    return out;
  }
  const int kk = std::clamp(k, 1, static_cast<int>(m - 1));

  // Brute-force neighbour lists.
  std::vector<std::vector<Eigen::Index>> neighbours(static_cast<std::size_t>(m));
  std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(m - 1));
  for (Eigen::Index i = 0; i < m; ++i) {
    std::size_t p = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j != i) dist[p++] = {(minority.row(i) - minority.row(j)).squaredNorm(), j};
    }
    std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
    auto& nb = neighbours[static_cast<std::size_t>(i)];
    for (int q = 0; q < kk; ++q) nb.push_back(dist[static_cast<std::size_t>(q)].second);
  }

  std::uniform_int_distribution<int> which(0, kk - 1);
  std::uniform_real_distribution<double> gap(0.0, 1.0);
  for (std::size_t s = 0; s < n_needed; ++s) {
    const Eigen::Index base = pick(rng);
    const Eigen::Index nb = neighbours[static_cast<std::size_t>(base)][static_cast<std::size_t>(which(rng))];
    const double u = gap(rng);
    out.row(static_cast<Eigen::Index>(s)) = minority.row(base) + u * (minority.row(nb) - minority.row(base));
  }
  return out;
}

struct LabeledData {
  Matrix x;
  Labels y;
};

/// Oversamples every class present up to the largest class count.
/// Absent classes stay absent.
inline LabeledData smote_balance(const Matrix& x, std::span<const int> y, int n_classes, int k, std::mt19937_64& rng) {
  std::vector<std::vector<Eigen::Index>> rows(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < y.size(); ++i) rows[static_cast<std::size_t>(y[i])].push_back(static_cast<Eigen::Index>(i));
  std::size_t target = 0;
  for (const auto& r : rows) target = std::max(target, r.size());

  std::size_t total = 0;
  for (const auto& r : rows) total += r.empty() ? 0 : target;
  LabeledData out{Matrix(static_cast<Eigen::Index>(total), x.cols()), {}};
  out.y.reserve(total);
  Eigen::Index at = 0;
  for (int c = 0; c < n_classes; ++c) {
    const auto& idx = rows[static_cast<std::size_t>(c)];
    if (idx.empty()) continue;
    Matrix cls(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) cls.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
    out.x.middleRows(at, cls.rows()) = cls;
    at += cls.rows();
    const Matrix synth = smote(cls, target - idx.size(), k, rng);
    out.x.middleRows(at, synth.rows()) = synth;
    at += synth.rows();
    out.y.insert(out.y.end(), target, c);
  }
  return out;
}

}  // namespace sss::baselines
