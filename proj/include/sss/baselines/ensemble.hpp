#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "sss/baselines/hoeffding_tree.hpp"
#include "sss/types.hpp"

namespace sss::baselines {

struct EnsembleConfig {
  std::size_t pool_cap = 10;
  HoeffdingTreeConfig base_learner;
  std::uint64_t seed = 0;
};

/// Weighted plurality vote. Zero-weight members abstain; if every member
/// abstains the vote falls back to equal weights. Ties go to the lowest class.
inline int weighted_vote(std::span<const int> votes, std::span<const double> weights, int n_classes) {
  std::vector<double> tally(static_cast<std::size_t>(n_classes), 0.0);
  bool any = false;
  for (std::size_t m = 0; m < votes.size(); ++m) {
    if (weights[m] > 0) {
      tally[static_cast<std::size_t>(votes[m])] += weights[m];
      any = true;
    }
  }
  if (!any) {
    for (int v : votes) tally[static_cast<std::size_t>(v)] += 1.0;
  }
  return static_cast<int>(std::max_element(tally.begin(), tally.end()) - tally.begin());
}

/// Row-wise weighted vote over per-member prediction vectors.
inline Labels combine_votes(const std::vector<Labels>& member_predictions, std::span<const double> weights,
                            std::size_t n_rows, int n_classes) {
  Labels out(n_rows, 0);
  if (member_predictions.empty()) return out;
  std::vector<int> votes(member_predictions.size());
  for (std::size_t i = 0; i < n_rows; ++i) {
    for (std::size_t m = 0; m < member_predictions.size(); ++m) votes[m] = member_predictions[m][i];
    out[i] = weighted_vote(votes, weights, n_classes);
  }
  return out;
}

/// Random permutation of row order, shared by the chunk-level ensembles.
inline std::vector<Eigen::Index> shuffled_rows(Eigen::Index n, std::mt19937_64& rng) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

inline Matrix take_rows(const Matrix& x, std::span<const Eigen::Index> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

inline Labels take_labels(std::span<const int> y, std::span<const Eigen::Index> rows) {
  Labels out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = y[static_cast<std::size_t>(rows[i])];
  return out;
}

/// Per-class recall over classes present in `truth`.
inline std::vector<double> class_recalls(std::span<const int> truth, std::span<const int> predicted, int n_classes) {
  std::vector<double> hit(static_cast<std::size_t>(n_classes), 0.0), total(static_cast<std::size_t>(n_classes), 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    total[static_cast<std::size_t>(truth[i])] += 1;
    if (truth[i] == predicted[i]) hit[static_cast<std::size_t>(truth[i])] += 1;
  }
  std::vector<double> out;
  for (int c = 0; c < n_classes; ++c) {
    if (total[static_cast<std::size_t>(c)] > 0) out.push_back(hit[static_cast<std::size_t>(c)] / total[static_cast<std::size_t>(c)]);
  }
  return out;
}

}  // namespace sss::baselines
