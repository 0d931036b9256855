#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "sss/baselines/ensemble.hpp"
#include "sss/baselines/hoeffding_tree.hpp"
#include "sss/baselines/smote.hpp"
#include "sss/stream.hpp"

namespace sss::baselines {

/// Time-discounted error weighting of chunk-incremental ensembles.
struct NseWeighting {
  double slope = 0.5;    // a
  double offset = 10.0;  // b
  double eps_floor = 1e-10;

  /// beta = eps / (1 - eps) with eps clipped to [floor, 0.5 - floor].
  double beta(double error) const {
    const double e = std::clamp(error, eps_floor, 0.5 - eps_floor);
    return e / (1.0 - e);
  }

  /// betas[j] is the member's beta when it was j chunks old, so the last
  /// entry is the latest evaluation. Earlier errors are discounted by sigma(j) = 1 / (1 + exp(-a (j - b))), normalized over
  /// the member's lifetime; the vote weight is ln(1 / weighted mean beta).
  double vote_weight(std::span<const double> betas) const {
    double norm = 0, acc = 0;
    for (std::size_t j = 0; j < betas.size(); ++j) {
      const double s = 1.0 / (1.0 + std::exp(-slope * (static_cast<double>(j) - offset)));
      norm += s;
      acc += s * betas[j];
    }
    if (norm <= 0) return 0.0;
    return std::log(norm / acc);
  }
};

/// A voting committee of Hoeffding trees (one tree for CDS, a bagged
/// sub-ensemble for NIE) plus its error history.
struct Committee {
  std::vector<HoeffdingTree> trees;
  std::vector<double> betas;
  double weight = 0;

  Labels predict(const Matrix& x, int n_classes) const {
    std::vector<Labels> votes;
    votes.reserve(trees.size());
    for (const auto& t : trees) votes.push_back(t.predict(x));
    const std::vector<double> equal(trees.size(), 1.0);
    return combine_votes(votes, equal, static_cast<std::size_t>(x.rows()), n_classes);
  }
};

/// Shared machinery for Learn++.CDS and Learn++.NIE: one new committee per
/// chunk, FIFO pool cap, NSE-style time-weighted error voting.
class LearnppBase : public ChunkClassifier<Matrix> {
 public:
  explicit LearnppBase(EnsembleConfig config) : config_(std::move(config)), rng_(config_.seed) {}

  Labels predict(const Matrix& x) override {
    std::vector<Labels> votes;
    std::vector<double> weights;
    for (const auto& c : pool_) {
      votes.push_back(c.predict(x, n_classes()));
      weights.push_back(c.weight);
    }
    return combine_votes(votes, weights, static_cast<std::size_t>(x.rows()), n_classes());
  }

  void partial_fit(const Matrix& x, std::span<const int> y) override {
    pool_.push_back(train_committee(x, y));
    while (pool_.size() > config_.pool_cap) pool_.pop_front();
    for (auto& c : pool_) {
      const double err = committee_error(c, x, y);
      c.betas.push_back(weighting_.beta(err));
      c.weight = err >= 0.5 ? 0.0 : weighting_.vote_weight(c.betas);
    }
  }

  std::size_t pool_size() const { return pool_.size(); }
  const std::deque<Committee>& pool() const { return pool_; }
  const EnsembleConfig& config() const { return config_; }

 protected:
  int n_classes() const { return config_.base_learner.n_classes; }
  virtual Committee train_committee(const Matrix& x, std::span<const int> y) = 0;
  virtual double committee_error(const Committee& c, const Matrix& x, std::span<const int> y) const = 0;

  EnsembleConfig config_;
  std::mt19937_64 rng_;
  NseWeighting weighting_;
  std::deque<Committee> pool_;
};

/// Learn++.CDS: SMOTE-balance each chunk, train one tree, weight by error.
class LearnppCds : public LearnppBase {
 public:
  explicit LearnppCds(EnsembleConfig config = {}, int smote_k = 5) : LearnppBase(std::move(config)), k_(smote_k) {}

  std::size_t smote_calls() const { return smote_calls_; }

 protected:
  Committee train_committee(const Matrix& x, std::span<const int> y) override {
    int present = 0;
    std::vector<int> seen(static_cast<std::size_t>(n_classes()), 0);
    for (int v : y) seen[static_cast<std::size_t>(v)] = 1;
    for (int s : seen) present += s;

    Committee c;
    c.trees.emplace_back(config_.base_learner);
    if (present < 2) {
      c.trees.front().fit(x, y);
      return c;
    }
    ++smote_calls_;
    const LabeledData balanced = smote_balance(x, y, n_classes(), k_, rng_);
    const auto order = shuffled_rows(balanced.x.rows(), rng_);
    c.trees.front().fit(take_rows(balanced.x, order), take_labels(balanced.y, order));
    return c;
  }

  double committee_error(const Committee& c, const Matrix& x, std::span<const int> y) const override {
    const Labels pred = c.predict(x, n_classes());
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < y.size(); ++i) wrong += pred[i] != y[i];
    return y.empty() ? 0.0 : static_cast<double>(wrong) / static_cast<double>(y.size());
  }

 private:
  int k_;
  std::size_t smote_calls_ = 0;
};

/// Learn++.NIE: a bagged sub-ensemble per chunk trained on class-balanced
/// bootstraps; error = 1 - geometric mean of per-class recalls.
class LearnppNie : public LearnppBase {
 public:
  explicit LearnppNie(EnsembleConfig config = {}, int sub_ensemble_size = 3)
      : LearnppBase(std::move(config)), sub_size_(sub_ensemble_size) {}

  /// Row indices of a bootstrap drawing, with replacement, min-class-count
  /// rows from every class present.
  std::vector<Eigen::Index> balanced_bootstrap(std::span<const int> y) {
    std::vector<std::vector<Eigen::Index>> rows(static_cast<std::size_t>(n_classes()));
    for (std::size_t i = 0; i < y.size(); ++i) rows[static_cast<std::size_t>(y[i])].push_back(static_cast<Eigen::Index>(i));
    std::size_t m = std::numeric_limits<std::size_t>::max();
    for (const auto& r : rows) {
      if (!r.empty()) m = std::min(m, r.size());
    }
    std::vector<Eigen::Index> out;
    for (const auto& r : rows) {
      if (r.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, r.size() - 1);
      for (std::size_t i = 0; i < m; ++i) out.push_back(r[pick(rng_)]);
    }
    std::shuffle(out.begin(), out.end(), rng_);
    return out;
  }

 protected:
  Committee train_committee(const Matrix& x, std::span<const int> y) override {
    Committee c;
    for (int b = 0; b < sub_size_; ++b) {
      const auto rows = balanced_bootstrap(y);
      c.trees.emplace_back(config_.base_learner);
      c.trees.back().fit(take_rows(x, rows), take_labels(y, rows));
    }
    return c;
  }

  double committee_error(const Committee& c, const Matrix& x, std::span<const int> y) const override {
    const auto recalls = class_recalls(y, c.predict(x, n_classes()), n_classes());
    if (recalls.empty()) return 0.0;
    double log_sum = 0;
    for (double r : recalls) {
      if (r <= 0) return 1.0;
      log_sum += std::log(r);
    }
    return 1.0 - std::exp(log_sum / static_cast<double>(recalls.size()));
  }

 private:
  int sub_size_;
};

}  // namespace sss::baselines
