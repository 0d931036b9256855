#pragma once

#include <random>
#include <span>
#include <vector>

#include "sss/baselines/ensemble.hpp"
#include "sss/baselines/hoeffding_tree.hpp"
#include "sss/error.hpp"
#include "sss/stream.hpp"

namespace sss::baselines {

enum class ResampleMode { kOversample, kUndersample };

struct OnlineBaggingConfig {
  ResampleMode mode = ResampleMode::kOversample;
  double size_decay = 0.9;  // theta
  double lambda_cap = 10.0;

  void validate() const {
    if (!(size_decay > 0 && size_decay < 1)) throw ConfigError("online bagging size_decay must lie in (0, 1)");
  }
};

/// Poisson rate for an instance of class y given the decayed class sizes.
/// OOB: minority instances get s_maj / s_min. UOB: majority instances get
/// s_min / s_maj. Everything else gets 1. Capped at lambda_cap (which also
/// covers s_min = 0).
inline double resampling_rate(ResampleMode mode, int y, double size_neg, double size_pos, double cap) {
  const double own = y == 1 ? size_pos : size_neg;
  const double other = y == 1 ? size_neg : size_pos;
  if (own == other) return 1.0;
  const bool minority = own < other;
  double lambda = 1.0;
  if (mode == ResampleMode::kOversample && minority) lambda = own > 0 ? other / own : cap;
  if (mode == ResampleMode::kUndersample && !minority) lambda = other / own;
  return std::min(lambda, cap);
}

/// Oversampling / undersampling online bagging (OOB / UOB), binary labels.
/// Instances are consumed one at a time; the rate uses the class sizes
/// before the instance is counted.
class OnlineBagging : public ChunkClassifier<Matrix> {
 public:
  explicit OnlineBagging(EnsembleConfig config = {}, OnlineBaggingConfig bagging = {})
      : config_(std::move(config)), bagging_(bagging), rng_(config_.seed) {
    bagging_.validate();
    if (config_.base_learner.n_classes != 2) throw ConfigError("OOB/UOB support binary labels only");
    for (std::size_t i = 0; i < config_.pool_cap; ++i) pool_.emplace_back(config_.base_learner);
  }

  Labels predict(const Matrix& x) override {
    std::vector<Labels> votes;
    for (const auto& t : pool_) votes.push_back(t.predict(x));
    const std::vector<double> equal(pool_.size(), 1.0);
    return combine_votes(votes, equal, static_cast<std::size_t>(x.rows()), 2);
  }

  void partial_fit(const Matrix& x, std::span<const int> y) override {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const int label = y[static_cast<std::size_t>(i)];
      if (label != 0 && label != 1) throw ShapeError("OOB/UOB support binary labels only");
      const double lambda = resampling_rate(bagging_.mode, label, sizes_[0], sizes_[1], bagging_.lambda_cap);
      last_lambda_ = lambda;
      const auto row = HoeffdingTree::row(x, i);
      for (auto& tree : pool_) {
        int reps = 0;
        if (lambda > 0) reps = std::poisson_distribution<int>(lambda)(rng_);
        if (reps > 0) tree.learn_one(row, label, reps);
      }
      for (int c = 0; c < 2; ++c) {
        sizes_[c] = bagging_.size_decay * sizes_[c] + (1 - bagging_.size_decay) * (label == c ? 1.0 : 0.0);
      }
    }
  }

  std::size_t pool_size() const { return pool_.size(); }
  double class_size(int c) const { return sizes_[c]; }
  double last_lambda() const { return last_lambda_; }

 private:
  EnsembleConfig config_;
  OnlineBaggingConfig bagging_;
  std::mt19937_64 rng_;
  std::vector<HoeffdingTree> pool_;
  double sizes_[2] = {0, 0};
  double last_lambda_ = 1.0;
};

}  // namespace sss::baselines
