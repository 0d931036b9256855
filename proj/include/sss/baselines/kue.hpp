#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "sss/baselines/ensemble.hpp"
#include "sss/baselines/hoeffding_tree.hpp"
#include "sss/metrics.hpp"
#include "sss/stream.hpp"

namespace sss::baselines {

/// Kappa Updated Ensemble, reduced to kappa weighting and selection, random
/// feature subspaces, Poisson(1) online updates and abstention.
class Kue : public ChunkClassifier<Matrix> {
 public:
  struct Member {
    HoeffdingTree tree;
    std::vector<Eigen::Index> features;
    double kappa = 0;
  };

  explicit Kue(EnsembleConfig config = {}) : config_(std::move(config)), rng_(config_.seed) {}

  Labels predict(const Matrix& x) override {
    std::vector<Labels> votes;
    std::vector<double> weights;
    for (const auto& m : pool_) {
      votes.push_back(m.tree.predict(project(x, m.features)));
      weights.push_back(std::max(m.kappa, 0.0));
    }
    return combine_votes(votes, weights, static_cast<std::size_t>(x.rows()), n_classes());
  }

  void partial_fit(const Matrix& x, std::span<const int> y) override {
    // (1) online update of the current pool.
    std::poisson_distribution<int> poisson(1.0);
    for (auto& m : pool_) {
      const Matrix xs = project(x, m.features);
      for (Eigen::Index i = 0; i < xs.rows(); ++i) {
        const int reps = poisson(rng_);
        if (reps > 0) m.tree.learn_one(HoeffdingTree::row(xs, i), y[static_cast<std::size_t>(i)], reps);
      }
    }
    // (2) candidate on a random subspace of size U[ceil(d/2), d].
    const Eigen::Index d = x.cols();
    std::uniform_int_distribution<Eigen::Index> size_dist((d + 1) / 2, d);
    const Eigen::Index r = size_dist(rng_);
    std::vector<Eigen::Index> all(static_cast<std::size_t>(d));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    std::shuffle(all.begin(), all.end(), rng_);
    all.resize(static_cast<std::size_t>(r));
    std::sort(all.begin(), all.end());
    Member cand{HoeffdingTree(config_.base_learner), std::move(all), 0.0};
    cand.tree.fit(project(x, cand.features), y);

    // (3) kappa on the current chunk, (4) selection.
    for (auto& m : pool_) m.kappa = kappa_of(m, x, y);
    cand.kappa = kappa_of(cand, x, y);
    if (pool_.size() < config_.pool_cap) {
      pool_.push_back(std::move(cand));
    } else if (!pool_.empty()) {
      auto worst = std::min_element(pool_.begin(), pool_.end(),
                                    [](const Member& a, const Member& b) { return a.kappa < b.kappa; });
      if (cand.kappa > worst->kappa) *worst = std::move(cand);
    }
  }

  std::size_t pool_size() const { return pool_.size(); }
  const std::vector<Member>& pool() const { return pool_; }

 private:
  int n_classes() const { return config_.base_learner.n_classes; }

  static Matrix project(const Matrix& x, const std::vector<Eigen::Index>& features) {
    Matrix out(x.rows(), static_cast<Eigen::Index>(features.size()));
    for (std::size_t j = 0; j < features.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = x.col(features[j]);
    return out;
  }

  double kappa_of(const Member& m, const Matrix& x, std::span<const int> y) const {
    const Labels pred = m.tree.predict(project(x, m.features));
    return cohen_kappa(y, pred, n_classes());
  }

  EnsembleConfig config_;
  std::mt19937_64 rng_;
  std::vector<Member> pool_;
};

}  // namespace sss::baselines
