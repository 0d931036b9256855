#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "sss/error.hpp"
#include "sss/stream.hpp"
#include "sss/types.hpp"

namespace sss::baselines {

/// Weighted running mean/variance (West's incremental update).
class GaussianEstimator {
 public:
  void add(double x, double w = 1.0) {
    if (w <= 0) return;
    const double total = weight_ + w;
    const double delta = x - mean_;
    const double r = delta * w / total;
    mean_ += r;
    m2_ += weight_ * delta * r;
    weight_ = total;
  }
  double weight() const { return weight_; }
  double mean() const { return mean_; }
  double variance() const { return weight_ > 1 ? m2_ / (weight_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }

  /// Estimated fraction of the mass at or below t.
  double cdf(double t) const {
    const double sd = stddev();
    if (sd <= 1e-12) return t >= mean_ ? 1.0 : 0.0;
    return 0.5 * std::erfc(-(t - mean_) / (sd * std::numbers::sqrt2));
  }
  double log_pdf(double x) const {
    const double var = std::max(variance(), 1e-9);
    return -0.5 * (std::log(2 * std::numbers::pi * var) + (x - mean_) * (x - mean_) / var);
  }

 private:
  double weight_ = 0, mean_ = 0, m2_ = 0;
};

/// Hellinger distance between the positive- and negative-class branch
/// distributions of a binary split:
///   sqrt((sqrt(L+/N+) - sqrt(L-/N-))^2 + (sqrt(R+/N+) - sqrt(R-/N-))^2)
/// Index 1 is the positive class. A class with zero total scores 0.
inline double hellinger_split_score(double left_pos, double left_neg, double right_pos, double right_neg) {
  const double n_pos = left_pos + right_pos;
  const double n_neg = left_neg + right_neg;
  if (n_pos <= 0 || n_neg <= 0) return 0.0;
  const double a = std::sqrt(left_pos / n_pos) - std::sqrt(left_neg / n_neg);
  const double b = std::sqrt(right_pos / n_pos) - std::sqrt(right_neg / n_neg);
  return std::sqrt(a * a + b * b);
}

/// Multi-class form: the largest one-vs-rest binary score. Equals the binary
/// score when there are two classes.
inline double hellinger_split_score(std::span<const double> left, std::span<const double> right) {
  const std::size_t c = left.size();
  if (c == 2) return hellinger_split_score(left[1], left[0], right[1], right[0]);
  double lt = 0, rt = 0;
  for (std::size_t i = 0; i < c; ++i) lt += left[i], rt += right[i];
  double best = 0;
  for (std::size_t i = 0; i < c; ++i) {
    best = std::max(best, hellinger_split_score(left[i], lt - left[i], right[i], rt - right[i]));
  }
  return best;
}

/// eps = sqrt(R^2 ln(1/delta) / (2n))
inline double hoeffding_bound(double range, double delta, double n) {
  return std::sqrt(range * range * std::log(1.0 / delta) / (2.0 * n));
}

enum class LeafPrediction { kMajorityClass, kNaiveBayes };

struct HoeffdingTreeConfig {
  double grace_period = 200;
  double delta = 1e-7;
  double tie_tau = 0.05;
  LeafPrediction leaf_prediction = LeafPrediction::kMajorityClass;
  int candidate_thresholds = 10;
  int n_classes = 2;

  void validate() const {
    if (!(delta > 0 && delta < 1)) throw ConfigError("hoeffding delta must lie in (0, 1)");
    if (!(tie_tau > 0)) throw ConfigError("hoeffding tie_tau must be > 0");
    if (grace_period <= 0) throw ConfigError("hoeffding grace_period must be > 0");
    if (candidate_thresholds < 1) throw ConfigError("hoeffding candidate_thresholds must be >= 1");
    if (n_classes < 2) throw ConfigError("hoeffding n_classes must be >= 2");
  }
};

/// Incremental decision tree over dense numeric features. Leaves keep
/// per-class Gaussian estimators per attribute; split candidates are the
/// pooled-Gaussian quantiles, scored with the Hellinger criterion and
/// accepted under the Hoeffding bound (range sqrt(2)) or the tie rule.
class HoeffdingTree {
 public:
  explicit HoeffdingTree(HoeffdingTreeConfig config = {}) : config_(config) {
    config_.validate();
    // Standard-normal quantiles at i / (K + 1), i = 1..K.
    const int k = config_.candidate_thresholds;
    for (int i = 1; i <= k; ++i) z_quantiles_.push_back(normal_quantile(static_cast<double>(i) / (k + 1)));
    nodes_.push_back(make_leaf(std::vector<double>(config_.n_classes, 0.0)));
  }

  const HoeffdingTreeConfig& config() const { return config_; }
  std::size_t n_nodes() const { return nodes_.size(); }
  std::size_t n_leaves() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.leaf; }));
  }
  std::size_t n_features() const { return n_features_; }

  void learn_one(std::span<const double> x, int y, double weight = 1.0) {
    if (weight <= 0) return;
    bind_dim(x.size());
    if (y < 0 || y >= config_.n_classes) throw ShapeError("class " + std::to_string(y) + " out of range");
    const std::size_t leaf_id = find_leaf(x);
    {
      Node& leaf = nodes_[leaf_id];
      if (leaf.estimators.empty()) leaf.estimators.resize(n_features_ * config_.n_classes);
      leaf.class_weight[y] += weight;
      for (std::size_t j = 0; j < n_features_; ++j) leaf.estimators[j * config_.n_classes + y].add(x[j], weight);
      leaf.weight_since_eval += weight;
      if (leaf.weight_since_eval < config_.grace_period) return;
      leaf.weight_since_eval = 0;
    }
    try_split(leaf_id);
  }

  int predict_one(std::span<const double> x) const {
    if (n_features_ == 0) return 0;
    check_dim(x.size());
    const Node& leaf = nodes_[find_leaf(x)];
    if (config_.leaf_prediction == LeafPrediction::kNaiveBayes && !leaf.estimators.empty()) {
      return naive_bayes(leaf, x);
    }
    return majority(leaf.class_weight);
  }

  void fit(const Matrix& x, std::span<const int> y, std::span<const double> weights = {}) {
    if (y.size() != static_cast<std::size_t>(x.rows()) || (!weights.empty() && weights.size() != y.size())) {
      throw ShapeError("hoeffding tree: " + std::to_string(x.rows()) + " rows but " + std::to_string(y.size()) + " labels");
    }
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      learn_one(row(x, i), y[static_cast<std::size_t>(i)], weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)]);
    }
  }

  Labels predict(const Matrix& x) const {
    Labels out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = predict_one(row(x, i));
    return out;
  }

  static std::span<const double> row(const Matrix& x, Eigen::Index i) {
    return {x.data() + i * x.cols(), static_cast<std::size_t>(x.cols())};
  }

 private:
  struct Node {
    bool leaf = true;
    // Leaf state.
    std::vector<double> class_weight;
    std::vector<GaussianEstimator> estimators;  // [feature * C + class]
    double weight_since_eval = 0;
    // Split state.
    std::size_t feature = 0;
    double threshold = 0;
    std::size_t left = 0, right = 0;
  };

  static Node make_leaf(std::vector<double> class_weight) {
    Node n;
    n.class_weight = std::move(class_weight);
    return n;
  }

  static double normal_quantile(double p) {
    double lo = -10, hi = 10;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (0.5 * std::erfc(-mid / std::numbers::sqrt2) < p) lo = mid;
      else hi = mid;
    }
    return 0.5 * (lo + hi);
  }

  static int majority(const std::vector<double>& w) {
    return static_cast<int>(std::max_element(w.begin(), w.end()) - w.begin());
  }

  void check_dim(std::size_t d) const {
    if (n_features_ != 0 && d != n_features_) {
      throw ShapeError("hoeffding tree expects " + std::to_string(n_features_) + " features, got " + std::to_string(d));
    }
  }

  // Fixes the dimension on first use.
  void bind_dim(std::size_t d) {
    if (n_features_ == 0) n_features_ = d;
    check_dim(d);
  }

  std::size_t find_leaf(std::span<const double> x) const {
    std::size_t id = 0;
    while (!nodes_[id].leaf) id = x[nodes_[id].feature] <= nodes_[id].threshold ? nodes_[id].left : nodes_[id].right;
    return id;
  }

  int naive_bayes(const Node& leaf, std::span<const double> x) const {
    const int c_count = config_.n_classes;
    double total = 0;
    for (double w : leaf.class_weight) total += w;
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < c_count; ++c) {
      if (leaf.class_weight[c] <= 0) continue;
      double s = std::log(leaf.class_weight[c] / total);
      for (std::size_t j = 0; j < n_features_; ++j) {
        const auto& est = leaf.estimators[j * c_count + c];
        if (est.weight() > 0) s += est.log_pdf(x[j]);
      }
      if (s > best_score) best_score = s, best = c;
    }
    return best;
  }

  struct SplitCandidate {
    double score = 0;
    double threshold = 0;
    std::vector<double> left, right;
  };

  // Best candidate threshold for feature j among the pooled-Gaussian quantiles.
  SplitCandidate best_split_for_feature(const Node& leaf, std::size_t j) const {
    const int c_count = config_.n_classes;
    SplitCandidate best;
    double w_sum = 0, mean = 0, second_moment = 0;
    for (int c = 0; c < c_count; ++c) {
      const auto& est = leaf.estimators[j * c_count + c];
      if (est.weight() <= 0) continue;
      w_sum += est.weight();
      mean += est.weight() * est.mean();
      second_moment += est.weight() * (est.variance() + est.mean() * est.mean());
    }
    if (w_sum <= 0) return best;
    mean /= w_sum;
    const double var = second_moment / w_sum - mean * mean;
    if (!(var > 1e-24)) return best;
    const double sd = std::sqrt(var);
    std::vector<double> left(c_count), right(c_count);
    for (double z : z_quantiles_) {
      const double t = mean + sd * z;
      for (int c = 0; c < c_count; ++c) {
        const auto& est = leaf.estimators[j * c_count + c];
        left[c] = est.weight() > 0 ? est.weight() * est.cdf(t) : 0.0;
        right[c] = est.weight() - left[c];
      }
      const double score = hellinger_split_score(left, right);
      if (score > best.score) {
        best.score = score;
        best.threshold = t;
        best.left = left;
        best.right = right;
      }
    }
    return best;
  }

  void try_split(std::size_t leaf_id) {
    double total = 0;
    int classes_seen = 0;
    for (double w : nodes_[leaf_id].class_weight) total += w, classes_seen += (w > 0);
    if (classes_seen < 2) return;

    SplitCandidate best;
    std::size_t best_feature = 0;
    double second = 0;  // best score among the remaining features (or the null split)
    for (std::size_t j = 0; j < n_features_; ++j) {
      SplitCandidate cand = best_split_for_feature(nodes_[leaf_id], j);
      if (cand.score > best.score) {
        second = best.score;
        best = std::move(cand);
        best_feature = j;
      } else {
        second = std::max(second, cand.score);
      }
    }
    if (best.score <= 0) return;
    const double eps = hoeffding_bound(std::numbers::sqrt2, config_.delta, total);
    if (!(best.score - second > eps || eps < config_.tie_tau)) return;

    const std::size_t left_id = nodes_.size();
    nodes_.push_back(make_leaf(std::move(best.left)));
    nodes_.push_back(make_leaf(std::move(best.right)));
    Node& split = nodes_[leaf_id];
    split.leaf = false;
    split.feature = best_feature;
    split.threshold = best.threshold;
    split.left = left_id;
    split.right = left_id + 1;
    split.class_weight.clear();
    split.estimators.clear();
    split.estimators.shrink_to_fit();
  }

  HoeffdingTreeConfig config_;
  std::vector<double> z_quantiles_;
  std::vector<Node> nodes_;
  std::size_t n_features_ = 0;
};

/// Single Hoeffding tree as a chunk classifier.
class HoeffdingTreeClassifier : public ChunkClassifier<Matrix> {
 public:
  explicit HoeffdingTreeClassifier(HoeffdingTreeConfig config = {}) : tree_(config) {}
  Labels predict(const Matrix& x) override { return tree_.predict(x); }
  void partial_fit(const Matrix& x, std::span<const int> y) override { tree_.fit(x, y); }
  const HoeffdingTree& tree() const { return tree_; }

 private:
  HoeffdingTree tree_;
};

/// Gaussian naive Bayes with incrementally updated per-class estimators.
class GaussianNaiveBayes : public ChunkClassifier<Matrix> {
 public:
  explicit GaussianNaiveBayes(int n_classes = 2) : n_classes_(n_classes), class_weight_(n_classes, 0.0) {}

  void partial_fit(const Matrix& x, std::span<const int> y) override {
    if (y.size() != static_cast<std::size_t>(x.rows())) throw ShapeError("naive bayes: row/label count mismatch");
    if (estimators_.empty()) estimators_.resize(static_cast<std::size_t>(x.cols()) * n_classes_);
    if (static_cast<std::size_t>(x.cols()) * n_classes_ != estimators_.size()) {
      throw ShapeError("naive bayes: feature dimension changed");
    }
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const int c = y[static_cast<std::size_t>(i)];
      class_weight_.at(c) += 1;
      for (Eigen::Index j = 0; j < x.cols(); ++j) estimators_[j * n_classes_ + c].add(x(i, j));
    }
  }

  Labels predict(const Matrix& x) override {
    Labels out(static_cast<std::size_t>(x.rows()), 0);
    if (estimators_.empty()) return out;
    double total = 0;
    for (double w : class_weight_) total += w;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double best_score = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < n_classes_; ++c) {
        if (class_weight_[c] <= 0) continue;
        double s = std::log(class_weight_[c] / total);
        for (Eigen::Index j = 0; j < x.cols(); ++j) s += estimators_[j * n_classes_ + c].log_pdf(x(i, j));
        if (s > best_score) best_score = s, out[static_cast<std::size_t>(i)] = c;
      }
    }
    return out;
  }

 private:
  int n_classes_;
  std::vector<double> class_weight_;
  std::vector<GaussianEstimator> estimators_;
};

}  // namespace sss::baselines
