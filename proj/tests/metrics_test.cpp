#include "sss/metrics.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

namespace sss {
namespace {

TEST(ComputeMetrics, WorkedExample) {
  const MetricRow m = compute_metrics({40, 10, 20, 30});
  EXPECT_DOUBLE_EQ(m.recall, 0.8);
  EXPECT_DOUBLE_EQ(m.specificity, 0.6);
  EXPECT_DOUBLE_EQ(m.bac, 0.7);
  EXPECT_NEAR(m.gmean, 0.6928, 5e-5);
  EXPECT_DOUBLE_EQ(m.precision, 40.0 / 60.0);
}

TEST(ComputeMetrics, PerfectPrediction) {
  const MetricRow m = compute_metrics({25, 0, 0, 75});
  for (double v : {m.bac, m.recall, m.specificity, m.precision, m.f1, m.gmean, m.gmean_s}) EXPECT_EQ(v, 1.0);
}

TEST(ComputeMetrics, AllPositivePredictorOnBalancedChunk) {
  const MetricRow m = compute_metrics({50, 0, 50, 0});
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.specificity, 0.0);
  EXPECT_EQ(m.bac, 0.5);
  EXPECT_EQ(m.gmean, 0.0);
}

TEST(ComputeMetrics, DegenerateRatiosAreZero) {
  // No positives at all and nothing predicted positive.
  const MetricRow m = compute_metrics({0, 0, 0, 10});
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_EQ(m.specificity, 1.0);
  EXPECT_EQ(m.bac, 0.5);
}

TEST(ComputeMetrics, NegativeCountRejected) { EXPECT_THROW(compute_metrics({-1, 0, 0, 1}), std::invalid_argument); }

TEST(ComputeMetrics, PropertiesOverRandomMatrices) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> count(0, 60);
  for (int trial = 0; trial < 500; ++trial) {
    ConfusionMatrix cm{count(rng), count(rng), count(rng), count(rng)};
    if (cm.total() == 0) continue;
    const MetricRow m = compute_metrics(cm);
    for (double v : {m.bac, m.recall, m.specificity, m.precision, m.f1, m.gmean, m.gmean_s}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_NEAR(m.gmean * m.gmean, m.recall * m.specificity, 1e-9);
    EXPECT_NEAR(m.gmean_s * m.gmean_s, m.recall * m.precision, 1e-9);
    // bac is formed with one rounding; the mean of the rounded parts may differ by an ulp.
    EXPECT_NEAR(m.bac, (m.recall + m.specificity) / 2, 2e-16);

    // Swapping the positive class swaps recall and specificity; bac is unchanged.
    const MetricRow swapped = compute_metrics({cm.tn, cm.fp, cm.fn, cm.tp});
    EXPECT_EQ(swapped.recall, m.specificity);
    EXPECT_EQ(swapped.specificity, m.recall);
    EXPECT_EQ(swapped.bac, m.bac);

    // Scale-free.
    const std::int64_t k = 1 + trial % 7;
    const MetricRow scaled = compute_metrics({cm.tp * k, cm.fn * k, cm.fp * k, cm.tn * k});
    EXPECT_EQ(scaled.bac, m.bac);
    EXPECT_EQ(scaled.f1, m.f1);
    EXPECT_EQ(scaled.gmean, m.gmean);
    EXPECT_EQ(scaled.gmean_s, m.gmean_s);
    EXPECT_EQ(scaled.precision, m.precision);
  }
}

TEST(ComputeMetrics, MatchesRationalOracle) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> count(0, 300);
  for (int trial = 0; trial < 200; ++trial) {
    const ConfusionMatrix cm{count(rng), count(rng), count(rng), count(rng)};
    if (cm.total() == 0) continue;
    const auto ref = oracle::metrics(cm.tp, cm.fn, cm.fp, cm.tn);
    const MetricRow m = compute_metrics(cm);
    EXPECT_EQ(m.recall, ref.recall.value());
    EXPECT_EQ(m.specificity, ref.specificity.value());
    EXPECT_EQ(m.precision, ref.precision.value());
    EXPECT_EQ(m.bac, ref.bac.value());
    EXPECT_EQ(m.f1, ref.f1.value());
    EXPECT_EQ(m.gmean, std::sqrt(ref.gmean_sq.value()));
    EXPECT_EQ(m.gmean_s, std::sqrt(ref.gmean_s_sq.value()));
  }
}

TEST(ConfusionMatrix, FromPredictions) {
  const std::vector<int> truth{1, 1, 0, 0, 1};
  const std::vector<int> pred{1, 0, 1, 0, 1};
  EXPECT_EQ(ConfusionMatrix::from_predictions(truth, pred), (ConfusionMatrix{2, 1, 1, 1}));
  EXPECT_THROW(ConfusionMatrix::from_predictions(truth, std::vector<int>{1}), ShapeError);
}

TEST(Smooth, WindowOneIsIdentity) {
  const std::vector<double> s{0.3, 0.1, 0.9, 0.4};
  EXPECT_EQ(smooth(s, 1), s);
}

TEST(Smooth, ConstantSeriesUnchanged) {
  const std::vector<double> s(9, 0.25);
  for (int w : {1, 3, 5, 9, 21}) {
    for (double v : smooth(s, w)) EXPECT_DOUBLE_EQ(v, 0.25);
  }
}

TEST(Smooth, EdgeShrink) {
  const std::vector<double> s{0, 1, 0};
  const auto out = smooth(s, 3);
  EXPECT_DOUBLE_EQ(out[0], 0.5);
  EXPECT_DOUBLE_EQ(out[1], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(out[2], 0.5);
}

TEST(Smooth, EvenWindowRejected) {
  const std::vector<double> s{1, 2};
  EXPECT_THROW(smooth(s, 2), std::invalid_argument);
  EXPECT_THROW(smooth(s, 0), std::invalid_argument);
}

TEST(CohenKappa, WorkedExample) {
  // TP=45, FN=5, FP=15, TN=35: p_o = 0.8, p_e = 0.5.
  std::vector<int> truth, pred;
  auto add = [&](int t, int p, int n) {
    for (int i = 0; i < n; ++i) truth.push_back(t), pred.push_back(p);
  };
  add(1, 1, 45);
  add(1, 0, 5);
  add(0, 1, 15);
  add(0, 0, 35);
  EXPECT_NEAR(cohen_kappa(truth, pred, 2), 0.6, 1e-12);
}

TEST(CohenKappa, PerfectAndConstant) {
  const std::vector<int> truth{0, 1, 1, 0, 1};
  EXPECT_DOUBLE_EQ(cohen_kappa(truth, truth, 2), 1.0);
  const std::vector<int> constant(5, 1);
  EXPECT_LE(cohen_kappa(truth, constant, 2), 0.0);
}

}  // namespace
}  // namespace sss
