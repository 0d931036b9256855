#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "sss/cnn/gradient_check.hpp"
#include "sss/cnn/layers.hpp"
#include "sss/cnn/resnet.hpp"
#include "sss/sss_classifier.hpp"

namespace sss::cnn {
namespace {

template <class T>
Tensor4<T> random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Tensor4<T> t(n, c, h, w);
  for (auto& v : t.data) v = static_cast<T>(g(rng));
  return t;
}

TEST(Conv2d, OneByOneIdentity) {
  Conv2d<double> conv("c", 1, 1, 1, 1, 0);
  conv.weight.value = {1.0};
  const auto x = random_tensor<double>(2, 1, 4, 5, 1);
  EXPECT_EQ(conv.forward(x).data, x.data);
}

TEST(Conv2d, AllOnesKernelCountsNeighbours) {
  Conv2d<double> conv("c", 1, 1, 3, 1, 1);
  std::fill(conv.weight.value.begin(), conv.weight.value.end(), 1.0);
  const Tensor4<double> x(1, 1, 5, 5, 1.0);
  const auto y = conv.forward(x);
  EXPECT_EQ(y.at(0, 0, 2, 2), 9.0);
  EXPECT_EQ(y.at(0, 0, 0, 0), 4.0);
  EXPECT_EQ(y.at(0, 0, 0, 2), 6.0);
}

TEST(Conv2d, MatchesDirectLoopOracle) {
  std::mt19937_64 rng(3);
  struct Case {
    int c, o, h, w, k, stride, pad;
  };
  const Case cases[] = {{1, 2, 5, 7, 3, 1, 1}, {3, 4, 8, 6, 3, 2, 1}, {2, 3, 9, 9, 1, 2, 0},
                        {3, 2, 11, 10, 7, 2, 3}, {4, 5, 6, 6, 3, 1, 0}};
  for (const auto& cs : cases) {
    Conv2d<double> conv("c", cs.c, cs.o, cs.k, cs.stride, cs.pad);
    conv.init(rng);
    const auto x = random_tensor<double>(2, cs.c, cs.h, cs.w, rng());
    const auto y = conv.forward(x);
    for (int n = 0; n < 2; ++n) {
      std::vector<double> img(x.image(n), x.image(n) + static_cast<std::size_t>(cs.c) * cs.h * cs.w);
      int ho = 0, wo = 0;
      const auto ref = oracle::conv2d(img, cs.c, cs.h, cs.w, conv.weight.value, cs.o, cs.k, cs.stride, cs.pad, ho, wo);
      ASSERT_EQ(y.h, ho);
      ASSERT_EQ(y.w, wo);
      for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(y.image(n)[i], ref[i], 1e-10);
    }
  }
}

// Finite-difference check of a layer's input gradient under loss = <y, r>.
template <class Forward, class Backward>
double input_gradient_error(Tensor4<double> x, Forward&& fwd, Backward&& bwd, std::uint64_t seed) {
  const auto y0 = fwd(x);
  const auto r = random_tensor<double>(y0.n, y0.c, y0.h, y0.w, seed);
  const auto dx = bwd(r);
  auto loss = [&](const Tensor4<double>& in) {
    const auto y = fwd(in);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y.data[i] * r.data[i];
    return s;
  };
  double worst = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x.data[i];
    x.data[i] = saved + 1e-6;
    const double up = loss(x);
    x.data[i] = saved - 1e-6;
    const double down = loss(x);
    x.data[i] = saved;
    worst = std::max(worst, relative_error(dx.data[i], (up - down) / 2e-6));
  }
  return worst;
}

TEST(Conv2d, InputGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  Conv2d<double> conv("c", 2, 3, 3, 2, 1);
  conv.init(rng);
  const auto x = random_tensor<double>(2, 2, 5, 6, 5);
  const double err = input_gradient_error(
      x, [&](const Tensor4<double>& in) { return conv.forward(in); },
      [&](const Tensor4<double>& dy) {
        conv.forward(x);
        return conv.backward(dy);
      },
      6);
  EXPECT_LT(err, 1e-6);
}

TEST(BatchNorm, TrainModeNormalizesPerChannel) {
  BatchNorm2d<double> bn("bn", 3);
  auto x = random_tensor<double>(4, 3, 5, 5, 7);
  for (auto& v : x.data) v = 3 * v + 2;
  const auto y = bn.forward(x, Mode::kTrain);
  for (int c = 0; c < 3; ++c) {
    double mean = 0, sq = 0;
    const double m = 4 * 25;
    for (int n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 25; ++i) mean += y.data[y.offset(n, c) + i];
    mean /= m;
    for (int n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 25; ++i) sq += std::pow(y.data[y.offset(n, c) + i] - mean, 2);
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(sq / m, 1.0, 1e-5);
  }
}

TEST(BatchNorm, RunningStatisticsUpdate) {
  BatchNorm2d<double> bn("bn", 1);
  Tensor4<double> x(2, 1, 1, 2);
  x.data = {1, 2, 3, 4};  // mean 2.5, biased var 1.25, unbiased 5/3
  bn.forward(x, Mode::kTrain);
  EXPECT_NEAR(bn.running_mean.value[0], 0.25, 1e-15);
  EXPECT_NEAR(bn.running_var.value[0], 0.9 + 0.1 * 5.0 / 3.0, 1e-15);
  bn.forward(x, Mode::kTrain, false);
  EXPECT_NEAR(bn.running_mean.value[0], 0.25, 1e-15);
}

TEST(BatchNorm, EvalModeUsesRunningStatistics) {
  BatchNorm2d<double> bn("bn", 2);
  const auto x = random_tensor<double>(3, 2, 4, 4, 8);
  const auto y = bn.forward(x, Mode::kEval);
  const double k = 1 / std::sqrt(1 + BatchNorm2d<double>::kEps);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y.data[i], x.data[i] * k, 1e-15);
  EXPECT_EQ(bn.running_mean.value[0], 0.0);
}

TEST(BatchNorm, SingleSampleTrainBatchUsesRunningStatistics) {
  BatchNorm2d<double> bn("bn", 2);
  const auto x = random_tensor<double>(1, 2, 3, 3, 9);
  EXPECT_EQ(bn.forward(x, Mode::kTrain).data, bn.forward(x, Mode::kEval).data);
}

TEST(BatchNorm, InputGradientMatchesFiniteDifferences) {
  BatchNorm2d<double> bn("bn", 2);
  bn.scale.value = {1.5, -0.7};
  bn.shift.value = {0.2, 0.1};
  const auto x = random_tensor<double>(3, 2, 3, 4, 10);
  const double err = input_gradient_error(
      x, [&](const Tensor4<double>& in) { return bn.forward(in, Mode::kTrain, false); },
      [&](const Tensor4<double>& dy) {
        bn.forward(x, Mode::kTrain, false);
        return bn.backward(dy);
      },
      11);
  EXPECT_LT(err, 1e-5);
}

TEST(MaxPool, ShapeAndValues) {
  MaxPool2d<double> pool;
  Tensor4<double> x(1, 1, 4, 4);
  for (int i = 0; i < 16; ++i) x.data[i] = i;
  const auto y = pool.forward(x);
  ASSERT_EQ(y.h, 2);
  ASSERT_EQ(y.w, 2);
  EXPECT_EQ(y.data, (std::vector<double>{5, 7, 13, 15}));
}

CnnConfig small_config(std::uint64_t seed = 1) {
  CnnConfig c = CnnConfig::tiny();
  c.seed = seed;
  return c;
}

std::vector<Image> random_images(std::size_t n, int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  std::vector<Image> out;
  for (std::size_t i = 0; i < n; ++i) {
    Image img(h, w);
    for (Eigen::Index j = 0; j < img.size(); ++j) img.data()[j] = g(rng);
    out.push_back(img);
  }
  return out;
}

Tensor4<float> batch_of(const std::vector<Image>& images) {
  std::vector<const Image*> ptrs;
  for (const auto& i : images) ptrs.push_back(&i);
  return ResNet<float>::replicate_channels(ptrs);
}

TEST(ResNet, ReplicateChannels) {
  const auto imgs = random_images(2, 4, 3, 1);
  const auto x = batch_of(imgs);
  EXPECT_EQ(x.c, 3);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 12; ++i) EXPECT_EQ(x.data[x.offset(n, c) + i], imgs[n].data()[i]);
}

TEST(ResNet, SoftmaxRowsSumToOne) {
  ResNet<float> net(small_config());
  const auto probs = net.forward(batch_of(random_images(5, 12, 10, 2)));
  ASSERT_EQ(probs.rows(), 5);
  ASSERT_EQ(probs.cols(), 2);
  for (Eigen::Index r = 0; r < 5; ++r) {
    EXPECT_NEAR(probs.row(r).sum(), 1.0f, 1e-6f);
    EXPECT_GE(probs.row(r).minCoeff(), 0.0f);
  }
}

TEST(ResNet, EvalIsPerSampleAndPermutationEquivariant) {
  ResNet<double> net(small_config());
  auto imgs = random_images(4, 8, 8, 3);
  imgs[2] = imgs[0];
  std::vector<const Image*> ptrs{&imgs[0], &imgs[1], &imgs[2], &imgs[3]};
  const auto p = net.forward(ResNet<double>::replicate_channels(ptrs));
  EXPECT_EQ(p.row(0), p.row(2));
  std::vector<const Image*> perm{&imgs[3], &imgs[1], &imgs[0], &imgs[2]};
  const auto q = net.forward(ResNet<double>::replicate_channels(perm));
  EXPECT_LT((q.row(0) - p.row(3)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((q.row(1) - p.row(1)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ResNet, EpochBatchCount) {
  CnnConfig c = small_config();
  ResNet<float> net(c);
  const auto imgs = random_images(250, 6, 6, 4);
  std::vector<int> labels(250);
  for (int i = 0; i < 250; ++i) labels[i] = i % 2;
  EXPECT_EQ(net.train_one_epoch(imgs, labels).size(), 32u);
}

TEST(ResNet, ZeroLearningRateLeavesParametersUnchanged) {
  CnnConfig c = small_config();
  c.lr = 0;
  c.momentum = 0;
  ResNet<float> net(c);
  std::vector<std::vector<float>> before;
  net.visit_params([&](Param<float>& p) { before.push_back(p.value); });
  const auto imgs = random_images(20, 6, 6, 5);
  std::vector<int> labels(20, 1);
  net.train_one_epoch(imgs, labels);
  std::size_t i = 0;
  net.visit_params([&](Param<float>& p) { EXPECT_EQ(p.value, before[i++]) << p.name; });
}

TEST(ResNet, ZeroHeadGivesLogClassCountLoss) {
  for (int classes : {2, 3, 5}) {
    CnnConfig c = small_config();
    c.n_classes = classes;
    c.zero_init_head = true;
    ResNet<double> net(c);
    Tensor4<double> x(2, 3, 6, 6);
    std::vector<int> labels{0, classes - 1};
    EXPECT_NEAR(net.loss_and_backward(x, labels, false), std::log(static_cast<double>(classes)), 1e-12);
  }
}

TEST(ResNet, LossScaleScalesGradients) {
  ResNet<double> a(small_config()), b(small_config());
  const auto x = random_tensor<double>(3, 3, 6, 6, 12);
  std::vector<int> labels{0, 1, 1};
  const double la = a.loss_and_backward(x, labels, true, 1.0);
  const double lb = b.loss_and_backward(x, labels, true, 2.0);
  EXPECT_NEAR(lb, 2 * la, 1e-12);
  std::vector<double> ga, gb;
  a.visit_params([&](Param<double>& p) { ga.insert(ga.end(), p.grad.begin(), p.grad.end()); });
  b.visit_params([&](Param<double>& p) { gb.insert(gb.end(), p.grad.begin(), p.grad.end()); });
  for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_NEAR(gb[i], 2 * ga[i], 1e-12 + 1e-9 * std::abs(ga[i]));
}

TEST(ResNet, GradientCheckTiny) {
  const auto r = gradient_check(CnnConfig::tiny(), 8, 12);
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter;
  EXPECT_GT(r.checked, 1000u);
}

TEST(ResNet, GradientCheckWithPoolingAndThreeClasses) {
  CnnConfig c;
  c.stem = {3, 2, 4, true};
  c.stages = {{1, 4}, {1, 6}};
  c.n_classes = 3;
  const auto r = gradient_check(c, 12, 10, 3);
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter;
}

TEST(ResNet, SeededTrainingIsDeterministic) {
  const auto imgs = random_images(30, 8, 6, 6);
  std::vector<int> labels(30);
  for (int i = 0; i < 30; ++i) labels[i] = (i * 7) % 2;
  auto train = [&](std::uint64_t seed) {
    ResNet<float> net(small_config(seed));
    net.train_one_epoch(imgs, labels);
    net.train_one_epoch(imgs, labels);
    std::vector<float> all;
    net.visit_params([&](Param<float>& p) { all.insert(all.end(), p.value.begin(), p.value.end()); });
    return all;
  };
  EXPECT_EQ(train(3), train(3));
  EXPECT_NE(train(3), train(4));
}

TEST(ResNet, CheckpointRoundTripIsBitExact) {
  const auto imgs = random_images(24, 8, 6, 7);
  std::vector<int> labels(24);
  for (int i = 0; i < 24; ++i) labels[i] = i % 2;
  ResNet<float> net(small_config(9));
  net.train_one_epoch(imgs, labels);
  std::stringstream buf;
  net.save(buf);
  ResNet<float> copy = ResNet<float>::load(buf);

  EXPECT_EQ(copy.predict(imgs), net.predict(imgs));
  const auto pa = net.forward(batch_of(imgs));
  const auto pb = copy.forward(batch_of(imgs));
  EXPECT_EQ(pa, pb);

  // Continued training (shuffle RNG and momentum included) stays in lockstep.
  net.train_one_epoch(imgs, labels);
  copy.train_one_epoch(imgs, labels);
  std::vector<float> va, vb;
  net.visit_params([&](Param<float>& p) { va.insert(va.end(), p.value.begin(), p.value.end()); });
  copy.visit_params([&](Param<float>& p) { vb.insert(vb.end(), p.value.begin(), p.value.end()); });
  EXPECT_EQ(va, vb);
}

TEST(ResNet, CheckpointRejectsGarbage) {
  std::stringstream buf("definitely not a checkpoint");
  EXPECT_THROW(ResNet<float>::load(buf), FormatError);
}

TEST(ResNet, NonFiniteInputNamesLayer) {
  ResNet<float> net(small_config());
  auto imgs = random_images(2, 6, 6, 8);
  imgs[1](2, 3) = std::numeric_limits<float>::quiet_NaN();
  try {
    net.forward(batch_of(imgs));
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("stem"), std::string::npos) << e.what();
  }
}

TEST(ResNet, InputShapeIsFixedAfterFirstUse) {
  ResNet<float> net(small_config());
  net.forward(batch_of(random_images(1, 8, 6, 1)));
  EXPECT_THROW(net.forward(batch_of(random_images(1, 9, 6, 1))), ShapeError);
  Tensor4<float> one_channel(1, 1, 8, 6);
  EXPECT_THROW(net.forward(one_channel), ShapeError);
}

TEST(ResNet, Resnet18ParameterCount) {
  // Standard ResNet-18 has 11,689,512 parameters with a 1000-way head
  // (512*1000 + 1000); a 2-way head replaces that with 512*2 + 2.
  ResNet<float> net(CnnConfig::resnet18());
  EXPECT_EQ(net.parameter_count(), 11689512u - 513000u + 1026u);
}

TEST(ResNet, PresetNames) {
  EXPECT_EQ(CnnConfig::preset("resnet18").stages.size(), 4u);
  EXPECT_EQ(CnnConfig::preset("tiny").stages.size(), 2u);
  EXPECT_THROW(CnnConfig::preset("vgg"), ConfigError);
  CnnConfig c;
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(SssClassifier, LearnsBrightVersusDark) {
  CnnConfig c = small_config(2);
  c.lr = 0.01;
  SssClassifier clf(c);
  std::mt19937_64 rng(1);
  std::normal_distribution<float> g(0, 0.3f);
  auto make_chunk = [&](std::size_t index) {
    ImageChunk chunk;
    chunk.index = index;
    for (int i = 0; i < 64; ++i) {
      const int y = i % 2;
      Image img(8, 8);
      for (Eigen::Index j = 0; j < img.size(); ++j) img.data()[j] = (y ? 1.0f : -1.0f) + g(rng);
      chunk.images.push_back(img);
      chunk.labels.push_back(y);
    }
    return chunk;
  };
  for (std::size_t k = 0; k < 5; ++k) {
    const auto chunk = make_chunk(k);
    clf.partial_fit(chunk, chunk.labels);
  }
  EXPECT_EQ(clf.last_losses().size(), 8u);
  const auto test = make_chunk(9);
  const auto cm = ConfusionMatrix::from_predictions(test.labels, clf.predict(test));
  EXPECT_GE(compute_metrics(cm).bac, 0.9);
}

}  // namespace
}  // namespace sss::cnn
