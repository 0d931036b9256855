#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sss/cnn/resnet.hpp"

namespace sss::cnn {

struct GradientCheckResult {
  double max_relative_error = 0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

/// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps entries
/// whose true gradient is ~0 from dividing roundoff noise by roundoff noise.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares every analytic parameter gradient of a double-precision model
/// with central differences (step h) of the train-mode batch loss. Running
/// statistics are frozen for the duration.
inline GradientCheckResult gradient_check(ResNet<double>& model, const Tensor4<double>& x, std::span<const int> labels,
                                          double h = 1e-5) {
  model.zero_grad();
  model.loss_and_backward(x, labels, true, 1.0, false);
  GradientCheckResult result;
  model.visit_params([&](Param<double>& p) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + h;
      const double up = model.loss_and_backward(x, labels, false, 1.0, false);
      p.value[i] = saved - h;
      const double down = model.loss_and_backward(x, labels, false, 1.0, false);
      p.value[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double err = relative_error(p.grad[i], numeric);
      ++result.checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = p.name + "[" + std::to_string(i) + "]";
      }
    }
  });
  return result;
}

/// Builds a model from `config` (forced to double) and checks it on a random
/// batch of two height x width images.
inline GradientCheckResult gradient_check(const CnnConfig& config, int height, int width, std::uint64_t seed = 7) {
  ResNet<double> model(config);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor4<double> x(2, ResNet<double>::kInputChannels, height, width);
  // Channel-replicated input, as the network sees real images.
  for (int n = 0; n < 2; ++n) {
    for (int i = 0; i < height * width; ++i) {
      const double v = normal(rng);
      for (int c = 0; c < x.c; ++c) x.data[x.offset(n, c) + i] = v;
    }
  }
  std::vector<int> labels{0, 1 % config.n_classes};
  return gradient_check(model, x, labels);
}

}  // namespace sss::cnn
