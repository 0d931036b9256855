#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace sss {

/// Dense row-major feature matrix: one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Single-channel sentence-space image, H rows (resampled words) by W columns (embedding dims).
using Image = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Labels = std::vector<int>;

struct Sample {
  std::string text;
  int label = 0;

  bool operator==(const Sample&) const = default;
};

}  // namespace sss
