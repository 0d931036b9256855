#pragma once

#include <Eigen/SVD>
#include <algorithm>

#include "sss/error.hpp"
#include "sss/types.hpp"

namespace sss::text {

/// Principal component projection fitted once and then frozen.
class PcaModel {
 public:
  explicit PcaModel(Eigen::Index n_components = 100) : requested_(n_components) {}

  /// Components are the top right singular vectors of the centered data,
  /// in descending singular-value order. Each component's sign is fixed so
  /// that its largest-magnitude entry is positive.
  void fit(const Matrix& x) {
    if (x.rows() == 0 || x.cols() == 0) throw ShapeError("pca fit on empty matrix");
    mean_ = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - mean_.transpose();
    const Eigen::Index p = std::min({requested_, x.cols(), x.rows()});
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    components_ = svd.matrixV().leftCols(p).transpose();
    singular_values_ = svd.singularValues();
    for (Eigen::Index r = 0; r < p; ++r) {
      Eigen::Index arg = 0;
      components_.row(r).cwiseAbs().maxCoeff(&arg);
      if (components_(r, arg) < 0) components_.row(r) *= -1.0;
    }
    fitted_ = true;
  }

  Matrix transform(const Matrix& x) const {
    if (!fitted_) throw StateError("pca transform called before fit");
    if (x.cols() != mean_.size()) {
      throw ShapeError("pca transform: expected " + std::to_string(mean_.size()) + " columns, got " +
                       std::to_string(x.cols()));
    }
    return (x.rowwise() - mean_.transpose()) * components_.transpose();
  }

  bool fitted() const { return fitted_; }
  Eigen::Index n_components() const { return components_.rows(); }
  const Vector& mean() const { return mean_; }
  const Matrix& components() const { return components_; }
  /// All singular values of the centered fit matrix, descending.
  const Vector& singular_values() const { return singular_values_; }

 private:
  Eigen::Index requested_;
  bool fitted_ = false;
  Vector mean_;
  Matrix components_;
  Vector singular_values_;
};

}  // namespace sss::text
