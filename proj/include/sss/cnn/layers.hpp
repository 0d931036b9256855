#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "sss/cnn/tensor.hpp"
#include "sss/error.hpp"

namespace sss::cnn {

/// Trainable array with its gradient and SGD momentum buffer.
template <class T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;
  std::vector<T> velocity;

  Param() = default;
  Param(std::string name_, std::vector<int> shape_) : name(std::move(name_)), shape(std::move(shape_)) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    value.assign(n, T(0));
    grad.assign(n, T(0));
    velocity.assign(n, T(0));
  }
  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

/// Non-trainable state (batch-norm running statistics).
template <class T>
struct Buffer {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
};

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// He-uniform: U(-b, b) with b = sqrt(6 / fan_in).
template <class T>
void he_uniform(Param<T>& p, int fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (T& v : p.value) v = static_cast<T>(dist(rng));
}

/// 2-D cross-correlation without bias, lowered to GEMM through im2col.
template <class T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int padding)
      : weight(std::move(name) + ".weight", {out_channels, in_channels, kernel, kernel}),
        in_(in_channels),
        out_(out_channels),
        k_(kernel),
        stride_(stride),
        pad_(padding) {}

  void init(std::mt19937_64& rng) { he_uniform(weight, in_ * k_ * k_, rng); }

  int out_size(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }

  Tensor4<T> forward(const Tensor4<T>& x) {
    if (x.c != in_) {
      throw ShapeError("conv " + weight.name + ": input " + x.shape_string() + " vs weight (" + std::to_string(out_) +
                       "," + std::to_string(in_) + "," + std::to_string(k_) + "," + std::to_string(k_) + ")");
    }
    const int ho = out_size(x.h), wo = out_size(x.w);
    if (ho < 1 || wo < 1) throw ShapeError("conv " + weight.name + ": input " + x.shape_string() + " too small");
    input_ = x;
    Tensor4<T> y(x.n, out_, ho, wo);
    const Eigen::Index k_rows = static_cast<Eigen::Index>(in_) * k_ * k_;
    const Eigen::Index cols = static_cast<Eigen::Index>(ho) * wo;
    col_.resize(k_rows, cols);
    Eigen::Map<const RowMat<T>> wmat(weight.value.data(), out_, k_rows);
    for (int n = 0; n < x.n; ++n) {
      im2col(x, n, ho, wo);
      Eigen::Map<RowMat<T>> ymat(y.image(n), out_, cols);
      ymat.noalias() = wmat * col_;
    }
    return y;
  }

  /// Accumulates into weight.grad and returns the input gradient.
  Tensor4<T> backward(const Tensor4<T>& dy) {
    const Tensor4<T>& x = input_;
    const int ho = dy.h, wo = dy.w;
    const Eigen::Index k_rows = static_cast<Eigen::Index>(in_) * k_ * k_;
    const Eigen::Index cols = static_cast<Eigen::Index>(ho) * wo;
    Tensor4<T> dx(x.n, x.c, x.h, x.w);
    Eigen::Map<const RowMat<T>> wmat(weight.value.data(), out_, k_rows);
    Eigen::Map<RowMat<T>> gmat(weight.grad.data(), out_, k_rows);
    RowMat<T> dcol(k_rows, cols);
    col_.resize(k_rows, cols);
    for (int n = 0; n < x.n; ++n) {
      Eigen::Map<const RowMat<T>> dymat(dy.image(n), out_, cols);
      im2col(x, n, ho, wo);
      gmat.noalias() += dymat * col_.transpose();
      dcol.noalias() = wmat.transpose() * dymat;
      col2im(dcol, dx, n, ho, wo);
    }
    return dx;
  }

  Param<T> weight;

 private:
  void im2col(const Tensor4<T>& x, int n, int ho, int wo) {
    for (int ci = 0; ci < in_; ++ci) {
      const T* plane = x.data.data() + x.offset(n, ci);
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          T* row = col_.data() + (static_cast<Eigen::Index>(ci * k_ + ky) * k_ + kx) * col_.cols();
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            T* dst = row + static_cast<std::size_t>(oy) * wo;
            if (iy < 0 || iy >= x.h) {
              std::fill(dst, dst + wo, T(0));
              continue;
            }
            const T* src = plane + static_cast<std::size_t>(iy) * x.w;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              dst[ox] = (ix >= 0 && ix < x.w) ? src[ix] : T(0);
            }
          }
        }
      }
    }
  }

  void col2im(const RowMat<T>& dcol, Tensor4<T>& dx, int n, int ho, int wo) const {
    for (int ci = 0; ci < in_; ++ci) {
      T* plane = dx.data.data() + dx.offset(n, ci);
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          const T* row = dcol.data() + (static_cast<Eigen::Index>(ci * k_ + ky) * k_ + kx) * dcol.cols();
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= dx.h) continue;
            T* dst = plane + static_cast<std::size_t>(iy) * dx.w;
            const T* src = row + static_cast<std::size_t>(oy) * wo;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < dx.w) dst[ix] += src[ox];
            }
          }
        }
      }
    }
  }

  int in_ = 0, out_ = 0, k_ = 1, stride_ = 1, pad_ = 0;
  Tensor4<T> input_;
  RowMat<T> col_;
};

enum class Mode { kTrain, kEval };

/// Per-channel batch normalization (eps 1e-5, running-stat momentum 0.1).
/// Train mode with a single-sample batch normalizes with the running
/// statistics instead of batch statistics.
template <class T>
class BatchNorm2d {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, int channels)
      : scale(name + ".scale", {channels}), shift(name + ".shift", {channels}) {
    std::fill(scale.value.begin(), scale.value.end(), T(1));
    running_mean = {name + ".running_mean", {channels}, std::vector<T>(channels, T(0))};
    running_var = {name + ".running_var", {channels}, std::vector<T>(channels, T(1))};
  }

  Tensor4<T> forward(const Tensor4<T>& x, Mode mode, bool update_running = true) {
    const int channels = x.c;
    if (channels != static_cast<int>(scale.size())) {
      throw ShapeError("batchnorm " + scale.name + ": input " + x.shape_string() + " vs " +
                       std::to_string(scale.size()) + " channels");
    }
    batch_stats_ = mode == Mode::kTrain && x.n >= 2;
    const std::size_t plane = x.plane();
    const double m = static_cast<double>(x.n) * static_cast<double>(plane);
    xhat_ = Tensor4<T>(x.n, x.c, x.h, x.w);
    inv_std_.assign(channels, T(0));
    Tensor4<T> y(x.n, x.c, x.h, x.w);
    for (int c = 0; c < channels; ++c) {
      double mean = 0, var = 0;
      if (batch_stats_) {
        for (int n = 0; n < x.n; ++n) {
          const T* p = x.data.data() + x.offset(n, c);
          for (std::size_t i = 0; i < plane; ++i) mean += p[i];
        }
        mean /= m;
        for (int n = 0; n < x.n; ++n) {
          const T* p = x.data.data() + x.offset(n, c);
          for (std::size_t i = 0; i < plane; ++i) {
            const double d = p[i] - mean;
            var += d * d;
          }
        }
        var /= m;
        if (update_running) {
          const double unbiased = m > 1 ? var * m / (m - 1) : var;
          running_mean.value[c] = static_cast<T>((1 - kMomentum) * running_mean.value[c] + kMomentum * mean);
          running_var.value[c] = static_cast<T>((1 - kMomentum) * running_var.value[c] + kMomentum * unbiased);
        }
      } else {
        mean = running_mean.value[c];
        var = running_var.value[c];
      }
      const double inv_std = 1.0 / std::sqrt(var + kEps);
      inv_std_[c] = static_cast<T>(inv_std);
      const T g = scale.value[c], b = shift.value[c];
      for (int n = 0; n < x.n; ++n) {
        const std::size_t off = x.offset(n, c);
        const T* p = x.data.data() + off;
        T* xh = xhat_.data.data() + off;
        T* out = y.data.data() + off;
        for (std::size_t i = 0; i < plane; ++i) {
          xh[i] = static_cast<T>((p[i] - mean) * inv_std);
          out[i] = g * xh[i] + b;
        }
      }
    }
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& dy) {
    const std::size_t plane = dy.plane();
    const double m = static_cast<double>(dy.n) * static_cast<double>(plane);
    Tensor4<T> dx(dy.n, dy.c, dy.h, dy.w);
    for (int c = 0; c < dy.c; ++c) {
      double sum_dy = 0, sum_dy_xhat = 0;
      for (int n = 0; n < dy.n; ++n) {
        const std::size_t off = dy.offset(n, c);
        for (std::size_t i = 0; i < plane; ++i) {
          sum_dy += dy.data[off + i];
          sum_dy_xhat += static_cast<double>(dy.data[off + i]) * xhat_.data[off + i];
        }
      }
      scale.grad[c] += static_cast<T>(sum_dy_xhat);
      shift.grad[c] += static_cast<T>(sum_dy);
      const double g = scale.value[c];
      const double inv_std = inv_std_[c];
      for (int n = 0; n < dy.n; ++n) {
        const std::size_t off = dy.offset(n, c);
        for (std::size_t i = 0; i < plane; ++i) {
          if (batch_stats_) {
            dx.data[off + i] = static_cast<T>(g * inv_std / m *
                                              (m * dy.data[off + i] - sum_dy - xhat_.data[off + i] * sum_dy_xhat));
          } else {
            dx.data[off + i] = static_cast<T>(g * inv_std * dy.data[off + i]);
          }
        }
      }
    }
    return dx;
  }

  Param<T> scale, shift;
  Buffer<T> running_mean, running_var;

 private:
  bool batch_stats_ = false;
  Tensor4<T> xhat_;
  std::vector<T> inv_std_;
};

template <class T>
class ReLU {
 public:
  Tensor4<T> forward(Tensor4<T> x) {
    mask_.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      mask_[i] = x.data[i] > T(0);
      if (x.data[i] <= T(0)) x.data[i] = T(0);  // NaN passes through for the finiteness checks
    }
    return x;
  }
  Tensor4<T> backward(Tensor4<T> dy) const {
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (!mask_[i]) dy.data[i] = T(0);
    }
    return dy;
  }

 private:
  std::vector<bool> mask_;
};

template <class T>
class MaxPool2d {
 public:
  MaxPool2d(int kernel = 3, int stride = 2, int padding = 1) : k_(kernel), stride_(stride), pad_(padding) {}

  Tensor4<T> forward(const Tensor4<T>& x) {
    const int ho = (x.h + 2 * pad_ - k_) / stride_ + 1;
    const int wo = (x.w + 2 * pad_ - k_) / stride_ + 1;
    Tensor4<T> y(x.n, x.c, ho, wo);
    argmax_.assign(y.size(), 0);
    in_n_ = x.n, in_c_ = x.c, in_h_ = x.h, in_w_ = x.w;
    std::size_t o = 0;
    for (int n = 0; n < x.n; ++n) {
      for (int c = 0; c < x.c; ++c) {
        for (int oy = 0; oy < ho; ++oy) {
          for (int ox = 0; ox < wo; ++ox, ++o) {
            T best = -std::numeric_limits<T>::infinity();
            std::size_t arg = x.offset(n, c, std::clamp(oy * stride_ - pad_, 0, x.h - 1),
                                       std::clamp(ox * stride_ - pad_, 0, x.w - 1));
            for (int ky = 0; ky < k_; ++ky) {
              const int iy = oy * stride_ - pad_ + ky;
              if (iy < 0 || iy >= x.h) continue;
              for (int kx = 0; kx < k_; ++kx) {
                const int ix = ox * stride_ - pad_ + kx;
                if (ix < 0 || ix >= x.w) continue;
                const std::size_t idx = x.offset(n, c, iy, ix);
                if (x.data[idx] > best) {
                  best = x.data[idx];
                  arg = idx;
                }
              }
            }
            y.data[o] = best;
            argmax_[o] = arg;
          }
        }
      }
    }
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& dy) const {
    Tensor4<T> dx(in_n_, in_c_, in_h_, in_w_);
    for (std::size_t o = 0; o < dy.size(); ++o) dx.data[argmax_[o]] += dy.data[o];
    return dx;
  }

 private:
  int k_, stride_, pad_;
  int in_n_ = 0, in_c_ = 0, in_h_ = 0, in_w_ = 0;
  std::vector<std::size_t> argmax_;
};

/// Fully connected layer on (n, features) data held as a row-major matrix.
template <class T>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in_features, int out_features)
      : weight(name + ".weight", {out_features, in_features}), bias(name + ".bias", {out_features}) {}

  void init(std::mt19937_64& rng) { he_uniform(weight, weight.shape[1], rng); }

  RowMat<T> forward(const RowMat<T>& x) {
    input_ = x;
    Eigen::Map<const RowMat<T>> w(weight.value.data(), weight.shape[0], weight.shape[1]);
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.value.data(), weight.shape[0]);
    RowMat<T> y = x * w.transpose();
    y.rowwise() += b;
    return y;
  }

  RowMat<T> backward(const RowMat<T>& dy) {
    Eigen::Map<const RowMat<T>> w(weight.value.data(), weight.shape[0], weight.shape[1]);
    Eigen::Map<RowMat<T>> gw(weight.grad.data(), weight.shape[0], weight.shape[1]);
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gb(bias.grad.data(), weight.shape[0]);
    gw.noalias() += dy.transpose() * input_;
    gb += dy.colwise().sum();
    return dy * w;
  }

  Param<T> weight, bias;

 private:
  RowMat<T> input_;
};

}  // namespace sss::cnn
