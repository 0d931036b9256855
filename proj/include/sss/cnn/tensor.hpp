#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "sss/error.hpp"

namespace sss::cnn {

/// Dense NCHW tensor.
template <class T>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t offset(int in, int ic, int iy = 0, int ix = 0) const {
    return ((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix;
  }
  T& at(int in, int ic, int iy, int ix) { return data[offset(in, ic, iy, ix)]; }
  const T& at(int in, int ic, int iy, int ix) const { return data[offset(in, ic, iy, ix)]; }
  T* image(int in) { return data.data() + offset(in, 0); }
  const T* image(int in) const { return data.data() + offset(in, 0); }

  bool same_shape(const Tensor4& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
  std::string shape_string() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
  }
  bool all_finite() const {
    for (const T& v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

}  // namespace sss::cnn
