#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "msnn/errors.hpp"

namespace msnn {

/// Dense row-major matrix of doubles. Vectors are (n,1), scalars (1,1).
struct Tensor {
  int rows = 0;
  int cols = 1;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }
  static Tensor vec(std::initializer_list<double> v) {
    Tensor t(static_cast<int>(v.size()), 1);
    t.data.assign(v.begin(), v.end());
    return t;
  }
  static Tensor vec(std::span<const double> v) {
    Tensor t(static_cast<int>(v.size()), 1);
    t.data.assign(v.begin(), v.end());
    return t;
  }

  int size() const { return rows * cols; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  double& operator()(int i, int j = 0) { return data[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j = 0) const { return data[static_cast<size_t>(i) * cols + j]; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

}  // namespace msnn
