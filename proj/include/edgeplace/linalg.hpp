#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace edgeplace {

using Vec = std::vector<double>;

/// Dense row-major matrix. Small and value-semantic; everything in this
/// project fits in a few kilobytes.
struct Mat {
  int rows = 0;
  int cols = 0;
  Vec a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  double* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }
};

/// out = m · x
inline void matvec_into(const Mat& m, const double* x, double* out) {
  for (int r = 0; r < m.rows; ++r) {
    const double* row = m.row(r);
    double s = 0.0;
    for (int c = 0; c < m.cols; ++c) s += row[c] * x[c];
    out[r] = s;
  }
}

/// y += mᵀ · g  (backward pass helper)
inline void matvec_transposed_add(const Mat& m, const double* g, double* y) {
  for (int r = 0; r < m.rows; ++r) {
    const double* row = m.row(r);
    for (int c = 0; c < m.cols; ++c) y[c] += row[c] * g[r];
  }
}

/// grad += g ⊗ x
inline void outer_add(Mat& grad, const double* g, const double* x) {
  for (int r = 0; r < grad.rows; ++r) {
    double* row = grad.row(r);
    for (int c = 0; c < grad.cols; ++c) row[c] += g[r] * x[c];
  }
}

}  // namespace edgeplace
