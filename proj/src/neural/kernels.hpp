#pragma once

// Dense helpers over raw row-major storage. Sizes are trusted.

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace parg::neural::kernels {

/// y += W x, W is rows x cols.
inline void gemv_acc(double* y, const double* w, const double* x, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* row = w + static_cast<std::size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

/// x += W^T y.
inline void gemv_t_acc(double* x, const double* w, const double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double yr = y[r];
    if (yr == 0.0) continue;
    const double* row = w + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) x[c] += row[c] * yr;
  }
}

/// G += y x^T.
inline void ger_acc(double* g, const double* y, const double* x, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double yr = y[r];
    if (yr == 0.0) continue;
    double* row = g + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) row[c] += yr * x[c];
  }
}

inline double dot(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

inline double sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// In-place softmax.
inline void softmax(double* v, int n) {
  double m = v[0];
  for (int i = 1; i < n; ++i) m = std::max(m, v[i]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    v[i] = std::exp(v[i] - m);
    sum += v[i];
  }
  for (int i = 0; i < n; ++i) v[i] /= sum;
}

}  // namespace parg::neural::kernels
