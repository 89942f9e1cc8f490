// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sinn/error.hpp"

namespace sinn {

using Vector = std::vector<double>;
using BinaryVec = std::vector<std::uint8_t>;  // per-label 0/1 targets

/// Dense row-major matrix of doubles.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

  double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  bool operator==(const Matrix&) const = default;
};

/// Boolean connectivity matrix, same layout as Matrix.
struct Mask {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int r, int c, bool fill = false)
      : rows(r),
        cols(c),
        data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill ? 1 : 0) {}

  std::uint8_t& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  bool at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j] != 0; }

  bool row_any(int i) const {
    for (int j = 0; j < cols; ++j)
      if (at(i, j)) return true;
    return false;
  }

  Mask transposed() const {
    Mask t(cols, rows);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) t.at(j, i) = at(i, j) ? 1 : 0;
    return t;
  }

  bool operator==(const Mask&) const = default;
};

namespace detail {
inline void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}
}  // namespace detail

/// w * x
inline Vector matvec(const Matrix& w, const Vector& x) {
  detail::require(w.cols == static_cast<int>(x.size()), "matvec: " + std::to_string(w.rows) + "x" +
                                                            std::to_string(w.cols) +
                                                            " vs vector of length " +
                                                            std::to_string(x.size()));
  Vector y(w.rows, 0.0);
  for (int i = 0; i < w.rows; ++i) {
    double acc = 0.0;
    const double* row = w.data.data() + static_cast<std::size_t>(i) * w.cols;
    for (int j = 0; j < w.cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
  return y;
}

/// w^T * v
inline Vector matvec_transposed(const Matrix& w, const Vector& v) {
  detail::require(w.rows == static_cast<int>(v.size()),
                  "matvec_transposed: " + std::to_string(w.rows) + "x" + std::to_string(w.cols) +
                      " vs vector of length " + std::to_string(v.size()));
  Vector y(w.cols, 0.0);
  for (int i = 0; i < w.rows; ++i) {
    const double vi = v[i];
    const double* row = w.data.data() + static_cast<std::size_t>(i) * w.cols;
    for (int j = 0; j < w.cols; ++j) y[j] += row[j] * vi;
  }
  return y;
}

/// w * x + b
inline Vector affine(const Matrix& w, const Vector& x, const Vector& b) {
  detail::require(w.rows == static_cast<int>(b.size()),
                  "affine: " + std::to_string(w.rows) + " rows vs bias of length " +
                      std::to_string(b.size()));
  Vector y = matvec(w, x);
  for (int i = 0; i < w.rows; ++i) y[i] += b[i];
  return y;
}

/// (w gated by mask) * x. Entries at false mask positions contribute exactly
/// zero no matter what value the matrix stores there.
inline Vector masked_matvec(const Matrix& w, const Mask& mask, const Vector& x) {
  detail::require(w.rows == mask.rows && w.cols == mask.cols, "masked_matvec: matrix/mask shape mismatch");
  detail::require(w.cols == static_cast<int>(x.size()), "masked_matvec: dimension mismatch");
  Vector y(w.rows, 0.0);
  for (int i = 0; i < w.rows; ++i) {
    double acc = 0.0;
    const double* row = w.data.data() + static_cast<std::size_t>(i) * w.cols;
    const std::uint8_t* gate = mask.data.data() + static_cast<std::size_t>(i) * w.cols;
    for (int j = 0; j < w.cols; ++j)
      if (gate[j]) acc += row[j] * x[j];
    y[i] = acc;
  }
  return y;
}

/// (w gated by mask)^T * v, same contribution rule as masked_matvec.
inline Vector masked_matvec_transposed(const Matrix& w, const Mask& mask, const Vector& v) {
  detail::require(w.rows == mask.rows && w.cols == mask.cols,
                  "masked_matvec_transposed: matrix/mask shape mismatch");
  detail::require(w.rows == static_cast<int>(v.size()),
                  "masked_matvec_transposed: dimension mismatch");
  Vector y(w.cols, 0.0);
  for (int i = 0; i < w.rows; ++i) {
    const double vi = v[i];
    const double* row = w.data.data() + static_cast<std::size_t>(i) * w.cols;
    const std::uint8_t* gate = mask.data.data() + static_cast<std::size_t>(i) * w.cols;
    for (int j = 0; j < w.cols; ++j)
      if (gate[j]) y[j] += row[j] * vi;
  }
  return y;
}

/// Zeroes every entry of w at a false mask position.
inline void apply_mask(Matrix& w, const Mask& mask) {
  detail::require(w.rows == mask.rows && w.cols == mask.cols, "apply_mask: shape mismatch");
  for (std::size_t i = 0; i < w.data.size(); ++i)
    if (!mask.data[i]) w.data[i] = 0.0;
}

/// acc += u * v^T
inline void add_outer(Matrix& acc, const Vector& u, const Vector& v) {
  detail::require(acc.rows == static_cast<int>(u.size()) && acc.cols == static_cast<int>(v.size()),
                  "add_outer: dimension mismatch");
  for (int i = 0; i < acc.rows; ++i) {
    double* row = acc.data.data() + static_cast<std::size_t>(i) * acc.cols;
    const double ui = u[i];
    for (int j = 0; j < acc.cols; ++j) row[j] += ui * v[j];
  }
}

/// Numerically stable logistic function; never under- or overflows for finite input.
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline Vector sigmoid(const Vector& z) {
  Vector y(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) y[i] = sigmoid(z[i]);
  return y;
}

inline double relu(double z) { return z > 0.0 ? z : 0.0; }

inline Vector relu(const Vector& z) {
  Vector y(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) y[i] = relu(z[i]);
  return y;
}

/// Flat view over one tensor's storage, for whole-model reductions.
struct TensorView {
  double* data = nullptr;
  std::size_t len = 0;
};

/// Scales all tensors in place so the global L2 norm does not exceed the
/// threshold. Returns the factor applied (1.0 when no clipping happened).
inline double clip_global_norm(std::span<const TensorView> grads, double threshold) {
  if (!(threshold > 0.0)) throw Error("clip_global_norm: threshold must be positive");
  double sum_sq = 0.0;
  for (const TensorView& t : grads)
    for (std::size_t i = 0; i < t.len; ++i) sum_sq += t.data[i] * t.data[i];
  const double norm = std::sqrt(sum_sq);
  if (norm <= threshold) return 1.0;
  const double scale = threshold / norm;
  for (const TensorView& t : grads)
    for (std::size_t i = 0; i < t.len; ++i) t.data[i] *= scale;
  return scale;
}

}  // namespace sinn
