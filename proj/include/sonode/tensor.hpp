#pragma once

// Dense row-major tensors and the handful of linear-algebra and activation
// kernels the rest of the library is built on. Everything is double precision.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sonode/errors.hpp"

namespace sonode {

class Tensor {
 public:
  Tensor() = default;

  /// Zero-filled tensor of the given shape.
  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (count(shape_) != data_.size()) {
      throw DimensionError("tensor shape " + shape_string(shape_) + " holds " +
                           std::to_string(count(shape_)) + " values, got " +
                           std::to_string(data_.size()));
    }
  }

  static Tensor vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
  }

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("ragged rows in Tensor::from_rows");
      values.insert(values.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(values));
  }

  static Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  static Tensor filled(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// Rows of a matrix; a rank-1 tensor is treated as a column.
  std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const noexcept {
    if (shape_.size() < 2) return shape_.empty() ? 0 : 1;
    return data_.size() / shape_[0];
  }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols(), cols()}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols(), cols()}; }

  Tensor reshaped(std::vector<std::size_t> shape) const { return Tensor(std::move(shape), data_); }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

  static std::size_t count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }

  static std::string shape_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Elementwise helpers

inline Tensor operator+(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw DimensionError("shape mismatch in +");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

inline Tensor operator-(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw DimensionError("shape mismatch in -");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

inline Tensor operator*(double s, const Tensor& a) {
  Tensor out = a;
  for (auto& v : out.values()) v *= s;
  return out;
}

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("length mismatch in max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// ||a-b|| / max(||a||, ||b||); zero when both vectors vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("length mismatch in relative_error");
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
  const double scale = std::max(norm2(a), norm2(b));
  if (scale == 0.0) return 0.0;
  return std::sqrt(diff) / scale;
}

// ---------------------------------------------------------------------------
// Linear algebra

inline Tensor matvec(const Tensor& a, const Tensor& x) {
  if (a.rank() != 2) throw DimensionError("matvec expects a matrix, got " + Tensor::shape_string(a.shape()));
  if (x.rank() != 1 || x.size() != a.cols()) {
    throw DimensionError("matvec: matrix " + Tensor::shape_string(a.shape()) + " vs vector " +
                         Tensor::shape_string(x.shape()));
  }
  Tensor y({a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

inline Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose expects a matrix");
  Tensor t({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw DimensionError("matmul: " + Tensor::shape_string(a.shape()) + " x " +
                         Tensor::shape_string(b.shape()));
  }
  Tensor c({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

/// Pivots smaller than this are treated as exact zeros.
inline constexpr double kSingularPivot = 1e-13;

/// Solves A X = B by Gaussian elimination with partial pivoting.
/// B may be a vector or a matrix with A.rows() rows.
inline Tensor solve(Tensor a, Tensor b) {
  if (a.rank() != 2 || a.rows() != a.cols()) throw DimensionError("solve: square matrix required");
  const std::size_t n = a.rows();
  if (b.rows() != n) throw DimensionError("solve: right-hand side has wrong row count");
  const std::size_t m = b.cols();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    if (std::abs(a(piv, k)) < kSingularPivot) {
      throw SingularityError("singular system: pivot " + std::to_string(std::abs(a(piv, k))) +
                             " in column " + std::to_string(k));
    }
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      for (std::size_t j = 0; j < m; ++j) std::swap(b[k * m + j], b[piv * m + j]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
      for (std::size_t j = 0; j < m; ++j) b[i * m + j] -= f * b[k * m + j];
    }
  }
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = b[ii * m + j];
      for (std::size_t k = ii + 1; k < n; ++k) s -= a(ii, k) * b[k * m + j];
      b[ii * m + j] = s / a(ii, ii);
    }
  }
  return b;
}

inline constexpr double kDefaultRidge = 1e-10;

/// Left pseudo-inverse (A^T A + ridge I)^{-1} A^T of an m x n matrix, m >= n.
inline Tensor pinv_left(const Tensor& a, double ridge = kDefaultRidge) {
  if (a.rank() != 2) throw DimensionError("pinv_left expects a matrix");
  if (a.rows() < a.cols()) {
    throw DimensionError("pinv_left needs rows >= cols, got " + Tensor::shape_string(a.shape()));
  }
  const Tensor at = transpose(a);
  Tensor gram = matmul(at, a);
  for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) += ridge;
  return solve(std::move(gram), at);
}

// ---------------------------------------------------------------------------
// Activations (ELU with alpha = 1)

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
inline double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }
inline double tanh_act(double x) { return std::tanh(x); }
inline double tanh_grad(double x) {
  const double t = std::tanh(x);
  return 1.0 - t * t;
}

namespace detail {
template <class F>
Tensor map(const Tensor& x, F f) {
  Tensor out = x;
  for (auto& v : out.values()) v = f(v);
  return out;
}
}  // namespace detail

inline Tensor elu(const Tensor& x) { return detail::map(x, [](double v) { return elu(v); }); }
inline Tensor elu_grad(const Tensor& x) { return detail::map(x, [](double v) { return elu_grad(v); }); }
inline Tensor tanh(const Tensor& x) { return detail::map(x, [](double v) { return tanh_act(v); }); }
inline Tensor tanh_grad(const Tensor& x) { return detail::map(x, [](double v) { return tanh_grad(v); }); }

}  // namespace sonode
