#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "multical/error.hpp"
#include "multical/rng.hpp"

namespace multical {

/// Dense row-major matrix. Only what the trainers and norm computations need.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_, "matrix: data size does not match shape");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double euclidean_norm(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

inline double frobenius_norm(const Matrix& m) noexcept { return euclidean_norm(m.data()); }

/// ‖Wᵀ‖_{2,1}: the sum over rows of W of each row's Euclidean norm.
inline double two_one_norm(const Matrix& w) noexcept {
  double total = 0.0;
  for (std::size_t r = 0; r < w.rows(); ++r) total += euclidean_norm(w.row(r));
  return total;
}

/// Largest singular value by power iteration on WᵀW.
///
/// The start vector is pseudo-random from a fixed seed so the result is
/// reproducible. Iteration stops when successive estimates agree to
/// `rel_tol` or after `max_iter` steps.
inline double spectral_norm(const Matrix& w, double rel_tol = 1e-8, int max_iter = 1000) {
  const std::size_t n = w.cols();
  if (n == 0 || w.rows() == 0) return 0.0;
  SplitMix64 rng(derive_seed(0, {seed_tag::kPowerIteration}));
  std::vector<double> v(n), wv(w.rows()), next(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  double norm_v = euclidean_norm(v);
  if (norm_v == 0.0) return 0.0;
  for (auto& x : v) x /= norm_v;

  double sigma = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    for (std::size_t r = 0; r < w.rows(); ++r) wv[r] = dot(w.row(r), v);
    const double estimate = euclidean_norm(wv);
    if (estimate == 0.0) return 0.0;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const auto row = w.row(r);
      for (std::size_t c = 0; c < n; ++c) next[c] += row[c] * wv[r];
    }
    const double norm_next = euclidean_norm(next);
    if (norm_next == 0.0) return estimate;
    for (std::size_t c = 0; c < n; ++c) v[c] = next[c] / norm_next;
    const bool converged = it > 0 && std::abs(estimate - sigma) <= rel_tol * estimate;
    sigma = estimate;
    if (converged) break;
  }
  return sigma;
}

}  // namespace multical
