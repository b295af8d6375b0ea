#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "multical/bounds.hpp"
#include "multical/dataset.hpp"
#include "multical/linalg.hpp"
#include "multical/model.hpp"
#include "multical/rng.hpp"

namespace multical {

/// Symmetric Gram matrix with B² = max diagonal entry.
class KernelMatrix {
 public:
  KernelMatrix() = default;
  explicit KernelMatrix(Matrix entries) : entries_(std::move(entries)) {
    require(entries_.rows() == entries_.cols(), "kernel matrix must be square");
    for (std::size_t i = 0; i < size(); ++i) {
      require(entries_(i, i) >= 0.0, "kernel matrix diagonal must be non-negative");
      b_sq_ = std::max(b_sq_, entries_(i, i));
      for (std::size_t j = 0; j < i; ++j)
        require(std::abs(entries_(i, j) - entries_(j, i)) <= 1e-12, "kernel matrix must be symmetric");
    }
  }

  std::size_t size() const noexcept { return entries_.rows(); }
  double b_sq() const noexcept { return b_sq_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return entries_(i, j); }
  const Matrix& entries() const noexcept { return entries_; }

 private:
  Matrix entries_;
  double b_sq_ = 0.0;
};

/// RBF Gram matrix exp(−gamma·‖x_i − x_j‖²). Points are first put in
/// lexicographic order; Rademacher estimates over the result are therefore
/// identical, bit for bit, under any reordering of the dataset rows.
inline KernelMatrix build_rbf_kernel_matrix(const LabeledDataset& ds, double gamma) {
  require(gamma > 0.0, "rbf kernel: gamma must be > 0");
  std::vector<const std::vector<double>*> points;
  points.reserve(ds.size());
  for (const auto& ex : ds.examples) points.push_back(&ex.features);
  std::stable_sort(points.begin(), points.end(), [](auto* a, auto* b) { return *a < *b; });
  const std::size_t n = points.size();
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double v = rbf_kernel(*points[i], *points[j], gamma);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return KernelMatrix(std::move(k));
}

struct RademacherEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t draws = 0;  // sign vectors averaged over (2^N in exact mode)
  bool exact = false;
};

inline constexpr std::size_t kExactRademacherMaxN = 20;
inline constexpr std::uint64_t kDefaultRademacherDraws = 200;

namespace detail {

// σᵀKσ for a ±1 vector σ.
inline double sign_quadratic_form(const KernelMatrix& k, std::span<const double> sigma) {
  double q = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < k.size(); ++j) row += k(i, j) * sigma[j];
    q += sigma[i] * row;
  }
  return q;
}

inline double sup_value(const KernelMatrix& k, std::span<const double> sigma) {
  const double q = sign_quadratic_form(k, sigma);
  if (q < -1e-9)
    fail(ErrorCode::NonPsdNegative,
         "kernel matrix is not positive semidefinite: sigma^T K sigma = " + std::to_string(q));
  return std::sqrt(std::max(q, 0.0)) / static_cast<double>(k.size());
}

// Sign i of draw `draw` comes from a counter-based stream: word w of draw d is
// mix64(derive_seed(seed, {sigma, d}) + w). No state is carried between
// draws, so any partition of the draws gives the same signs.
inline void fill_sigma(std::uint64_t seed, std::uint64_t draw, std::span<double> sigma) {
  const std::uint64_t base = derive_seed(seed, {seed_tag::kSigma, draw});
  for (std::size_t w = 0; w * 64 < sigma.size(); ++w) {
    const std::uint64_t bits = mix64(base + w);
    for (std::size_t b = 0; b < 64 && w * 64 + b < sigma.size(); ++b)
      sigma[w * 64 + b] = (bits >> b) & 1u ? 1.0 : -1.0;
  }
}

}  // namespace detail

/// Empirical Rademacher complexity of the unit-norm kernel class
/// { x ↦ ⟨w, Φ(x)⟩ : ‖w‖ <= 1 }, whose supremum over w is (1/N)·√(σᵀKσ).
///
/// exact = true enumerates all 2^N sign vectors (N <= 20); std_error is then 0.
/// Otherwise the mean is over `draws` i.i.d. uniform sign vectors and
/// std_error = sample std / √draws.
inline RademacherEstimate kernel_rademacher_exact_sup(const KernelMatrix& k, std::uint64_t draws,
                                                      std::uint64_t seed, bool exact) {
  const std::size_t n = k.size();
  require(n >= 1, "rademacher: kernel matrix is empty");
  std::vector<double> sigma(n);
  RademacherEstimate est;
  if (exact) {
    require(n <= kExactRademacherMaxN, "rademacher: exact mode needs N <= 20");
    // σ and −σ give the same value; enumerate with σ_{N−1} = +1 and weight 2.
    const std::uint64_t half = std::uint64_t{1} << (n - 1);
    double sum = 0.0;
    for (std::uint64_t bits = 0; bits < half; ++bits) {
      for (std::size_t i = 0; i + 1 < n; ++i) sigma[i] = (bits >> i) & 1u ? 1.0 : -1.0;
      sigma[n - 1] = 1.0;
      sum += detail::sup_value(k, sigma);
    }
    est.mean = sum / static_cast<double>(half);
    est.draws = half * 2;
    est.exact = true;
    return est;
  }
  require(draws >= 1, "rademacher: draws must be >= 1");
  double sum = 0.0, sum_sq = 0.0;
  for (std::uint64_t d = 0; d < draws; ++d) {
    detail::fill_sigma(seed, d, sigma);
    const double v = detail::sup_value(k, sigma);
    sum += v;
    sum_sq += v * v;
  }
  const double m = static_cast<double>(draws);
  est.mean = sum / m;
  if (draws > 1) {
    const double var = std::max(0.0, (sum_sq - m * est.mean * est.mean) / (m - 1.0));
    est.std_error = std::sqrt(var / m);
  }
  est.draws = draws;
  return est;
}

/// Exact enumeration when N <= 20, Monte Carlo otherwise.
inline RademacherEstimate kernel_rademacher_exact_sup(const KernelMatrix& k,
                                                      std::uint64_t draws = kDefaultRademacherDraws,
                                                      std::uint64_t seed = 0) {
  return kernel_rademacher_exact_sup(k, draws, seed, k.size() <= kExactRademacherMaxN);
}

/// √(23·e·B² / (22·n))
inline double kernel_rademacher_closed_form_bound(double b_sq, std::size_t n) {
  require(n >= 1, "n must be >= 1");
  require(b_sq >= 0.0, "B^2 must be >= 0");
  return std::sqrt(23.0 * std::numbers::e * b_sq / (22.0 * static_cast<double>(n)));
}

/// 4/n^{3/2} + (26·ln n·ln(2 d_max)/n)·‖X‖_F·Π s_i·(Σ (b_j/s_j)^{2/3})^{3/2}
inline double relu_rademacher_closed_form_bound(std::size_t n, const bounds::ReluNormInputs& net) {
  require(n >= 2, "n must be >= 2");
  net.validate();
  const double nn = static_cast<double>(n);
  return 4.0 / std::pow(nn, 1.5) +
         26.0 * std::log(nn) * std::log(2.0 * static_cast<double>(net.d_max)) / nn * net.frobenius_x *
             net.spectral_product() * net.ratio_term();
}

}  // namespace multical
