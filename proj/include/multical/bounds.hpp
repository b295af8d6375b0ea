#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "multical/error.hpp"

// Sample-complexity calculators. Logs are natural logs throughout. Each
// formula is evaluated in double precision and ceiled exactly once, at the
// outermost level.

namespace multical::bounds {

struct FairnessParams {
  double epsilon = 0.1;
  double delta = 0.05;
  double gamma = 0.5;
  double psi = 0.5;
  std::size_t num_groups = 2;
  std::size_t num_labels = 2;

  void validate() const {
    require(epsilon > 0.0 && epsilon < 1.0, "epsilon must be in (0, 1)");
    require(delta > 0.0 && delta < 1.0, "delta must be in (0, 1)");
    require(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0, 1]");
    require(psi > 0.0 && psi <= 1.0, "psi must be in (0, 1]");
    require(num_groups >= 1, "num_groups must be >= 1");
    require(num_labels >= 2, "num_labels must be >= 2");
  }

  double groups_times_labels() const noexcept {
    return static_cast<double>(num_groups) * static_cast<double>(num_labels);
  }
};

/// Group sample complexity m(ε, δ) before ceiling.
using GroupSampleComplexity = std::function<double(double epsilon, double delta)>;

struct BoundResult {
  std::uint64_t samples = 0;
  double unrounded = 0.0;
  std::string formula_id;
  FairnessParams params;
  std::map<std::string, double> constants;  // class-specific inputs echoed back
};

inline std::uint64_t ceil_samples(double value) {
  require(std::isfinite(value) && value >= 0.0, "bound evaluated to a non-finite or negative value");
  const double c = std::ceil(value);
  require(c < 1.8e19, "bound exceeds the 64-bit sample range");
  return static_cast<std::uint64_t>(c);
}

namespace detail {
inline void check_unit_open(double v, const char* name) {
  require(v > 0.0 && v < 1.0, std::string(name) + " must be in (0, 1)");
}
inline BoundResult make_result(double value, std::string id, const FairnessParams& p,
                               std::map<std::string, double> constants = {}) {
  return {ceil_samples(value), value, std::move(id), p, std::move(constants)};
}
}  // namespace detail

/// ε' and δ' at which the ERM (group) sample complexity is evaluated.
struct ErmArguments {
  double epsilon = 0.0;
  double delta = 0.0;
};

inline ErmArguments erm_arguments(const FairnessParams& p) noexcept {
  return {p.psi * p.epsilon / 3.0, p.delta / (4.0 * p.groups_times_labels())};
}

/// Multicalibration sample complexity from a group ERM sample complexity:
///   (2/γ) · m(ψε/3, δ / (4|G||𝒴|)).
/// The caller supplies the worst-group m.
inline BoundResult multicalibration_from_erm(const GroupSampleComplexity& m,
                                             const FairnessParams& p) {
  p.validate();
  require(static_cast<bool>(m), "group sample complexity callable is empty");
  const auto args = erm_arguments(p);
  const double inner = m(args.epsilon, args.delta);
  require(std::isfinite(inner) && inner >= 0.0, "group sample complexity must be finite and >= 0");
  return detail::make_result(2.0 / p.gamma * inner, "main", p);
}

inline BoundResult vc_multicalibration_bound(std::size_t vc_dimension, const FairnessParams& p,
                                             double leading_const = 1.0) {
  p.validate();
  require(vc_dimension >= 1, "VC dimension must be >= 1");
  require(leading_const > 0.0, "leading_const must be > 0");
  const double eps = p.epsilon, psi = p.psi;
  const double value = leading_const *
                       (static_cast<double>(vc_dimension) + std::log(p.groups_times_labels() / p.delta)) /
                       (eps * eps * psi * psi * p.gamma);
  return detail::make_result(value, "vc", p,
                             {{"d_vc", static_cast<double>(vc_dimension)},
                              {"leading_const", leading_const}});
}

// ---------------------------------------------------------------------------
// Kernel SVM (unit-norm hypothesis class, K(x, x) <= B²).

inline double kernel_erm_sample_complexity_raw(double b_sq, double lambda_margin, double epsilon,
                                               double delta) {
  require(b_sq >= 0.0, "B^2 must be >= 0");
  require(lambda_margin > 0.0, "lambda must be > 0");
  detail::check_unit_open(epsilon, "epsilon");
  detail::check_unit_open(delta, "delta");
  const double margin_factor = std::max(1.0, 1.0 / (lambda_margin * lambda_margin));
  return (23.0 * margin_factor * b_sq + 64.0 * std::log(4.0 / delta)) / (epsilon * epsilon);
}

/// ⌈(23·max{1, 1/λ²}·B² + 64·ln(4/δ)) / ε²⌉
inline std::uint64_t kernel_erm_sample_complexity(double b_sq, double lambda_margin,
                                                  double epsilon, double delta) {
  return ceil_samples(kernel_erm_sample_complexity_raw(b_sq, lambda_margin, epsilon, delta));
}

/// ⌈(1152·ln(16|G||𝒴|/δ) + 414·max{1, 1/λ²}·B²) / (γ·ε²·ψ²)⌉
inline BoundResult kernel_multicalibration_bound(double b_sq, double lambda_margin,
                                                 const FairnessParams& p) {
  p.validate();
  require(b_sq >= 0.0, "B^2 must be >= 0");
  require(lambda_margin > 0.0, "lambda must be > 0");
  const double margin_factor = std::max(1.0, 1.0 / (lambda_margin * lambda_margin));
  const double value =
      (1152.0 * std::log(16.0 * p.groups_times_labels() / p.delta) + 414.0 * margin_factor * b_sq) /
      (p.gamma * p.epsilon * p.epsilon * p.psi * p.psi);
  return detail::make_result(value, "kernel", p, {{"b_sq", b_sq}, {"lambda", lambda_margin}});
}

// ---------------------------------------------------------------------------
// Norm-bounded ReLU networks.

struct ReluNormInputs {
  std::size_t d_max = 1;       // widest layer
  double frobenius_x = 0.0;    // ‖X‖_F of the sample matrix
  std::vector<double> spectral;  // s_i = ‖W_i‖_2
  std::vector<double> two_one;   // b_i = ‖W_iᵀ‖_{2,1}

  void validate() const {
    require(d_max >= 1, "d_max must be >= 1");
    require(frobenius_x >= 0.0, "‖X‖_F must be >= 0");
    require(!spectral.empty() && spectral.size() == two_one.size(),
            "spectral and two-one norm lists must be non-empty and of equal length");
    for (double s : spectral) require(s > 0.0, "every spectral norm must be > 0");
    for (double b : two_one) require(b >= 0.0, "every (2,1) norm must be >= 0");
  }

  double spectral_product() const {
    return std::accumulate(spectral.begin(), spectral.end(), 1.0, std::multiplies<>());
  }

  // (Σ_j (b_j / s_j)^{2/3})^{3/2}
  double ratio_term() const {
    double sum = 0.0;
    for (std::size_t j = 0; j < spectral.size(); ++j) sum += std::cbrt(std::pow(two_one[j] / spectral[j], 2.0));
    return std::pow(sum, 1.5);
  }

  // ln(2 d_max)·‖X‖_F·Π s_i·(Σ (b_j/s_j)^{2/3})^{3/2}
  double capacity() const {
    return std::log(2.0 * static_cast<double>(d_max)) * frobenius_x * spectral_product() * ratio_term();
  }
};

namespace detail {
inline void check_relu_precondition(const ReluNormInputs& net) {
  net.validate();
  const double c = net.capacity();
  if (!(c >= 1.0))
    fail(ErrorCode::PreconditionViolated,
         "relu bound precondition violated: ln(2 d_max)·‖X‖_F·Π s·(Σ (b/s)^{2/3})^{3/2} = " +
             std::to_string(c) + " < 1");
}
}  // namespace detail

inline double relu_erm_sample_complexity_raw(const ReluNormInputs& net, double epsilon,
                                             double delta) {
  detail::check_unit_open(epsilon, "epsilon");
  detail::check_unit_open(delta, "delta");
  detail::check_relu_precondition(net);
  const double c = net.capacity();
  return (7200.0 * c * c + 64.0 * std::log(4.0 / delta)) / (epsilon * epsilon);
}

/// ⌈(7200·ln²(2 d_max)·‖X‖_F²·(Π s_i)²·(Σ (b_j/s_j)^{2/3})³ + 64·ln(4/δ)) / ε²⌉
inline std::uint64_t relu_erm_sample_complexity(const ReluNormInputs& net, double epsilon,
                                                double delta) {
  return ceil_samples(relu_erm_sample_complexity_raw(net, epsilon, delta));
}

/// ⌈(129600·ln²(2 d_max)·‖X‖_F²·(Π s_i)²·(Σ (b_j/s_j)^{2/3})³
///   + 1152·ln(16|G||𝒴|/δ)) / (γ·ψ²·ε²)⌉
inline BoundResult relu_multicalibration_bound(const ReluNormInputs& net, const FairnessParams& p) {
  p.validate();
  detail::check_relu_precondition(net);
  const double c = net.capacity();
  const double value = (129600.0 * c * c + 1152.0 * std::log(16.0 * p.groups_times_labels() / p.delta)) /
                       (p.gamma * p.psi * p.psi * p.epsilon * p.epsilon);
  return detail::make_result(value, "relu", p,
                             {{"d_max", static_cast<double>(net.d_max)},
                              {"frobenius_x", net.frobenius_x}});
}

// ---------------------------------------------------------------------------

/// ⌈C·D²·ln(4|G||𝒴|/δ) / (ρ²·γ·ψ·ε)⌉. ε (and ψ) enter to the first power
/// here, unlike the other bounds.
inline BoundResult hard_margin_multicalibration_bound(double diameter, double margin,
                                                      const FairnessParams& p,
                                                      double leading_const = 1.0) {
  p.validate();
  require(diameter > 0.0 && margin > 0.0, "diameter and margin must be > 0");
  require(margin <= diameter, "margin must not exceed the diameter");
  require(leading_const > 0.0, "leading_const must be > 0");
  const double value = leading_const * diameter * diameter *
                       std::log(4.0 * p.groups_times_labels() / p.delta) /
                       (margin * margin * p.gamma * p.psi * p.epsilon);
  return detail::make_result(value, "hard-margin", p,
                             {{"diameter", diameter}, {"margin", margin},
                              {"leading_const", leading_const}});
}

/// Two-sided uniform deviation |L_D(h) − L_S(h)| bound from a Rademacher
/// complexity and a loss bound c:
///   empirical:   2R + 4c·√(2 ln(4/δ) / n)
///   expectation: 2R + c·√(2 ln(2/δ) / n)
inline double two_sided_generalization_gap(double rademacher, double loss_bound, std::size_t n,
                                           double delta, bool empirical_form) {
  require(rademacher >= 0.0, "Rademacher complexity must be >= 0");
  require(loss_bound > 0.0, "loss bound c must be > 0");
  require(n >= 1, "n must be >= 1");
  detail::check_unit_open(delta, "delta");
  const double nn = static_cast<double>(n);
  if (empirical_form) return 2.0 * rademacher + 4.0 * loss_bound * std::sqrt(2.0 * std::log(4.0 / delta) / nn);
  return 2.0 * rademacher + loss_bound * std::sqrt(2.0 * std::log(2.0 / delta) / nn);
}

/// Ratio closeness as a checkable predicate.
///
/// Hypotheses: p1 <= p2, ψ <= p2, |p1 − p̃1| <= ψε/3, |p2 − p̃2| <= ψε/3.
/// Conclusion: |p1/p2 − p̃1/p̃2| <= ε.
enum class RatioCheck { Holds, HypothesesNotMet, ConclusionFails };

struct RatioClosenessInputs {
  double p1, p2, p1_tilde, p2_tilde, psi, epsilon;
};

inline RatioCheck ratio_closeness(const RatioClosenessInputs& in) {
  for (double v : {in.p1, in.p2, in.p1_tilde, in.p2_tilde, in.psi, in.epsilon})
    require(v >= 0.0 && v <= 1.0, "ratio closeness: inputs must lie in [0, 1]");
  const double tol = in.psi * in.epsilon / 3.0;
  const bool hypotheses = in.p1 <= in.p2 && in.psi <= in.p2 && std::abs(in.p1 - in.p1_tilde) <= tol &&
                          std::abs(in.p2 - in.p2_tilde) <= tol;
  if (!hypotheses || in.p2 == 0.0 || in.p2_tilde == 0.0) return RatioCheck::HypothesesNotMet;
  const double gap = std::abs(in.p1 / in.p2 - in.p1_tilde / in.p2_tilde);
  return gap <= in.epsilon ? RatioCheck::Holds : RatioCheck::ConclusionFails;
}

inline bool ratio_closeness_holds(const RatioClosenessInputs& in) {
  return ratio_closeness(in) == RatioCheck::Holds;
}

inline double group_occupancy_threshold_raw(double num_groups, double gamma, double delta) {
  require(num_groups >= 1.0, "num_groups must be >= 1");
  require(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0, 1]");
  detail::check_unit_open(delta, "delta");
  return std::max(8.0 * std::log(num_groups / delta) / gamma, 0.0);
}

/// ⌈8·ln(|Γ|/δ) / γ⌉: sample size past which every group with frequency
/// >= γ receives more than γN/2 samples with probability >= 1 − δ.
inline std::uint64_t group_occupancy_threshold(std::size_t num_groups, double gamma, double delta) {
  return ceil_samples(group_occupancy_threshold_raw(static_cast<double>(num_groups), gamma, delta));
}

}  // namespace multical::bounds
