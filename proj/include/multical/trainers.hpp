#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "multical/dataset.hpp"
#include "multical/linalg.hpp"
#include "multical/model.hpp"
#include "multical/rng.hpp"

namespace multical {

struct LinearSvmConfig {
  double reg_lambda = 1e-4;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
};

struct RbfSvmConfig {
  double gamma = 1.0;  // K(x, x') = exp(−gamma·‖x − x'‖²)
  double reg_lambda = 1e-4;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
};

struct ReluNetConfig {
  std::size_t hidden_units = 1000;
  double learning_rate = 0.01;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  bool zero_init_output = false;
};

/// Per-epoch training objective, recorded when the caller asks for it.
struct TrainTrace {
  std::vector<double> epoch_objective;
};

namespace detail {

// Example order used by every trainer: lexicographic on (features, label).
// Training therefore depends on the multiset of examples and the seed, not on
// the order rows happened to arrive in.
inline std::vector<std::size_t> canonical_order(const LabeledDataset& ds) {
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ea = ds.examples[a];
    const auto& eb = ds.examples[b];
    if (ea.features != eb.features) return ea.features < eb.features;
    return ea.label < eb.label;
  });
  return order;
}

inline void check_trainable(const LabeledDataset& ds) {
  if (ds.empty()) fail(ErrorCode::EmptyDataset, "trainer: empty training set");
  require(ds.dimension() >= 1, "trainer: feature dimension must be >= 1");
  for (const auto& ex : ds.examples)
    require(ex.features.size() == ds.dimension(), "trainer: ragged feature vectors");
}

// Returns the single label if all labels agree, otherwise -1.
inline int sole_label(const LabeledDataset& ds) {
  const int first = ds.examples.front().label;
  for (const auto& ex : ds.examples)
    if (ex.label != first) return -1;
  return first;
}

inline double signed_label(int label) noexcept { return label ? 1.0 : -1.0; }

inline double softplus(double z) noexcept {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear SVM: Pegasos stochastic subgradient descent on
//   λ/2·‖w‖² + mean_i max(0, 1 − y_i·(w·x_i + b)),
// with the bias learned as the weight of a constant feature and the
// projection onto the ball of radius 1/√λ after each step.

inline double linear_svm_objective(const LabeledDataset& ds, const LinearSvmParams& p,
                                   double lambda) {
  double hinge = 0.0;
  for (const auto& ex : ds.examples)
    hinge += std::max(0.0, 1.0 - detail::signed_label(ex.label) * (dot(p.weights, ex.features) + p.bias));
  const double norm_sq = dot(p.weights, p.weights) + p.bias * p.bias;
  return 0.5 * lambda * norm_sq + hinge / static_cast<double>(ds.size());
}

inline PredictorModel train_linear_svm(const LabeledDataset& ds, const LinearSvmConfig& cfg,
                                       TrainTrace* trace = nullptr) {
  detail::check_trainable(ds);
  require(cfg.reg_lambda > 0.0, "linear svm: reg_lambda must be > 0");
  require(cfg.epochs >= 1, "linear svm: epochs must be >= 1");
  if (const int label = detail::sole_label(ds); label >= 0)
    return PredictorModel::constant(label, ds.dimension(), true);

  const std::size_t d = ds.dimension();
  const double lambda = cfg.reg_lambda;
  const double radius = 1.0 / std::sqrt(lambda);
  std::vector<double> w(d + 1, 0.0);  // last entry is the bias
  auto order = detail::canonical_order(ds);
  SplitMix64 rng(derive_seed(cfg.seed, {seed_tag::kModel, 0}));
  std::uint64_t t = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t i : order) {
      ++t;
      const auto& ex = ds.examples[i];
      const double y = detail::signed_label(ex.label);
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double margin = y * (dot(std::span<const double>(w).first(d), ex.features) + w[d]);
      const double shrink = 1.0 - eta * lambda;
      for (auto& v : w) v *= shrink;
      if (margin < 1.0) {
        for (std::size_t j = 0; j < d; ++j) w[j] += eta * y * ex.features[j];
        w[d] += eta * y;
      }
      const double norm = euclidean_norm(w);
      if (norm > radius)
        for (auto& v : w) v *= radius / norm;
    }
    if (trace) {
      LinearSvmParams p{std::vector<double>(w.begin(), w.begin() + d), w[d]};
      trace->epoch_objective.push_back(linear_svm_objective(ds, p, lambda));
    }
  }
  return PredictorModel(LinearSvmParams{std::vector<double>(w.begin(), w.begin() + d), w[d]});
}

// ---------------------------------------------------------------------------
// RBF kernel SVM: kernelized Pegasos. The iterate is w = s·Σ_j c_j Φ(x_j);
// the global scale s absorbs the (1 − ηλ) shrink, and ‖w‖² is tracked
// incrementally so the projection costs nothing extra. The resulting
// predictor is h(x) = Σ_j (s·c_j) K(x_j, x).

namespace detail {

inline double rbf_svm_objective(const LabeledDataset& ds, const RbfSvmParams& p, double lambda,
                                double norm_sq) {
  PredictorModel m(p);
  double hinge = 0.0;
  for (const auto& ex : ds.examples)
    hinge += std::max(0.0, 1.0 - signed_label(ex.label) * m.raw_score(ex.features));
  return 0.5 * lambda * norm_sq + hinge / static_cast<double>(ds.size());
}

}  // namespace detail

inline PredictorModel train_rbf_svm(const LabeledDataset& ds, const RbfSvmConfig& cfg,
                                    TrainTrace* trace = nullptr) {
  detail::check_trainable(ds);
  require(cfg.gamma > 0.0, "rbf svm: gamma must be > 0");
  require(cfg.reg_lambda > 0.0, "rbf svm: reg_lambda must be > 0");
  require(cfg.epochs >= 1, "rbf svm: epochs must be >= 1");
  const std::size_t d = ds.dimension();
  if (const int label = detail::sole_label(ds); label >= 0)
    return PredictorModel(RbfSvmParams{cfg.gamma, Matrix(0, d), {}, label ? 1.0 : -1.0}, true);

  // Work on the canonically ordered copy; "position" below indexes into it.
  const auto canon = detail::canonical_order(ds);
  const std::size_t n = canon.size();
  auto x = [&](std::size_t pos) -> std::span<const double> {
    return ds.examples[canon[pos]].features;
  };
  std::vector<double> y(n);
  for (std::size_t pos = 0; pos < n; ++pos) y[pos] = detail::signed_label(ds.examples[canon[pos]].label);

  const double lambda = cfg.reg_lambda;
  const double radius = 1.0 / std::sqrt(lambda);
  std::vector<double> coef(n, 0.0);
  std::vector<std::size_t> support;  // positions with coef != 0, insertion order
  std::vector<char> is_support(n, 0);
  double scale = 1.0;
  double inner_sq = 0.0;  // ‖Σ c_j Φ(x_j)‖²

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(derive_seed(cfg.seed, {seed_tag::kModel, 1}));
  std::uint64_t t = 0;

  auto export_params = [&] {
    std::vector<std::size_t> kept(support);
    std::sort(kept.begin(), kept.end());
    RbfSvmParams p{cfg.gamma, Matrix(kept.size(), d), {}, 0.0};
    p.coefficients.reserve(kept.size());
    for (std::size_t k = 0; k < kept.size(); ++k) {
      std::copy(x(kept[k]).begin(), x(kept[k]).end(), p.support.row(k).begin());
      p.coefficients.push_back(scale * coef[kept[k]]);
    }
    return p;
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      double u = 0.0;  // Σ c_j K(x_j, x_i)
      for (std::size_t j : support) u += coef[j] * rbf_kernel(x(j), x(i), cfg.gamma);
      const double margin = y[i] * scale * u;

      if (t == 1) {
        // 1 − ηλ = 0 on the first step: the iterate restarts at zero.
        scale = 1.0;
        inner_sq = 0.0;
        u = 0.0;
      } else {
        scale *= 1.0 - 1.0 / static_cast<double>(t);
      }
      if (margin < 1.0) {
        const double step = eta * y[i] / scale;
        inner_sq += 2.0 * step * u + step * step;  // K(x_i, x_i) = 1
        coef[i] += step;
        if (!is_support[i]) {
          is_support[i] = 1;
          support.push_back(i);
        }
      }
      inner_sq = std::max(inner_sq, 0.0);
      const double norm = scale * std::sqrt(inner_sq);
      if (norm > radius) scale *= radius / norm;
    }
    if (trace) {
      const auto p = export_params();
      trace->epoch_objective.push_back(
          detail::rbf_svm_objective(ds, p, lambda, scale * scale * inner_sq));
    }
  }
  return PredictorModel(export_params());
}

// ---------------------------------------------------------------------------
// Two-layer ReLU network trained with mini-batch gradient descent on the
// logistic loss log(1 + exp(−y·h(x))), y ∈ {−1, +1}.

struct ReluLossGradient {
  double loss = 0.0;  // mean over the batch
  ReluNetParams gradient;
};

inline ReluLossGradient relu_loss_and_gradient(const ReluNetParams& p, const LabeledDataset& ds,
                                               std::span<const std::size_t> batch) {
  const std::size_t hidden = p.hidden_units();
  const std::size_t d = p.input_dim();
  ReluLossGradient out;
  out.gradient = ReluNetParams{Matrix(hidden, d), std::vector<double>(hidden, 0.0),
                               std::vector<double>(hidden, 0.0), 0.0};
  if (batch.empty()) return out;
  auto& g = out.gradient;
  std::vector<double> pre(hidden);
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  for (std::size_t i : batch) {
    const auto& ex = ds.examples[i];
    const double y = detail::signed_label(ex.label);
    double f = p.output_bias;
    for (std::size_t h = 0; h < hidden; ++h) {
      pre[h] = dot(p.hidden_weights.row(h), ex.features) + p.hidden_bias[h];
      if (pre[h] > 0.0) f += p.output_weights[h] * pre[h];
    }
    out.loss += detail::softplus(-y * f) * inv_b;
    const double df = -y * detail::sigmoid(-y * f) * inv_b;
    g.output_bias += df;
    for (std::size_t h = 0; h < hidden; ++h) {
      if (pre[h] <= 0.0) continue;
      g.output_weights[h] += df * pre[h];
      const double dpre = df * p.output_weights[h];
      g.hidden_bias[h] += dpre;
      auto row = g.hidden_weights.row(h);
      for (std::size_t j = 0; j < d; ++j) row[j] += dpre * ex.features[j];
    }
  }
  return out;
}

inline ReluNetParams init_relu_params(std::size_t input_dim, const ReluNetConfig& cfg) {
  SplitMix64 rng(derive_seed(cfg.seed, {seed_tag::kModel, 2}));
  const double a1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double a2 = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_units));
  ReluNetParams p{Matrix(cfg.hidden_units, input_dim), std::vector<double>(cfg.hidden_units),
                  std::vector<double>(cfg.hidden_units), 0.0};
  for (auto& v : p.hidden_weights.data()) v = rng.uniform(-a1, a1);
  for (auto& v : p.hidden_bias) v = rng.uniform(-a1, a1);
  if (cfg.zero_init_output) {
    std::fill(p.output_weights.begin(), p.output_weights.end(), 0.0);
  } else {
    for (auto& v : p.output_weights) v = rng.uniform(-a2, a2);
    p.output_bias = rng.uniform(-a2, a2);
  }
  return p;
}

inline PredictorModel train_relu_net(const LabeledDataset& ds, const ReluNetConfig& cfg,
                                     TrainTrace* trace = nullptr) {
  detail::check_trainable(ds);
  require(cfg.hidden_units >= 1, "relu net: hidden_units must be >= 1");
  require(cfg.learning_rate > 0.0, "relu net: learning_rate must be > 0");
  require(cfg.epochs >= 1 && cfg.batch_size >= 1, "relu net: epochs and batch_size must be >= 1");
  const std::size_t d = ds.dimension();
  if (const int label = detail::sole_label(ds); label >= 0) {
    ReluNetParams p{Matrix(1, d), {0.0}, {0.0}, label ? 1.0 : -1.0};
    return PredictorModel(std::move(p), true);
  }

  auto p = init_relu_params(d, cfg);
  auto order = detail::canonical_order(ds);
  SplitMix64 rng(derive_seed(cfg.seed, {seed_tag::kModel, 3}));

  auto apply = [&](const ReluNetParams& g) {
    auto& w = p.hidden_weights.data();
    const auto& gw = g.hidden_weights.data();
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= cfg.learning_rate * gw[k];
    for (std::size_t h = 0; h < p.hidden_units(); ++h) {
      p.hidden_bias[h] -= cfg.learning_rate * g.hidden_bias[h];
      p.output_weights[h] -= cfg.learning_rate * g.output_weights[h];
    }
    p.output_bias -= cfg.learning_rate * g.output_bias;
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const auto batch = std::span<const std::size_t>(order).subspan(start, len);
      const auto step = relu_loss_and_gradient(p, ds, batch);
      if (!std::isfinite(step.loss))
        fail(ErrorCode::NonFiniteLoss, "relu net: loss diverged in epoch " +
                                           std::to_string(epoch + 1) +
                                           "; lower the learning rate");
      epoch_loss += step.loss * static_cast<double>(len);
      apply(step.gradient);
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss))
      fail(ErrorCode::NonFiniteLoss, "relu net: loss diverged; lower the learning rate");
    if (trace) trace->epoch_objective.push_back(epoch_loss);
  }
  return PredictorModel(std::move(p));
}

// ---------------------------------------------------------------------------

/// Per-layer norms of a ReLU network's weight matrices W_1 (hidden × d) and
/// W_2 (1 × hidden). Biases are not part of the norm-bounded class.
struct NetworkNorms {
  std::vector<double> spectral;  // ‖W_i‖_2
  std::vector<double> two_one;   // ‖W_iᵀ‖_{2,1}
};

inline NetworkNorms weight_norms(const PredictorModel& model) {
  require(model.kind() == ModelKind::ReluNet, "weight_norms: model is not a relu network");
  const auto& p = model.as<ReluNetParams>();
  const Matrix output(1, p.hidden_units(), p.output_weights);
  NetworkNorms norms;
  for (const Matrix* w : {&p.hidden_weights, &output}) {
    norms.spectral.push_back(spectral_norm(*w));
    norms.two_one.push_back(two_one_norm(*w));
  }
  return norms;
}

inline double accuracy(const PredictorModel& model, const LabeledDataset& ds) {
  if (ds.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : ds.examples) hits += model.predict(ex.features) == ex.label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

/// min |raw_score| over a dataset: a post-hoc measurement of the margin λ.
inline double min_abs_score(const PredictorModel& model, const LabeledDataset& ds) {
  require(!ds.empty(), "min_abs_score: empty dataset");
  double best = std::abs(model.raw_score(ds.examples.front().features));
  for (const auto& ex : ds.examples) best = std::min(best, std::abs(model.raw_score(ex.features)));
  return best;
}

}  // namespace multical
