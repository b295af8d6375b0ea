#pragma once

#include <cmath>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "multical/error.hpp"
#include "multical/linalg.hpp"

namespace multical {

enum class ModelKind { LinearSvm, RbfSvm, ReluNet };

constexpr std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::LinearSvm: return "linear_svm";
    case ModelKind::RbfSvm: return "rbf_svm";
    case ModelKind::ReluNet: return "relu_net";
  }
  return "unknown";
}

inline ModelKind parse_model_kind(std::string_view text) {
  if (text == "linear_svm" || text == "linear") return ModelKind::LinearSvm;
  if (text == "rbf_svm" || text == "rbf") return ModelKind::RbfSvm;
  if (text == "relu_net" || text == "relu") return ModelKind::ReluNet;
  fail(ErrorCode::InvalidParams, "unknown model kind '" + std::string(text) + "'");
}

struct LinearSvmParams {
  std::vector<double> weights;
  double bias = 0.0;
  friend bool operator==(const LinearSvmParams&, const LinearSvmParams&) = default;
};

// h(x) = Σ_j coefficients[j] · exp(−gamma·‖support_j − x‖²) + bias.
struct RbfSvmParams {
  double gamma = 1.0;
  Matrix support;  // one support point per row
  std::vector<double> coefficients;
  double bias = 0.0;
  friend bool operator==(const RbfSvmParams&, const RbfSvmParams&) = default;
};

// h(x) = output_weights · relu(hidden_weights·x + hidden_bias) + output_bias.
struct ReluNetParams {
  Matrix hidden_weights;  // hidden_units × input_dim
  std::vector<double> hidden_bias;
  std::vector<double> output_weights;
  double output_bias = 0.0;

  std::size_t hidden_units() const noexcept { return hidden_weights.rows(); }
  std::size_t input_dim() const noexcept { return hidden_weights.cols(); }
  friend bool operator==(const ReluNetParams&, const ReluNetParams&) = default;
};

inline double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  return std::exp(-gamma * squared_distance(a, b));
}

/// A trained binary classifier. predict(x) is 1 iff raw_score(x) >= 0.
class PredictorModel {
 public:
  using Params = std::variant<LinearSvmParams, RbfSvmParams, ReluNetParams>;

  explicit PredictorModel(Params params, bool degenerate = false)
      : params_(std::move(params)), degenerate_(degenerate) {}

  /// Constant predictor in the linear family: zero weights, bias ±1.
  static PredictorModel constant(int label, std::size_t dimension, bool degenerate = false) {
    return PredictorModel(
        LinearSvmParams{std::vector<double>(dimension, 0.0), label ? 1.0 : -1.0}, degenerate);
  }

  ModelKind kind() const noexcept { return static_cast<ModelKind>(params_.index()); }
  const Params& params() const noexcept { return params_; }
  template <typename T>
  const T& as() const {
    return std::get<T>(params_);
  }

  // Set when training data carried a single label; the model is then constant.
  bool degenerate() const noexcept { return degenerate_; }

  std::size_t input_dimension() const noexcept {
    return std::visit(
        [](const auto& p) -> std::size_t {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, LinearSvmParams>) return p.weights.size();
          else if constexpr (std::is_same_v<T, RbfSvmParams>) return p.support.cols();
          else return p.input_dim();
        },
        params_);
  }

  double raw_score(std::span<const double> x) const {
    if (x.size() != input_dimension())
      fail(ErrorCode::InvalidParams, "model expects " + std::to_string(input_dimension()) +
                                         " features, got " + std::to_string(x.size()));
    return std::visit([&](const auto& p) { return score(p, x); }, params_);
  }

  int predict(std::span<const double> x) const { return raw_score(x) >= 0.0 ? 1 : 0; }

  friend bool operator==(const PredictorModel&, const PredictorModel&) = default;

 private:
  static double score(const LinearSvmParams& p, std::span<const double> x) {
    return dot(p.weights, x) + p.bias;
  }
  static double score(const RbfSvmParams& p, std::span<const double> x) {
    double s = p.bias;
    for (std::size_t j = 0; j < p.coefficients.size(); ++j)
      s += p.coefficients[j] * rbf_kernel(p.support.row(j), x, p.gamma);
    return s;
  }
  static double score(const ReluNetParams& p, std::span<const double> x) {
    double s = p.output_bias;
    for (std::size_t h = 0; h < p.hidden_units(); ++h) {
      const double pre = dot(p.hidden_weights.row(h), x) + p.hidden_bias[h];
      if (pre > 0.0) s += p.output_weights[h] * pre;
    }
    return s;
  }

  Params params_;
  bool degenerate_ = false;
};

// ---------------------------------------------------------------------------
// Model files
//
// JSON object with "format": "multical-model", "version": 1, "kind" (as in
// to_string(ModelKind)), "degenerate", and a kind-specific "params" object.
// Matrices are {"rows", "cols", "data"} with row-major data. Doubles are
// written in shortest round-trip form, so a reloaded model scores bit-exactly.

inline constexpr int kModelFormatVersion = 1;

namespace detail {
inline nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}
inline Matrix matrix_from_json(const nlohmann::json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}
}  // namespace detail

inline nlohmann::json model_to_json(const PredictorModel& model) {
  nlohmann::json params;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearSvmParams>) {
          params = {{"weights", p.weights}, {"bias", p.bias}};
        } else if constexpr (std::is_same_v<T, RbfSvmParams>) {
          params = {{"gamma", p.gamma},
                    {"support", detail::matrix_to_json(p.support)},
                    {"coefficients", p.coefficients},
                    {"bias", p.bias}};
        } else {
          params = {{"hidden_weights", detail::matrix_to_json(p.hidden_weights)},
                    {"hidden_bias", p.hidden_bias},
                    {"output_weights", p.output_weights},
                    {"output_bias", p.output_bias}};
        }
      },
      model.params());
  return {{"format", "multical-model"},
          {"version", kModelFormatVersion},
          {"kind", std::string(to_string(model.kind()))},
          {"degenerate", model.degenerate()},
          {"params", params}};
}

inline PredictorModel model_from_json(const nlohmann::json& j) {
  try {
    require(j.at("format") == "multical-model", "model: not a multical model file",
            ErrorCode::FormatError);
    require(j.at("version").get<int>() == kModelFormatVersion, "model: unsupported version",
            ErrorCode::FormatError);
    const auto kind = parse_model_kind(j.at("kind").get<std::string>());
    const bool degenerate = j.value("degenerate", false);
    const auto& p = j.at("params");
    switch (kind) {
      case ModelKind::LinearSvm:
        return PredictorModel(LinearSvmParams{p.at("weights").get<std::vector<double>>(),
                                              p.at("bias").get<double>()},
                              degenerate);
      case ModelKind::RbfSvm: {
        RbfSvmParams r{p.at("gamma").get<double>(), detail::matrix_from_json(p.at("support")),
                       p.at("coefficients").get<std::vector<double>>(), p.at("bias").get<double>()};
        require(r.coefficients.size() == r.support.rows(), "model: support/coefficient mismatch",
                ErrorCode::FormatError);
        return PredictorModel(std::move(r), degenerate);
      }
      case ModelKind::ReluNet: {
        ReluNetParams r{detail::matrix_from_json(p.at("hidden_weights")),
                        p.at("hidden_bias").get<std::vector<double>>(),
                        p.at("output_weights").get<std::vector<double>>(),
                        p.at("output_bias").get<double>()};
        require(r.hidden_bias.size() == r.hidden_units() &&
                    r.output_weights.size() == r.hidden_units(),
                "model: layer size mismatch", ErrorCode::FormatError);
        return PredictorModel(std::move(r), degenerate);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::FormatError, std::string("model: ") + e.what());
  }
  fail(ErrorCode::FormatError, "model: unreachable kind");
}

inline void save_model(const PredictorModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out << model_to_json(model).dump(1) << '\n';
}

inline PredictorModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::FormatError, "model '" + path + "': " + e.what());
  }
  return model_from_json(j);
}

}  // namespace multical
