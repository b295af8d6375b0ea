#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "multical/dataset.hpp"
#include "multical/model.hpp"

namespace multical {

/// A (group, predicted label) pair.
struct Category {
  GroupId group;
  int predicted_label = 0;
  friend bool operator==(const Category&, const Category&) = default;
};

struct CategoryStats {
  Category category;
  std::size_t member_count = 0;  // |S_(g, ŷ)|
  double gamma_hat = 0.0;        // fraction of the evaluation set in g
  double psi_hat = 0.0;          // fraction of g predicted ŷ
  double frequency = 0.0;        // gamma_hat · psi_hat
  std::optional<double> calibration_error;  // empty iff member_count == 0
};

struct FrequencyParams {
  double gamma = 0.0;
  double psi = 0.0;
};

inline std::vector<int> predict_all(const PredictorModel& model, const LabeledDataset& ds) {
  std::vector<int> out;
  out.reserve(ds.size());
  for (const auto& ex : ds.examples) out.push_back(model.predict(ex.features));
  return out;
}

/// Σ 1[x ∈ g, h(x) = ŷ]·(h(x) − y) / |S_(g,ŷ)| over precomputed hard
/// predictions; nullopt when the category has no members.
inline std::optional<double> empirical_calibration_error(std::span<const int> predictions,
                                                         const LabeledDataset& eval,
                                                         const Category& cat) {
  require(predictions.size() == eval.size(), "calibration: one prediction per example required");
  const std::size_t g = eval.group_index(cat.group);
  long long residual = 0;
  std::size_t members = 0;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    const auto& ex = eval.examples[i];
    if (predictions[i] != cat.predicted_label || !ex.in_group(g)) continue;
    residual += predictions[i] - ex.label;
    ++members;
  }
  if (members == 0) return std::nullopt;
  return static_cast<double>(residual) / static_cast<double>(members);
}

inline std::optional<double> empirical_calibration_error(const PredictorModel& model,
                                                         const LabeledDataset& eval,
                                                         const Category& cat) {
  if (eval.empty()) fail(ErrorCode::EmptyDataset, "calibration: empty evaluation set");
  const auto predictions = predict_all(model, eval);
  return empirical_calibration_error(predictions, eval, cat);
}

/// One record per declared group × label {0, 1}, groups in declaration order.
inline std::vector<CategoryStats> category_stats(std::span<const int> predictions,
                                                 const LabeledDataset& eval) {
  if (eval.empty()) fail(ErrorCode::EmptyDataset, "calibration: empty evaluation set");
  require(predictions.size() == eval.size(), "calibration: one prediction per example required");
  const std::size_t groups = eval.groups.size();
  std::vector<std::size_t> group_size(groups, 0);
  std::vector<std::size_t> members(groups * 2, 0);
  std::vector<long long> residual(groups * 2, 0);
  for (std::size_t i = 0; i < eval.size(); ++i) {
    const auto& ex = eval.examples[i];
    const int pred = predictions[i];
    for (std::size_t g : ex.groups) {
      ++group_size[g];
      ++members[2 * g + pred];
      residual[2 * g + pred] += pred - ex.label;
    }
  }
  const double n = static_cast<double>(eval.size());
  std::vector<CategoryStats> out;
  out.reserve(groups * 2);
  for (std::size_t g = 0; g < groups; ++g) {
    for (int label = 0; label <= 1; ++label) {
      const std::size_t k = 2 * g + label;
      CategoryStats s;
      s.category = {eval.groups[g], label};
      s.member_count = members[k];
      s.gamma_hat = static_cast<double>(group_size[g]) / n;
      s.psi_hat = group_size[g] ? static_cast<double>(members[k]) / static_cast<double>(group_size[g])
                                : 0.0;
      s.frequency = s.gamma_hat * s.psi_hat;
      if (members[k])
        s.calibration_error = static_cast<double>(residual[k]) / static_cast<double>(members[k]);
      out.push_back(std::move(s));
    }
  }
  return out;
}

inline std::vector<CategoryStats> category_stats(const PredictorModel& model,
                                                 const LabeledDataset& eval) {
  const auto predictions = predict_all(model, eval);
  return category_stats(predictions, eval);
}

/// γ = min gamma_hat over nonempty groups; ψ = min psi_hat over nonempty
/// categories. Empty categories are skipped.
inline FrequencyParams min_frequency_params(std::span<const CategoryStats> stats) {
  FrequencyParams out{std::numeric_limits<double>::infinity(),
                      std::numeric_limits<double>::infinity()};
  bool any = false;
  for (const auto& s : stats) {
    if (s.gamma_hat > 0.0) {
      any = true;
      out.gamma = std::min(out.gamma, s.gamma_hat);
    }
    if (s.member_count > 0) out.psi = std::min(out.psi, s.psi_hat);
  }
  if (!any) fail(ErrorCode::NoNonemptyGroup, "min_frequency_params: every group is empty");
  return out;
}

}  // namespace multical
