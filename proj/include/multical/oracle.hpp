#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "multical/calibration.hpp"
#include "multical/csv.hpp"
#include "multical/dataset.hpp"
#include "multical/model.hpp"
#include "multical/rng.hpp"

namespace multical {

struct Atom {
  std::vector<double> features;
  std::vector<std::size_t> groups;  // sorted indices into DiscreteDistribution::groups
  double p_y1 = 0.0;                // Pr[y = 1 | x]
  double mass = 0.0;
};

/// Finite-support distribution over (x, groups, y) with exact conditional
/// label probabilities.
struct DiscreteDistribution {
  std::vector<GroupId> groups;
  std::vector<Atom> atoms;

  std::size_t dimension() const noexcept { return atoms.empty() ? 0 : atoms.front().features.size(); }

  std::size_t group_index(const GroupId& g) const {
    for (std::size_t i = 0; i < groups.size(); ++i)
      if (groups[i] == g) return i;
    fail(ErrorCode::UnknownGroup, "unknown group '" + g + "'");
  }

  void validate() const {
    require(!atoms.empty(), "distribution: no atoms");
    double total = 0.0;
    for (const auto& a : atoms) {
      require(a.features.size() == dimension(), "distribution: atoms differ in dimension");
      require(a.p_y1 >= 0.0 && a.p_y1 <= 1.0, "distribution: p_y1 must be in [0, 1]");
      require(a.mass > 0.0, "distribution: atom mass must be > 0");
      for (std::size_t g : a.groups) require(g < groups.size(), "distribution: undeclared group");
      total += a.mass;
    }
    require(std::abs(total - 1.0) <= 1e-12,
            "distribution: masses sum to " + csv::format_double(total) + ", not 1");
  }
};

/// c(h, g, ŷ) = ŷ − E[y | x ∈ g, h(x) = ŷ] by enumeration over atoms;
/// nullopt when the conditioning event has zero mass.
inline std::optional<double> true_calibration_error(const DiscreteDistribution& dist,
                                                    const PredictorModel& model, const Category& cat) {
  const std::size_t g = dist.group_index(cat.group);
  double mass = 0.0, positive = 0.0;
  for (const auto& a : dist.atoms) {
    if (!std::binary_search(a.groups.begin(), a.groups.end(), g)) continue;
    if (model.predict(a.features) != cat.predicted_label) continue;
    mass += a.mass;
    positive += a.mass * a.p_y1;
  }
  if (mass == 0.0) return std::nullopt;
  return static_cast<double>(cat.predicted_label) - positive / mass;
}

/// n i.i.d. draws: atom by mass, then y ~ Bernoulli(p_y1).
inline LabeledDataset sample(const DiscreteDistribution& dist, std::size_t n, std::uint64_t seed) {
  require(n >= 1, "sample: n must be >= 1");
  dist.validate();
  std::vector<double> cumulative;
  cumulative.reserve(dist.atoms.size());
  double acc = 0.0;
  for (const auto& a : dist.atoms) cumulative.push_back(acc += a.mass);

  LabeledDataset ds;
  ds.groups = dist.groups;
  for (std::size_t j = 0; j < dist.dimension(); ++j) ds.feature_names.push_back("x" + std::to_string(j));
  ds.examples.reserve(n);
  SplitMix64 rng(derive_seed(seed, {seed_tag::kOracleSample}));
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    const auto& atom = dist.atoms[static_cast<std::size_t>(it - cumulative.begin())];
    Example ex;
    ex.features = atom.features;
    ex.groups = atom.groups;
    ex.label = rng.bernoulli(atom.p_y1) ? 1 : 0;
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

/// |c − ĉ| on a fresh n-sample; nullopt if either side is undefined.
inline std::optional<double> convergence_gap(const DiscreteDistribution& dist,
                                             const PredictorModel& model, const Category& cat,
                                             std::size_t n, std::uint64_t seed) {
  const auto truth = true_calibration_error(dist, model, cat);
  if (!truth) return std::nullopt;
  const auto ds = sample(dist, n, seed);
  const auto estimate = empirical_calibration_error(model, ds, cat);
  if (!estimate) return std::nullopt;
  return std::abs(*truth - *estimate);
}

// ---------------------------------------------------------------------------
// Atom-table files
//
//   # comment
//   @groups A, B                 (optional; declares the group list and order)
//   0.0 1.5 | A | 0.8 | 0.25     features | groups | p_y1 | mass
//
// Features are whitespace- or comma-separated reals; groups a comma list
// (may be empty). Without @groups the declared list is the sorted union of
// the groups used by atoms.

inline DiscreteDistribution parse_atom_table(const std::string& text) {
  DiscreteDistribution dist;
  std::vector<std::vector<std::string>> atom_groups;
  bool declared = false;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  auto bad = [&](const std::string& why) {
    fail(ErrorCode::FormatError, "atom table line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(lines, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    if (line.compare(first, 7, "@groups") == 0) {
      for (auto& g : csv::split_list(line.substr(first + 7)))
        if (!g.empty()) dist.groups.push_back(g);
      declared = true;
      continue;
    }
    const auto fields = csv::split_list(line, '|');
    if (fields.size() != 4) bad("expected 4 '|'-separated fields");
    Atom atom;
    std::string features = fields[0];
    std::replace(features.begin(), features.end(), ',', ' ');
    std::istringstream fs(features);
    std::string token;
    while (fs >> token) {
      double v = 0.0;
      if (!csv::parse_double(token, v)) bad("feature '" + token + "' is not a number");
      atom.features.push_back(v);
    }
    if (!csv::parse_double(fields[2], atom.p_y1)) bad("p_y1 is not a number");
    if (!csv::parse_double(fields[3], atom.mass)) bad("mass is not a number");
    std::vector<std::string> names;
    for (auto& g : csv::split_list(fields[1]))
      if (!g.empty()) names.push_back(g);
    atom_groups.push_back(std::move(names));
    dist.atoms.push_back(std::move(atom));
  }
  if (!declared) {
    std::set<std::string> all;
    for (const auto& names : atom_groups) all.insert(names.begin(), names.end());
    dist.groups.assign(all.begin(), all.end());
  }
  for (std::size_t a = 0; a < dist.atoms.size(); ++a) {
    for (const auto& name : atom_groups[a]) dist.atoms[a].groups.push_back(dist.group_index(name));
    auto& gs = dist.atoms[a].groups;
    std::sort(gs.begin(), gs.end());
    gs.erase(std::unique(gs.begin(), gs.end()), gs.end());
  }
  dist.validate();
  return dist;
}

inline DiscreteDistribution load_atom_table(const std::string& path) {
  return parse_atom_table(csv::read_file(path));
}

inline std::string format_atom_table(const DiscreteDistribution& dist) {
  std::string out = "@groups ";
  for (std::size_t g = 0; g < dist.groups.size(); ++g) out += (g ? ", " : "") + dist.groups[g];
  out += "\n";
  for (const auto& a : dist.atoms) {
    for (std::size_t j = 0; j < a.features.size(); ++j)
      out += (j ? " " : "") + csv::format_double(a.features[j]);
    out += " | ";
    for (std::size_t k = 0; k < a.groups.size(); ++k) out += (k ? ", " : "") + dist.groups[a.groups[k]];
    out += " | " + csv::format_double(a.p_y1) + " | " + csv::format_double(a.mass) + "\n";
  }
  return out;
}

}  // namespace multical
