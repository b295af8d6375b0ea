#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "multical/csv.hpp"
#include "multical/error.hpp"

namespace multical {

using GroupId = std::string;

struct Example {
  std::vector<double> features;
  int label = 0;                     // 0 or 1
  std::vector<std::size_t> groups;   // sorted indices into LabeledDataset::groups

  bool in_group(std::size_t g) const noexcept {
    return std::binary_search(groups.begin(), groups.end(), g);
  }
  friend bool operator==(const Example&, const Example&) = default;
};

/// How one source column becomes feature entries.
struct ColumnEncoding {
  std::string name;
  bool categorical = false;
  std::vector<std::string> levels;  // sorted; one-hot block order

  std::size_t width() const noexcept { return categorical ? levels.size() : 1; }
  friend bool operator==(const ColumnEncoding&, const ColumnEncoding&) = default;
};

class FeatureEncoder {
 public:
  FeatureEncoder() = default;
  explicit FeatureEncoder(std::vector<ColumnEncoding> columns) : columns_(std::move(columns)) {}

  const std::vector<ColumnEncoding>& columns() const noexcept { return columns_; }

  std::size_t dimension() const noexcept {
    std::size_t d = 0;
    for (const auto& c : columns_) d += c.width();
    return d;
  }

  std::vector<std::string> feature_names() const {
    std::vector<std::string> names;
    for (const auto& c : columns_) {
      if (!c.categorical) {
        names.push_back(c.name);
      } else {
        for (const auto& level : c.levels) names.push_back(c.name + "=" + level);
      }
    }
    return names;
  }

  /// Encodes one row of raw cells (one per column, in column order).
  /// A categorical value never seen at ingest time yields an all-zero block.
  std::vector<double> encode(std::span<const std::string> cells) const {
    require(cells.size() == columns_.size(), "encoder: wrong number of cells");
    std::vector<double> out;
    out.reserve(dimension());
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      const auto& col = columns_[i];
      if (!col.categorical) {
        double v = 0.0;
        if (!csv::parse_double(cells[i], v))
          fail(ErrorCode::UnparseableCell, "column '" + col.name + "': '" + cells[i] +
                                               "' is not a number");
        out.push_back(v);
      } else {
        const auto it = std::lower_bound(col.levels.begin(), col.levels.end(), cells[i]);
        const bool known = it != col.levels.end() && *it == cells[i];
        const auto hit = static_cast<std::size_t>(it - col.levels.begin());
        for (std::size_t k = 0; k < col.levels.size(); ++k)
          out.push_back(known && k == hit ? 1.0 : 0.0);
      }
    }
    return out;
  }

  friend bool operator==(const FeatureEncoder&, const FeatureEncoder&) = default;

 private:
  std::vector<ColumnEncoding> columns_;
};

struct LabeledDataset {
  std::vector<Example> examples;
  std::vector<std::string> feature_names;
  std::vector<GroupId> groups;
  FeatureEncoder encoder;  // empty for datasets not built from CSV

  std::size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }
  std::size_t dimension() const noexcept { return feature_names.size(); }

  std::size_t group_index(const GroupId& g) const {
    for (std::size_t i = 0; i < groups.size(); ++i)
      if (groups[i] == g) return i;
    fail(ErrorCode::UnknownGroup, "unknown group '" + g + "'");
  }

  /// Dataset restricted to the given example indices, in that order.
  LabeledDataset subset(std::span<const std::size_t> indices) const {
    LabeledDataset out;
    out.feature_names = feature_names;
    out.groups = groups;
    out.encoder = encoder;
    out.examples.reserve(indices.size());
    for (std::size_t i : indices) out.examples.push_back(examples.at(i));
    return out;
  }
};

struct GroupSpec {
  std::string protected_column;
  std::vector<std::string> group_values;
  bool augment_with_others = false;

  void validate() const {
    require(!group_values.empty(), "group spec: at least one group value required");
    std::set<std::string> seen(group_values.begin(), group_values.end());
    require(seen.size() == group_values.size(), "group spec: group values must be distinct");
  }
};

struct IngestOptions {
  std::string label_column;
  std::vector<std::string> positive_labels;
  std::vector<std::string> negative_labels;  // empty: every non-positive value is 0
  GroupSpec group_spec;
  std::vector<std::string> feature_columns;  // empty: every other column
};

namespace detail {
inline std::size_t require_column(const csv::Table& t, const std::string& name) {
  const auto idx = t.column(name);
  if (idx < 0) fail(ErrorCode::MissingColumn, "missing column '" + name + "'");
  return static_cast<std::size_t>(idx);
}
}  // namespace detail

/// Builds a dataset from an in-memory CSV table.
///
/// Feature columns whose every cell parses as a real pass through unchanged;
/// any other column is one-hot encoded over its sorted distinct values. The
/// protected column never becomes a feature. Its cell is a `;`-separated list
/// of values; each value that is a declared group makes the row a member, and
/// a row matching none belongs to no group.
inline LabeledDataset ingest_table(const csv::Table& table, const IngestOptions& opt) {
  opt.group_spec.validate();
  require(!opt.positive_labels.empty(), "ingest: positive_label is required");
  const std::size_t label_col = detail::require_column(table, opt.label_column);
  const std::size_t group_col = detail::require_column(table, opt.group_spec.protected_column);

  std::vector<std::size_t> feature_cols;
  if (opt.feature_columns.empty()) {
    for (std::size_t c = 0; c < table.header.size(); ++c)
      if (c != label_col && c != group_col) feature_cols.push_back(c);
  } else {
    for (const auto& name : opt.feature_columns) {
      const auto c = detail::require_column(table, name);
      require(c != label_col && c != group_col,
              "ingest: column '" + name + "' cannot be both a feature and label/protected");
      feature_cols.push_back(c);
    }
  }
  if (table.rows.empty()) fail(ErrorCode::EmptyDataset, "ingest: no data rows");

  auto cell_error = [&](std::size_t r, std::size_t c, const std::string& why) {
    fail(ErrorCode::UnparseableCell, "row " + std::to_string(r + 1) + ", column '" +
                                         table.header[c] + "': " + why);
  };

  std::vector<ColumnEncoding> columns;
  for (std::size_t c : feature_cols) {
    ColumnEncoding enc;
    enc.name = table.header[c];
    std::set<std::string> levels;
    bool numeric = true;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& cell = table.rows[r][c];
      if (cell.empty()) cell_error(r, c, "missing value");
      double v = 0.0;
      if (numeric && !csv::parse_double(cell, v)) numeric = false;
      levels.insert(cell);
    }
    enc.categorical = !numeric;
    if (enc.categorical) enc.levels.assign(levels.begin(), levels.end());
    columns.push_back(std::move(enc));
  }

  LabeledDataset ds;
  ds.encoder = FeatureEncoder(std::move(columns));
  ds.feature_names = ds.encoder.feature_names();
  ds.groups = opt.group_spec.group_values;

  auto contains = [](const std::vector<std::string>& list, const std::string& v) {
    return std::find(list.begin(), list.end(), v) != list.end();
  };

  std::vector<std::string> cells(feature_cols.size());
  ds.examples.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    Example ex;
    const auto& label = row[label_col];
    if (label.empty()) cell_error(r, label_col, "missing label");
    if (contains(opt.positive_labels, label)) {
      ex.label = 1;
    } else if (opt.negative_labels.empty() || contains(opt.negative_labels, label)) {
      ex.label = 0;
    } else {
      cell_error(r, label_col, "label '" + label + "' is not a declared label value");
    }
    for (const auto& value : csv::split_list(row[group_col], ';')) {
      for (std::size_t g = 0; g < ds.groups.size(); ++g)
        if (ds.groups[g] == value) ex.groups.push_back(g);
    }
    std::sort(ex.groups.begin(), ex.groups.end());
    ex.groups.erase(std::unique(ex.groups.begin(), ex.groups.end()), ex.groups.end());
    for (std::size_t k = 0; k < feature_cols.size(); ++k) cells[k] = row[feature_cols[k]];
    ex.features = ds.encoder.encode(cells);
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

inline LabeledDataset ingest_csv(const std::string& path, const IngestOptions& opt) {
  return ingest_table(csv::read_table(path), opt);
}

/// Canonical dataset CSV: one column per feature, then `label` (0/1), then
/// `groups` (`;`-joined group names). Values use shortest round-trip form.
inline std::string format_dataset_csv(const LabeledDataset& ds) {
  csv::Row header = ds.feature_names;
  header.push_back("label");
  header.push_back("groups");
  std::string out = csv::format_row(header);
  csv::Row row(header.size());
  for (const auto& ex : ds.examples) {
    for (std::size_t j = 0; j < ex.features.size(); ++j) row[j] = csv::format_double(ex.features[j]);
    row[ex.features.size()] = ex.label ? "1" : "0";
    std::string groups;
    for (std::size_t k = 0; k < ex.groups.size(); ++k) {
      if (k) groups.push_back(';');
      groups += ds.groups[ex.groups[k]];
    }
    row[ex.features.size() + 1] = groups;
    out += csv::format_row(row);
  }
  return out;
}

inline void write_dataset_csv(const LabeledDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out << format_dataset_csv(ds);
}

/// Ingest options that read back a file written by write_dataset_csv.
inline IngestOptions canonical_ingest_options(std::vector<std::string> groups) {
  IngestOptions opt;
  opt.label_column = "label";
  opt.positive_labels = {"1"};
  opt.negative_labels = {"0"};
  opt.group_spec.protected_column = "groups";
  opt.group_spec.group_values = std::move(groups);
  return opt;
}

inline std::map<GroupId, std::size_t> group_counts(const LabeledDataset& ds) {
  std::vector<std::size_t> counts(ds.groups.size(), 0);
  for (const auto& ex : ds.examples)
    for (std::size_t g : ex.groups) ++counts[g];
  std::map<GroupId, std::size_t> out;
  for (std::size_t g = 0; g < ds.groups.size(); ++g) out[ds.groups[g]] = counts[g];
  return out;
}

inline double empirical_group_frequency(const LabeledDataset& ds, const GroupId& group) {
  const std::size_t g = ds.group_index(group);
  if (ds.empty()) fail(ErrorCode::EmptyDataset, "group frequency of an empty dataset");
  std::size_t members = 0;
  for (const auto& ex : ds.examples) members += ex.in_group(g) ? 1 : 0;
  return static_cast<double>(members) / static_cast<double>(ds.size());
}

/// Sorted distinct values of a column, splitting `;` lists. Used when the
/// caller leaves group_values empty.
inline std::vector<std::string> distinct_column_values(const csv::Table& table,
                                                       const std::string& column) {
  const std::size_t c = detail::require_column(table, column);
  std::set<std::string> values;
  for (const auto& row : table.rows)
    for (auto& v : csv::split_list(row[c], ';'))
      if (!v.empty()) values.insert(v);
  return {values.begin(), values.end()};
}

}  // namespace multical
