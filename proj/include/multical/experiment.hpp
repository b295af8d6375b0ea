#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "multical/calibration.hpp"
#include "multical/csv.hpp"
#include "multical/dataset.hpp"
#include "multical/model.hpp"
#include "multical/oracle.hpp"
#include "multical/splitter.hpp"
#include "multical/trainers.hpp"

namespace multical {

struct CsvSource {
  std::string path;
  IngestOptions ingest;
};

struct OracleSource {
  std::string path;  // echoed only; the distribution itself is held here
  DiscreteDistribution dist;
  std::size_t n = 0;
};

struct SweepConfig {
  std::string dataset_id = "dataset";
  std::variant<CsvSource, OracleSource> source;
  GroupId g1, g2;
  SplitPlan plan;
  std::vector<ModelKind> models;
  LinearSvmConfig linear;
  RbfSvmConfig rbf;
  ReluNetConfig relu;
  std::string output_path;  // empty: keep records in memory only
  std::size_t worker_count = 1;
};

/// One sweep measurement. A failure row has error_code set, no category, and
/// empty numeric measurements.
struct CalibrationRecord {
  std::string dataset_id;
  std::string model_kind;
  std::string group;
  std::optional<int> predicted_label;
  std::size_t z1 = 0, z2 = 0, rep = 0;
  std::size_t train_size = 0, test_size = 0;
  std::optional<double> gamma_hat, psi_hat, frequency;
  std::optional<double> calibration_error;
  std::optional<double> train_accuracy, test_accuracy;
  std::uint64_t split_seed = 0;
  std::string error_code;

  bool failed() const noexcept { return !error_code.empty(); }
  friend bool operator==(const CalibrationRecord&, const CalibrationRecord&) = default;
};

inline const std::vector<std::string>& record_columns() {
  static const std::vector<std::string> columns = {
      "dataset_id", "model_kind",     "group",         "predicted_label", "z1",         "z2",
      "rep",        "train_size",     "test_size",     "gamma_hat",       "psi_hat",    "frequency",
      "calibration_error", "train_accuracy", "test_accuracy", "split_seed", "error_code"};
  return columns;
}

inline bool record_less(const CalibrationRecord& a, const CalibrationRecord& b) {
  return std::tie(a.model_kind, a.z1, a.z2, a.rep, a.group, a.predicted_label) <
         std::tie(b.model_kind, b.z1, b.z2, b.rep, b.group, b.predicted_label);
}

struct SweepResult {
  std::vector<CalibrationRecord> records;  // sorted
  std::size_t tasks = 0;
  std::size_t failed_tasks = 0;
  bool cancelled = false;
};

inline LabeledDataset load_sweep_dataset(const SweepConfig& cfg) {
  if (const auto* csv_source = std::get_if<CsvSource>(&cfg.source))
    return ingest_csv(csv_source->path, csv_source->ingest);
  const auto& oracle = std::get<OracleSource>(cfg.source);
  return sample(oracle.dist, oracle.n, derive_seed(cfg.plan.seed, {seed_tag::kOracleSample}));
}

inline std::uint64_t model_seed_for(std::uint64_t split_seed, ModelKind kind) noexcept {
  return derive_seed(split_seed, {seed_tag::kModel, static_cast<std::uint64_t>(kind)});
}

inline PredictorModel train_model(ModelKind kind, const LabeledDataset& train, const SweepConfig& cfg,
                                  std::uint64_t seed) {
  switch (kind) {
    case ModelKind::LinearSvm: {
      auto c = cfg.linear;
      c.seed = seed;
      return train_linear_svm(train, c);
    }
    case ModelKind::RbfSvm: {
      auto c = cfg.rbf;
      c.seed = seed;
      return train_rbf_svm(train, c);
    }
    case ModelKind::ReluNet: {
      auto c = cfg.relu;
      c.seed = seed;
      return train_relu_net(train, c);
    }
  }
  fail(ErrorCode::InvalidParams, "unknown model kind");
}

namespace detail {

inline std::vector<CalibrationRecord> run_task(const LabeledDataset& ds, const SplitEnumerator& splits,
                                               std::size_t split_index, ModelKind kind,
                                               const SweepConfig& cfg) {
  const Split split = splits.at(split_index);
  CalibrationRecord base;
  base.dataset_id = cfg.dataset_id;
  base.model_kind = std::string(to_string(kind));
  base.z1 = split.z1;
  base.z2 = split.z2;
  base.rep = split.rep;
  base.train_size = split.train_indices.size();
  base.test_size = split.test_indices.size();
  base.split_seed = split.split_seed;
  try {
    const auto train = ds.subset(split.train_indices);
    const auto test = ds.subset(split.test_indices);
    const auto model = train_model(kind, train, cfg, model_seed_for(split.split_seed, kind));
    const auto predictions = predict_all(model, test);
    const auto stats = category_stats(predictions, test);
    base.train_accuracy = accuracy(model, train);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < test.size(); ++i) hits += predictions[i] == test.examples[i].label ? 1 : 0;
    base.test_accuracy = static_cast<double>(hits) / static_cast<double>(test.size());

    std::vector<CalibrationRecord> out;
    out.reserve(stats.size());
    for (const auto& s : stats) {
      CalibrationRecord r = base;
      r.group = s.category.group;
      r.predicted_label = s.category.predicted_label;
      r.gamma_hat = s.gamma_hat;
      r.psi_hat = s.psi_hat;
      r.frequency = s.frequency;
      r.calibration_error = s.calibration_error;
      out.push_back(std::move(r));
    }
    return out;
  } catch (const Error& e) {
    base.error_code = std::string(to_string(e.code()));
  } catch (const std::exception&) {
    base.error_code = "InternalError";
  }
  base.train_accuracy.reset();
  base.test_accuracy.reset();
  return {base};
}

}  // namespace detail

/// Runs every (selected split × model kind) task on a pool of worker_count
/// threads. Each task writes only its own slot; the result is sorted
/// afterwards, so output does not depend on scheduling. Setting *cancel
/// stops workers from starting new tasks.
inline SweepResult run_sweep_on(const LabeledDataset& ds, const SweepConfig& cfg,
                                const std::atomic<bool>* cancel = nullptr) {
  require(!cfg.models.empty(), "sweep: at least one model kind is required");
  const SplitEnumerator splits(ds, cfg.g1, cfg.g2, cfg.plan);
  const auto selected = splits.selected_indices();

  struct Task {
    std::size_t split_index;
    ModelKind kind;
  };
  std::vector<Task> tasks;
  for (std::size_t k : selected)
    for (ModelKind kind : cfg.models) tasks.push_back({k, kind});

  std::vector<std::vector<CalibrationRecord>> slots(tasks.size());
  std::vector<char> done(tasks.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      if (cancel && cancel->load()) return;
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks.size()) return;
      slots[t] = detail::run_task(ds, splits, tasks[t].split_index, tasks[t].kind, cfg);
      done[t] = 1;
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.worker_count, tasks.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SweepResult result;
  result.tasks = tasks.size();
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (!done[t]) {
      result.cancelled = true;
      continue;
    }
    if (slots[t].size() == 1 && slots[t].front().failed()) ++result.failed_tasks;
    for (auto& r : slots[t]) result.records.push_back(std::move(r));
  }
  std::sort(result.records.begin(), result.records.end(), record_less);
  return result;
}

// ---------------------------------------------------------------------------
// Record CSV: the columns of record_columns(), header row, empty field for
// missing values, doubles in shortest round-trip form.

inline std::string format_records_csv(const std::vector<CalibrationRecord>& records) {
  std::string out = csv::format_row(record_columns());
  auto num = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); };
  for (const auto& r : records) {
    out += csv::format_row({r.dataset_id, r.model_kind, r.group,
                            r.predicted_label ? std::to_string(*r.predicted_label) : "",
                            std::to_string(r.z1), std::to_string(r.z2), std::to_string(r.rep),
                            std::to_string(r.train_size), std::to_string(r.test_size), num(r.gamma_hat),
                            num(r.psi_hat), num(r.frequency), num(r.calibration_error),
                            num(r.train_accuracy), num(r.test_accuracy), std::to_string(r.split_seed),
                            r.error_code});
  }
  return out;
}

inline std::vector<CalibrationRecord> parse_records_csv(const std::string& text) {
  const auto rows = csv::parse(text);
  require(!rows.empty() && rows.front() == record_columns(), "records: unexpected header",
          ErrorCode::FormatError);
  auto num = [](const std::string& s) -> std::optional<double> {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    if (!csv::parse_double(s, v)) fail(ErrorCode::FormatError, "records: bad number '" + s + "'");
    return v;
  };
  auto count = [](const std::string& s) -> std::uint64_t {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      fail(ErrorCode::FormatError, "records: bad integer '" + s + "'");
    }
  };
  std::vector<CalibrationRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    require(f.size() == record_columns().size(), "records: wrong field count in row " + std::to_string(i),
            ErrorCode::FormatError);
    CalibrationRecord r;
    r.dataset_id = f[0];
    r.model_kind = f[1];
    r.group = f[2];
    if (!f[3].empty()) r.predicted_label = static_cast<int>(count(f[3]));
    r.z1 = count(f[4]);
    r.z2 = count(f[5]);
    r.rep = count(f[6]);
    r.train_size = count(f[7]);
    r.test_size = count(f[8]);
    r.gamma_hat = num(f[9]);
    r.psi_hat = num(f[10]);
    r.frequency = num(f[11]);
    r.calibration_error = num(f[12]);
    r.train_accuracy = num(f[13]);
    r.test_accuracy = num(f[14]);
    r.split_seed = count(f[15]);
    r.error_code = f[16];
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<CalibrationRecord> load_records_csv(const std::string& path) {
  return parse_records_csv(csv::read_file(path));
}

/// FNV-1a, 64-bit.
inline std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline nlohmann::json sweep_config_to_json(const SweepConfig& cfg) {
  nlohmann::json source;
  if (const auto* c = std::get_if<CsvSource>(&cfg.source)) {
    source = {{"type", "csv"},
              {"path", c->path},
              {"label_column", c->ingest.label_column},
              {"positive_label", c->ingest.positive_labels},
              {"negative_label", c->ingest.negative_labels},
              {"protected_column", c->ingest.group_spec.protected_column},
              {"group_values", c->ingest.group_spec.group_values},
              {"feature_columns", c->ingest.feature_columns}};
  } else {
    const auto& o = std::get<OracleSource>(cfg.source);
    source = {{"type", "oracle"}, {"path", o.path}, {"n", o.n}, {"atoms", format_atom_table(o.dist)}};
  }
  std::vector<std::string> models;
  for (auto k : cfg.models) models.emplace_back(to_string(k));
  nlohmann::json plan = {{"v1", cfg.plan.v1},
                         {"v2", cfg.plan.v2},
                         {"reps", cfg.plan.reps},
                         {"seed", cfg.plan.seed},
                         {"augment_with_others", cfg.plan.augment_with_others}};
  if (cfg.plan.train_size_window)
    plan["train_size_window"] = {cfg.plan.train_size_window->min, cfg.plan.train_size_window->max};
  return {{"dataset_id", cfg.dataset_id},
          {"source", source},
          {"g1", cfg.g1},
          {"g2", cfg.g2},
          {"plan", plan},
          {"models", models},
          {"linear_svm", {{"reg_lambda", cfg.linear.reg_lambda}, {"epochs", cfg.linear.epochs}}},
          {"rbf_svm",
           {{"gamma", cfg.rbf.gamma}, {"reg_lambda", cfg.rbf.reg_lambda}, {"epochs", cfg.rbf.epochs}}},
          {"relu_net",
           {{"hidden_units", cfg.relu.hidden_units},
            {"learning_rate", cfg.relu.learning_rate},
            {"epochs", cfg.relu.epochs},
            {"batch_size", cfg.relu.batch_size}}}};
}

/// Writes <output_path> (records CSV) and <output_path>.json (sidecar with the
/// config echo and the FNV-1a hash of the CSV bytes). worker_count is left out
/// of the echo since it cannot change the output.
inline void write_sweep_output(const SweepConfig& cfg, const SweepResult& result) {
  const std::string body = format_records_csv(result.records);
  {
    std::ofstream out(cfg.output_path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write '" + cfg.output_path + "'");
    out << body;
  }
  nlohmann::json sidecar = {{"format", "multical-sweep"},
                            {"version", 1},
                            {"config", sweep_config_to_json(cfg)},
                            {"records", result.records.size()},
                            {"tasks", result.tasks},
                            {"failed_tasks", result.failed_tasks},
                            {"complete", !result.cancelled},
                            {"content_hash", "fnv1a64:" + hex64(fnv1a64(body))}};
  std::ofstream side(cfg.output_path + ".json", std::ios::binary);
  if (!side) fail(ErrorCode::IoError, "cannot write '" + cfg.output_path + ".json'");
  side << sidecar.dump(2) << '\n';
}

inline SweepResult run_sweep(const SweepConfig& cfg, const std::atomic<bool>* cancel = nullptr) {
  const auto ds = load_sweep_dataset(cfg);
  auto result = run_sweep_on(ds, cfg, cancel);
  if (!cfg.output_path.empty()) write_sweep_output(cfg, result);
  return result;
}

// ---------------------------------------------------------------------------

struct FrequencyBin {
  double lo = 0.0;
  double hi = 0.0;  // half-open [lo, hi)
};

struct BinSummary {
  FrequencyBin bin;
  std::size_t count = 0;
  std::optional<double> mean_abs_error;
  std::optional<double> p90_abs_error;
};

/// Nearest-rank quantile: the ⌈q·n⌉-th smallest value, q = num/den.
inline double nearest_rank(std::vector<double> values, std::size_t num, std::size_t den) {
  require(!values.empty(), "quantile of an empty set");
  std::sort(values.begin(), values.end());
  std::size_t rank = (num * values.size() + den - 1) / den;
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

/// Vertical dispersion |ĉ| per frequency bin. Failure rows and undefined
/// errors are skipped.
inline std::vector<BinSummary> dispersion_summary(const std::vector<CalibrationRecord>& records,
                                                  std::vector<FrequencyBin> bins) {
  for (const auto& b : bins) require(b.lo < b.hi, "bins: lo must be < hi");
  auto sorted = bins;
  std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.lo < b.lo; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    require(sorted[i - 1].hi <= sorted[i].lo, "bins must not overlap");

  std::vector<BinSummary> out;
  for (const auto& b : bins) {
    std::vector<double> errors;
    for (const auto& r : records) {
      if (r.failed() || !r.calibration_error || !r.frequency) continue;
      if (*r.frequency >= b.lo && *r.frequency < b.hi) errors.push_back(std::abs(*r.calibration_error));
    }
    BinSummary s{b, errors.size(), std::nullopt, std::nullopt};
    if (!errors.empty()) {
      double total = 0.0;
      for (double e : errors) total += e;
      s.mean_abs_error = total / static_cast<double>(errors.size());
      s.p90_abs_error = nearest_rank(errors, 9, 10);
    }
    out.push_back(s);
  }
  return out;
}

inline std::vector<FrequencyBin> parse_bins(const std::string& text) {
  std::vector<FrequencyBin> bins;
  for (const auto& item : csv::split_list(text)) {
    const auto parts = csv::split_list(item, ':');
    FrequencyBin b;
    if (parts.size() != 2 || !csv::parse_double(parts[0], b.lo) || !csv::parse_double(parts[1], b.hi))
      fail(ErrorCode::InvalidParams, "bins: expected lo:hi, got '" + item + "'");
    bins.push_back(b);
  }
  require(!bins.empty(), "bins: at least one bin is required");
  return bins;
}

}  // namespace multical
