#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "multical/multical.hpp"

namespace multical::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kValidationError = 1;
inline constexpr int kRuntimeFailure = 2;

struct FlagSpec {
  std::string name;  // long flag without dashes; config key is the same with '_' for '-'
  std::string help;
  std::string default_value;  // empty: no default
  bool is_switch = false;

  FlagSpec(std::string n, std::string h, std::string d = {}, bool sw = false)
      : name(std::move(n)), help(std::move(h)), default_value(std::move(d)), is_switch(sw) {}
};

/// Values for one subcommand after merging the config file under the flags.
class Args {
 public:
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  bool has(const std::string& key) const {
    auto it = values_.find(key);
    return it != values_.end() && !it->second.empty();
  }

  std::string str(const std::string& key) const {
    auto it = values_.find(key);
    return it == values_.end() ? std::string() : it->second;
  }

  std::string required(const std::string& key) const {
    if (!has(key)) fail(ErrorCode::InvalidParams, "missing required flag --" + key);
    return str(key);
  }

  double real(const std::string& key) const {
    double v = 0.0;
    const auto s = required(key);
    if (!csv::parse_double(s, v)) fail(ErrorCode::InvalidParams, "--" + key + ": '" + s + "' is not a number");
    return v;
  }

  std::uint64_t count(const std::string& key) const {
    const auto s = required(key);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      fail(ErrorCode::InvalidParams, "--" + key + ": '" + s + "' is not a non-negative integer");
    return v;
  }

  bool flag(const std::string& key) const {
    const auto s = str(key);
    if (s.empty() || s == "false" || s == "0" || s == "no") return false;
    if (s == "true" || s == "1" || s == "yes") return true;
    fail(ErrorCode::InvalidParams, "--" + key + ": expected true/false, got '" + s + "'");
  }

  std::vector<std::string> list(const std::string& key) const { return csv::split_list(str(key)); }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : list(key)) {
      double v = 0.0;
      if (!csv::parse_double(item, v)) fail(ErrorCode::InvalidParams, "--" + key + ": '" + item + "' is not a number");
      out.push_back(v);
    }
    return out;
  }

  std::vector<std::size_t> counts(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& item : list(key)) {
      std::size_t v = 0;
      auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || ptr != item.data() + item.size())
        fail(ErrorCode::InvalidParams, "--" + key + ": '" + item + "' is not a non-negative integer");
      out.push_back(v);
    }
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
};

struct Io {
  std::ostream& out;
  std::ostream& err;
};

struct Subcommand {
  std::string name;
  std::string description;
  std::vector<FlagSpec> flags;
  std::function<int(const Args&, Io&)> run;
};

/// Parses a flat key=value config file. '#' starts a comment line; keys may
/// use '_' or '-'.
inline std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open config '" + path + "'");
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::InvalidParams, "config line " + std::to_string(line_no) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared flag groups

inline std::vector<FlagSpec> dataset_flags() {
  return {
      {"input", "Input CSV (RFC-4180, header row)"},
      {"label-column", "Label column name", "label"},
      {"positive-label", "Comma list of label values mapped to 1", "1"},
      {"negative-label", "Comma list of label values mapped to 0 (empty: every other value)"},
      {"protected-column", "Column holding group membership (';'-separated values)", "groups"},
      {"group-values", "Comma list of group values (empty: all observed values)"},
      {"augment-with-others", "Put examples in neither group into every training set", "false"},
      {"feature-columns", "Comma list of feature columns (empty: all other columns)"},
  };
}

inline std::vector<FlagSpec> plan_flags() {
  return {
      {"g1", "First group of the ordered pair"},
      {"g2", "Second group of the ordered pair"},
      {"v1", "Comma list of train counts drawn from g1"},
      {"v2", "Comma list of train counts drawn from g2"},
      {"reps", "Repetitions per (z1, z2)", "25"},
      {"seed", "Master seed; every other seed derives from it", "0"},
      {"train-size-min", "Keep splits with at least this many training examples"},
      {"train-size-max", "Keep splits with at most this many training examples"},
  };
}

inline std::vector<FlagSpec> concat(std::vector<FlagSpec> a, const std::vector<FlagSpec>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

inline IngestOptions ingest_options(const Args& a) {
  IngestOptions opt;
  opt.label_column = a.str("label-column");
  opt.positive_labels = a.list("positive-label");
  opt.negative_labels = a.list("negative-label");
  opt.group_spec.protected_column = a.str("protected-column");
  opt.group_spec.group_values = a.list("group-values");
  opt.group_spec.augment_with_others = a.flag("augment-with-others");
  opt.feature_columns = a.list("feature-columns");
  return opt;
}

inline LabeledDataset load_dataset(const Args& a) {
  const auto table = csv::read_table(a.required("input"));
  auto opt = ingest_options(a);
  if (opt.group_spec.group_values.empty())
    opt.group_spec.group_values = distinct_column_values(table, opt.group_spec.protected_column);
  if (opt.group_spec.group_values.empty())
    fail(ErrorCode::InvalidParams, "no group values given and none found in column '" +
                                       opt.group_spec.protected_column + "'");
  return ingest_table(table, opt);
}

inline SplitPlan split_plan(const Args& a) {
  SplitPlan plan;
  plan.v1 = a.counts("v1");
  plan.v2 = a.counts("v2");
  plan.reps = a.count("reps");
  plan.seed = a.count("seed");
  plan.augment_with_others = a.flag("augment-with-others");
  if (a.has("train-size-min") || a.has("train-size-max")) {
    TrainSizeWindow w;
    if (a.has("train-size-min")) w.min = a.count("train-size-min");
    if (a.has("train-size-max")) w.max = a.count("train-size-max");
    w.validate();
    plan.train_size_window = w;
  }
  return plan;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

inline nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

// ---------------------------------------------------------------------------
// Subcommands

inline int run_ingest(const Args& a, Io& io) {
  const auto ds = load_dataset(a);
  const auto counts = group_counts(ds);
  if (a.has("output")) write_dataset_csv(ds, a.str("output"));
  if (a.flag("json")) {
    io.out << nlohmann::json{{"examples", ds.size()},
                             {"dimension", ds.dimension()},
                             {"feature_names", ds.feature_names},
                             {"group_counts", counts}}
                  .dump()
           << '\n';
  } else {
    io.out << "examples " << ds.size() << "\ndimension " << ds.dimension() << '\n';
    for (const auto& [g, c] : counts) io.out << "group " << g << ' ' << c << '\n';
  }
  return kOk;
}

inline int run_split(const Args& a, Io& io) {
  const auto ds = load_dataset(a);
  const SplitEnumerator splits(ds, a.required("g1"), a.required("g2"), split_plan(a));
  const auto& plan = splits.plan();
  const auto selected = splits.selected_indices();
  const bool dry = a.flag("dry-run");
  if (!dry && !a.has("output")) fail(ErrorCode::InvalidParams, "split: --output is required unless --dry-run");

  if (a.flag("json")) {
    nlohmann::json grid = nlohmann::json::array();
    for (const auto& c : splits.grid())
      grid.push_back({{"z1", c.z1},
                      {"z2", c.z2},
                      {"train_size", c.train_size},
                      {"test_size", c.test_size},
                      {"in_window", !plan.train_size_window || plan.train_size_window->contains(c.train_size)}});
    io.out << nlohmann::json{{"grid", grid}, {"splits", splits.size()}, {"selected", selected.size()}}.dump()
           << '\n';
  } else {
    io.out << "z1,z2,train_size,test_size,in_window\n";
    for (const auto& c : splits.grid()) {
      const bool in = !plan.train_size_window || plan.train_size_window->contains(c.train_size);
      io.out << c.z1 << ',' << c.z2 << ',' << c.train_size << ',' << c.test_size << ',' << (in ? 1 : 0) << '\n';
    }
    io.out << "splits " << splits.size() << "\nselected " << selected.size() << '\n';
  }
  if (!dry) {
    std::ofstream out(a.str("output"), std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write '" + a.str("output") + "'");
    out << "z1,z2,rep,split_seed,train_size,test_size,train_indices\n";
    for (std::size_t k : selected) {
      const auto s = splits.at(k);
      out << s.z1 << ',' << s.z2 << ',' << s.rep << ',' << s.split_seed << ',' << s.train_indices.size() << ','
          << s.test_indices.size() << ',';
      for (std::size_t i = 0; i < s.train_indices.size(); ++i) out << (i ? ";" : "") << s.train_indices[i];
      out << '\n';
    }
  }
  return kOk;
}

inline int run_train(const Args& a, Io& io) {
  const auto ds = load_dataset(a);
  const auto kind = parse_model_kind(a.required("model"));
  const std::uint64_t seed = a.count("seed");
  std::optional<PredictorModel> model;
  switch (kind) {
    case ModelKind::LinearSvm:
      model = train_linear_svm(ds, {a.real("reg-lambda"), a.count("epochs"), seed});
      break;
    case ModelKind::RbfSvm:
      model = train_rbf_svm(ds, {a.real("gamma"), a.real("reg-lambda"), a.count("epochs"), seed});
      break;
    case ModelKind::ReluNet:
      model = train_relu_net(ds, {a.count("hidden-units"), a.real("learning-rate"), a.count("epochs"),
                                  a.count("batch-size"), seed});
      break;
  }
  if (a.has("output")) save_model(*model, a.str("output"));
  const double acc = accuracy(*model, ds);
  nlohmann::json j = {{"model_kind", std::string(to_string(kind))},
                      {"train_accuracy", acc},
                      {"degenerate", model->degenerate()},
                      {"examples", ds.size()}};
  if (kind == ModelKind::ReluNet) {
    const auto norms = weight_norms(*model);
    j["spectral_norms"] = norms.spectral;
    j["two_one_norms"] = norms.two_one;
  }
  if (a.flag("json")) {
    io.out << j.dump() << '\n';
  } else {
    io.out << "model " << to_string(kind) << "\ntrain_accuracy " << fmt(acc) << '\n';
    if (model->degenerate()) io.out << "warning single-label training set; model is constant\n";
  }
  return kOk;
}

inline std::atomic<bool>& cancel_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

extern "C" inline void multical_on_signal(int) { cancel_flag().store(true); }

inline int run_sweep_cmd(const Args& a, Io& io) {
  SweepConfig cfg;
  cfg.dataset_id = a.str("dataset-id");
  cfg.g1 = a.required("g1");
  cfg.g2 = a.required("g2");
  cfg.plan = split_plan(a);
  for (const auto& m : a.list("models")) cfg.models.push_back(parse_model_kind(m));
  cfg.linear = {a.real("linear-reg-lambda"), a.count("linear-epochs"), 0};
  cfg.rbf = {a.real("rbf-gamma"), a.real("rbf-reg-lambda"), a.count("rbf-epochs"), 0};
  cfg.relu = {a.count("relu-hidden-units"), a.real("relu-learning-rate"), a.count("relu-epochs"),
              a.count("relu-batch-size"), 0};
  cfg.output_path = a.required("output");
  cfg.worker_count = a.count("workers");
  if (const char* env = std::getenv("MULTICAL_WORKERS"); env && *env) {
    Args e;
    e.set("MULTICAL_WORKERS", env);
    cfg.worker_count = e.count("MULTICAL_WORKERS");
  }
  require(cfg.worker_count >= 1, "workers must be >= 1");

  LabeledDataset ds;
  if (a.has("oracle-dist")) {
    require(!a.has("input"), "sweep: give either --input or --oracle-dist, not both");
    OracleSource src{a.str("oracle-dist"), load_atom_table(a.str("oracle-dist")), a.count("oracle-n")};
    cfg.source = src;
  } else {
    auto table = csv::read_table(a.required("input"));
    CsvSource src{a.str("input"), ingest_options(a)};
    if (src.ingest.group_spec.group_values.empty())
      src.ingest.group_spec.group_values = distinct_column_values(table, src.ingest.group_spec.protected_column);
    cfg.source = src;
  }
  // Everything that can fail validation happens before the output exists.
  ds = load_sweep_dataset(cfg);
  { const SplitEnumerator check(ds, cfg.g1, cfg.g2, cfg.plan); }
  require(!cfg.models.empty(), "sweep: --models must list at least one model kind");

  cancel_flag().store(false);
  auto prev_int = std::signal(SIGINT, multical_on_signal);
  auto prev_term = std::signal(SIGTERM, multical_on_signal);
  auto result = run_sweep_on(ds, cfg, &cancel_flag());
  std::signal(SIGINT, prev_int);
  std::signal(SIGTERM, prev_term);
  write_sweep_output(cfg, result);

  if (a.flag("json")) {
    io.out << nlohmann::json{{"records", result.records.size()},
                             {"tasks", result.tasks},
                             {"failed_tasks", result.failed_tasks},
                             {"complete", !result.cancelled},
                             {"output", cfg.output_path}}
                  .dump()
           << '\n';
  } else {
    io.out << "records " << result.records.size() << "\ntasks " << result.tasks << "\nfailed_tasks "
           << result.failed_tasks << '\n';
  }
  if (result.cancelled)
    fail(ErrorCode::Cancelled, "sweep interrupted; partial output written to " + cfg.output_path);
  if (result.failed_tasks > 0) {
    io.err << "code=TaskFailed, msg=" << result.failed_tasks << " of " << result.tasks
           << " tasks failed; see error_code column\n";
    return kRuntimeFailure;
  }
  return kOk;
}

inline bounds::FairnessParams fairness_params(const Args& a) {
  bounds::FairnessParams p;
  p.epsilon = a.real("epsilon");
  p.delta = a.real("delta");
  p.gamma = a.real("gamma");
  p.psi = a.real("psi");
  p.num_groups = a.count("num-groups");
  p.num_labels = a.count("num-labels");
  return p;
}

inline bounds::ReluNormInputs relu_inputs(const Args& a) {
  bounds::ReluNormInputs net;
  net.d_max = a.count("d-max");
  net.frobenius_x = a.real("frobenius-x");
  net.spectral = a.reals("spectral");
  net.two_one = a.reals("two-one");
  return net;
}

inline int run_bounds(const Args& a, Io& io) {
  const auto formula = a.required("formula");
  nlohmann::json inputs = nlohmann::json::object();
  auto echo = [&](std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
      std::string key(k);
      std::replace(key.begin(), key.end(), '-', '_');
      inputs[key] = a.str(k);
    }
  };
  auto fairness_echo = [&] { echo({"epsilon", "delta", "gamma", "psi", "num-groups", "num-labels"}); };

  std::optional<std::uint64_t> samples;
  std::optional<double> value;
  if (formula == "main") {
    const auto p = fairness_params(a);
    const auto erm = a.required("erm");
    bounds::GroupSampleComplexity m;
    if (erm == "kernel") {
      const double b_sq = a.real("b-sq"), lambda = a.real("lambda");
      m = [=](double e, double d) { return bounds::kernel_erm_sample_complexity_raw(b_sq, lambda, e, d); };
      echo({"erm", "b-sq", "lambda"});
    } else if (erm == "relu") {
      const auto net = relu_inputs(a);
      m = [=](double e, double d) { return bounds::relu_erm_sample_complexity_raw(net, e, d); };
      echo({"erm", "d-max", "frobenius-x", "spectral", "two-one"});
    } else {
      fail(ErrorCode::InvalidParams, "--erm must be kernel or relu");
    }
    fairness_echo();
    samples = bounds::multicalibration_from_erm(m, p).samples;
  } else if (formula == "vc") {
    samples = bounds::vc_multicalibration_bound(a.count("d-vc"), fairness_params(a), a.real("leading-const")).samples;
    fairness_echo();
    echo({"d-vc", "leading-const"});
  } else if (formula == "kernel") {
    samples = bounds::kernel_erm_sample_complexity(a.real("b-sq"), a.real("lambda"), a.real("epsilon"),
                                                   a.real("delta"));
    echo({"b-sq", "lambda", "epsilon", "delta"});
  } else if (formula == "kernel-mc") {
    samples = bounds::kernel_multicalibration_bound(a.real("b-sq"), a.real("lambda"), fairness_params(a)).samples;
    fairness_echo();
    echo({"b-sq", "lambda"});
  } else if (formula == "relu") {
    samples = bounds::relu_erm_sample_complexity(relu_inputs(a), a.real("epsilon"), a.real("delta"));
    echo({"d-max", "frobenius-x", "spectral", "two-one", "epsilon", "delta"});
  } else if (formula == "relu-mc") {
    samples = bounds::relu_multicalibration_bound(relu_inputs(a), fairness_params(a)).samples;
    fairness_echo();
    echo({"d-max", "frobenius-x", "spectral", "two-one"});
  } else if (formula == "hard-margin") {
    samples = bounds::hard_margin_multicalibration_bound(a.real("diameter"), a.real("margin"), fairness_params(a),
                                                         a.real("leading-const"))
                  .samples;
    fairness_echo();
    echo({"diameter", "margin", "leading-const"});
  } else if (formula == "gap") {
    value = bounds::two_sided_generalization_gap(a.real("rademacher"), a.real("loss-bound"), a.count("n"),
                                                 a.real("delta"), a.flag("empirical"));
    echo({"rademacher", "loss-bound", "n", "delta", "empirical"});
  } else if (formula == "occupancy") {
    samples = bounds::group_occupancy_threshold(a.count("num-groups"), a.real("gamma"), a.real("delta"));
    echo({"num-groups", "gamma", "delta"});
  } else {
    fail(ErrorCode::InvalidParams, "unknown --formula '" + formula + "'");
  }

  if (a.flag("json")) {
    nlohmann::json j = {{"formula_id", formula}, {"inputs", inputs}};
    j["samples"] = samples ? nlohmann::json(*samples) : nlohmann::json(nullptr);
    if (value) j["value"] = *value;
    io.out << j.dump() << '\n';
  } else if (samples) {
    io.out << *samples << '\n';
  } else {
    io.out << std::setprecision(10) << *value << '\n';
  }
  return kOk;
}

inline int run_rademacher(const Args& a, Io& io) {
  const auto ds = load_dataset(a);
  const auto k = build_rbf_kernel_matrix(ds, a.real("gamma"));
  const bool exact = a.flag("exact") || k.size() <= kExactRademacherMaxN;
  const auto est = kernel_rademacher_exact_sup(k, a.count("draws"), a.count("seed"), exact);
  const double bound = kernel_rademacher_closed_form_bound(k.b_sq(), k.size());
  if (a.flag("json")) {
    io.out << nlohmann::json{{"n", k.size()},
                             {"b_sq", k.b_sq()},
                             {"mean", est.mean},
                             {"std_error", est.std_error},
                             {"draws", est.draws},
                             {"exact", est.exact},
                             {"closed_form_bound", bound}}
                  .dump()
           << '\n';
  } else {
    io.out << "n " << k.size() << "\nmean " << fmt(est.mean) << "\nstd_error " << fmt(est.std_error)
           << "\ndraws " << est.draws << "\nexact " << (est.exact ? 1 : 0) << "\nclosed_form_bound "
           << fmt(bound) << '\n';
  }
  return kOk;
}

inline int run_oracle(const Args& a, Io& io) {
  const auto dist = load_atom_table(a.required("dist"));
  const auto model = load_model(a.required("model"));
  require(model.input_dimension() == dist.dimension(),
          "model expects " + std::to_string(model.input_dimension()) + " features, atoms have " +
              std::to_string(dist.dimension()));
  nlohmann::json rows = nlohmann::json::array();
  if (!a.flag("json")) io.out << "group,predicted_label,category_mass,true_calibration_error\n";
  for (const auto& g : dist.groups) {
    const std::size_t gi = dist.group_index(g);
    for (int label = 0; label <= 1; ++label) {
      double mass = 0.0;
      for (const auto& atom : dist.atoms)
        if (std::binary_search(atom.groups.begin(), atom.groups.end(), gi) && model.predict(atom.features) == label)
          mass += atom.mass;
      const auto c = true_calibration_error(dist, model, {g, label});
      if (a.flag("json")) {
        rows.push_back({{"group", g}, {"predicted_label", label}, {"category_mass", mass},
                        {"true_calibration_error", opt_json(c)}});
      } else {
        io.out << csv::escape(g) << ',' << label << ',' << fmt(mass) << ',' << (c ? fmt(*c) : "") << '\n';
      }
    }
  }
  if (a.flag("json")) io.out << nlohmann::json{{"categories", rows}}.dump() << '\n';
  return kOk;
}

inline int run_report(const Args& a, Io& io) {
  const auto records = load_records_csv(a.required("in"));
  const auto summary = dispersion_summary(records, parse_bins(a.required("bins")));
  if (a.flag("json")) {
    nlohmann::json bins = nlohmann::json::array();
    for (const auto& s : summary)
      bins.push_back({{"lo", s.bin.lo}, {"hi", s.bin.hi}, {"count", s.count},
                      {"mean_abs_error", opt_json(s.mean_abs_error)}, {"p90_abs_error", opt_json(s.p90_abs_error)}});
    io.out << nlohmann::json{{"bins", bins}}.dump() << '\n';
  } else {
    io.out << "lo,hi,count,mean_abs_error,p90_abs_error\n";
    for (const auto& s : summary)
      io.out << fmt(s.bin.lo) << ',' << fmt(s.bin.hi) << ',' << s.count << ','
             << (s.mean_abs_error ? fmt(*s.mean_abs_error) : "") << ','
             << (s.p90_abs_error ? fmt(*s.p90_abs_error) : "") << '\n';
  }
  return kOk;
}

inline const std::vector<Subcommand>& subcommands() {
  static const std::vector<Subcommand> table = [] {
    const FlagSpec json{"json", "Emit a single JSON object", "false", true};
    std::vector<Subcommand> t;
    t.push_back({"ingest", "Read a CSV, one-hot encode categorical features, report group counts",
                 concat(dataset_flags(), {{"output", "Write the encoded dataset as canonical CSV"}, json}),
                 run_ingest});
    t.push_back({"split", "Enumerate demographic-controlled train/test splits",
                 concat(concat(dataset_flags(), plan_flags()),
                        {{"dry-run", "Print the (z1, z2) grid only", "false", true},
                         {"output", "Write selected splits (CSV)"},
                         json}),
                 run_split});
    t.push_back({"train", "Train one classifier and optionally save it",
                 concat(dataset_flags(),
                        {{"model", "linear | rbf | relu"},
                         {"reg-lambda", "SVM regularization", "0.0001"},
                         {"epochs", "Training epochs", "30"},
                         {"gamma", "RBF kernel width", "1"},
                         {"hidden-units", "ReLU hidden units", "1000"},
                         {"learning-rate", "ReLU learning rate", "0.01"},
                         {"batch-size", "ReLU mini-batch size", "32"},
                         {"seed", "Training seed", "0"},
                         {"output", "Model file (JSON)"},
                         json}),
                 run_train});
    t.push_back({"sweep", "Run splits x classifiers and write calibration records",
                 concat(concat(dataset_flags(), plan_flags()),
                        {{"dataset-id", "Identifier written to every record", "dataset"},
                         {"oracle-dist", "Atom table to sample the dataset from (instead of --input)"},
                         {"oracle-n", "Sample size drawn from --oracle-dist", "1000"},
                         {"models", "Comma list of linear, rbf, relu", "linear,rbf,relu"},
                         {"linear-reg-lambda", "Linear SVM regularization", "0.0001"},
                         {"linear-epochs", "Linear SVM epochs", "30"},
                         {"rbf-gamma", "RBF kernel width", "1"},
                         {"rbf-reg-lambda", "RBF SVM regularization", "0.0001"},
                         {"rbf-epochs", "RBF SVM epochs", "30"},
                         {"relu-hidden-units", "ReLU hidden units", "1000"},
                         {"relu-learning-rate", "ReLU learning rate", "0.01"},
                         {"relu-epochs", "ReLU epochs", "30"},
                         {"relu-batch-size", "ReLU mini-batch size", "32"},
                         {"output", "Records CSV; a JSON sidecar is written next to it"},
                         {"workers", "Worker threads (MULTICAL_WORKERS overrides)", "1"},
                         json}),
                 run_sweep_cmd});
    t.push_back({"bounds", "Evaluate a sample-complexity formula",
                 {{"formula", "main | vc | kernel | kernel-mc | relu | relu-mc | hard-margin | gap | occupancy"},
                  {"erm", "ERM complexity composed by --formula main: kernel | relu"},
                  {"epsilon", "Accuracy parameter"},
                  {"delta", "Failure probability"},
                  {"gamma", "Minimum group frequency"},
                  {"psi", "Minimum prediction frequency within a group"},
                  {"num-groups", "|G|", "2"},
                  {"num-labels", "|Y|", "2"},
                  {"b-sq", "Kernel bound B^2 = max K(x,x)", "1"},
                  {"lambda", "Margin lambda", "1"},
                  {"d-vc", "VC dimension"},
                  {"leading-const", "Leading constant of O(.) bounds", "1"},
                  {"diameter", "Data diameter D"},
                  {"margin", "Hard margin rho"},
                  {"d-max", "Widest layer of the ReLU network"},
                  {"frobenius-x", "Frobenius norm of the sample matrix"},
                  {"spectral", "Comma list of layer spectral norms"},
                  {"two-one", "Comma list of layer (2,1) norms"},
                  {"rademacher", "Rademacher complexity"},
                  {"loss-bound", "Loss bound c", "1"},
                  {"n", "Sample size"},
                  {"empirical", "Use the empirical-Rademacher form of the gap", "true"},
                  json},
                 run_bounds});
    t.push_back({"rademacher", "Empirical Rademacher complexity of the unit-ball RBF class",
                 concat(dataset_flags(),
                        {{"gamma", "RBF kernel width", "1"},
                         {"draws", "Monte-Carlo sign vectors", "200"},
                         {"exact", "Enumerate all 2^N sign vectors (N <= 20)", "false", true},
                         {"seed", "Sign-vector seed", "0"},
                         json}),
                 run_rademacher});
    t.push_back({"oracle", "Print true calibration errors of a saved model on an atom table",
                 {{"dist", "Atom table file"}, {"model", "Model file (JSON)"}, json},
                 run_oracle});
    t.push_back({"report", "Dispersion of calibration error per frequency bin",
                 {{"in", "Records CSV written by sweep"}, {"bins", "Comma list of lo:hi frequency bins"}, json},
                 run_report});
    return t;
  }();
  return table;
}

inline bool is_runtime_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::NonPsdNegative:
    case ErrorCode::Cancelled:
      return true;
    default:
      return false;
  }
}

inline void report_error(std::ostream& err, std::string_view code, const std::string& msg) {
  std::string one_line = msg;
  std::replace(one_line.begin(), one_line.end(), '\n', ' ');
  err << "code=" << code << ", msg=" << one_line << '\n';
}

/// Runs one CLI invocation. argv[0] is the program name.
inline int dispatch(const std::vector<std::string>& argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  Io io{out, err};
  CLI::App app("Multicalibration error measurement and sample-complexity toolkit", "multical");
  app.require_subcommand(1);

  struct Bound {
    const Subcommand* spec;
    CLI::App* app;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    std::string config_path;
  };
  std::vector<std::unique_ptr<Bound>> bound;
  for (const auto& sub : subcommands()) {
    auto b = std::make_unique<Bound>();
    b->spec = &sub;
    b->app = app.add_subcommand(sub.name, sub.description);
    b->app->add_option("--config", b->config_path, "Flat key=value config file; flags override it");
    for (const auto& f : sub.flags) {
      std::string help = f.help;
      if (!f.default_value.empty() && !f.is_switch) help += " [default: " + f.default_value + "]";
      if (f.is_switch) {
        const std::string& description = help;  // a mutable string would be bound as the result
        b->options[f.name] = b->app->add_flag("--" + f.name, description);
      } else {
        b->options[f.name] = b->app->add_option("--" + f.name, b->values[f.name], help);
      }
    }
    bound.push_back(std::move(b));
  }

  std::vector<const char*> cargv;
  for (const auto& s : argv) cargv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report_error(err, "InvalidParams", e.what());
    return kValidationError;
  }

  for (auto& b : bound) {
    if (!b->app->parsed()) continue;
    try {
      Args args;
      std::map<std::string, const FlagSpec*> known;
      for (const auto& f : b->spec->flags) known[f.name] = &f;
      for (const auto& f : b->spec->flags)
        if (!f.default_value.empty()) args.set(f.name, f.default_value);
      if (!b->config_path.empty()) {
        for (const auto& [key, value] : read_config(b->config_path)) {
          if (!known.count(key)) fail(ErrorCode::InvalidParams, "config: unknown key '" + key + "'");
          args.set(key, value);
        }
      }
      for (const auto& f : b->spec->flags) {
        const auto* opt = b->options[f.name];
        if (opt->count() == 0) continue;
        args.set(f.name, f.is_switch ? "true" : b->values[f.name]);
      }
      return b->spec->run(args, io);
    } catch (const Error& e) {
      report_error(err, to_string(e.code()), e.what());
      return is_runtime_code(e.code()) ? kRuntimeFailure : kValidationError;
    } catch (const std::exception& e) {
      report_error(err, "InternalError", e.what());
      return kRuntimeFailure;
    }
  }
  return kValidationError;
}

}  // namespace multical::cli
