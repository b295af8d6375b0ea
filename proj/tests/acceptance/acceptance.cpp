// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>

#include "test_util.hpp"

namespace multical::acceptance {
namespace {

using testing::make_dataset;
using testing::make_example;

// Pinned tolerances.
constexpr double kGapTolerance = 1e-6;
constexpr double kRademacherSigmas = 3.0;
constexpr double kAgreementSigmas = 4.0;
constexpr double kOccupancySigmas = 3.0;
constexpr double kConvergenceRatio = 0.5;
constexpr double kConvergenceSlack = 0.005;
constexpr double kDispersionSlack = 0.005;
constexpr double kGradientTolerance = 1e-4;

// High-precision reference for the two-sided gap at R = 0.1, n = 1000, δ = 0.05.
constexpr double kGapReference = 0.57446608966575893625;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [fail: " << what << "]";
    }
  }
};

bounds::FairnessParams params(double eps, double delta, double gamma, double psi) {
  bounds::FairnessParams p;
  p.epsilon = eps;
  p.delta = delta;
  p.gamma = gamma;
  p.psi = psi;
  return p;
}

void formula_fidelity(Outcome& o) {
  using namespace bounds;
  auto exact = [&](const char* name, std::uint64_t got, std::uint64_t want) {
    o.detail << ' ' << name << '=' << got;
    o.expect(got == want, std::string(name) + " expected " + std::to_string(want));
  };
  exact("kernel_erm", kernel_erm_sample_complexity(1.0, 1.0, 0.1, 0.05), 30345);
  exact("vc", vc_multicalibration_bound(10, params(0.1, 0.05, 0.5, 0.5)).samples, 11506);
  exact("hard_margin", hard_margin_multicalibration_bound(2.0, 0.5, params(0.1, 0.05, 0.5, 0.5)).samples, 3692);
  exact("relu_erm", relu_erm_sample_complexity({2, 1.0, {1.0}, {1.0}}, 0.5, 0.05), 56470);
  exact("kernel_mc", kernel_multicalibration_bound(1.0, 1.0, params(0.3, 0.1, 0.5, 0.5)).samples, 698455);
  exact("occupancy", group_occupancy_threshold(4, 0.2, 0.1), 148);
  const double gap = two_sided_generalization_gap(0.1, 1.0, 1000, 0.05, true);
  o.detail << " gap=" << std::setprecision(10) << gap;
  o.expect(std::abs(gap - kGapReference) <= kGapTolerance, "gap");
}

LabeledDataset random_groups_dataset(std::size_t n, std::size_t groups, SplitMix64& rng) {
  std::vector<std::string> names;
  for (std::size_t g = 0; g < groups; ++g) names.push_back("g" + std::to_string(g));
  std::vector<Example> ex;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> gs;
    for (std::size_t g = 0; g < groups; ++g)
      if (rng.bernoulli(0.5)) gs.push_back(g);
    ex.push_back(make_example({rng.uniform()}, rng.bernoulli(0.5) ? 1 : 0, gs));
  }
  return make_dataset(std::move(ex), names);
}

// Direct transcription of the definition, independent of calibration.hpp.
std::optional<double> brute_force_error(const std::vector<int>& pred, const LabeledDataset& ds,
                                        std::size_t g, int label) {
  double sum = 0.0, count = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& gs = ds.examples[i].groups;
    if (std::find(gs.begin(), gs.end(), g) == gs.end() || pred[i] != label) continue;
    sum += pred[i] - ds.examples[i].label;
    count += 1.0;
  }
  if (count == 0.0) return std::nullopt;
  return sum / count;
}

void calibration_exactness(Outcome& o) {
  SplitMix64 rng(derive_seed(2, {1}));
  std::size_t compared = 0, mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(200);
    const auto ds = random_groups_dataset(n, 1 + rng.below(3), rng);
    std::vector<int> pred;
    for (std::size_t i = 0; i < n; ++i) pred.push_back(rng.bernoulli(0.5) ? 1 : 0);
    const auto stats = category_stats(pred, ds);
    for (std::size_t g = 0; g < ds.groups.size(); ++g)
      for (int label = 0; label <= 1; ++label) {
        const auto want = brute_force_error(pred, ds, g, label);
        mismatches += empirical_calibration_error(pred, ds, {ds.groups[g], label}) != want;
        mismatches += stats[2 * g + label].calibration_error != want;
        ++compared;
      }
  }
  o.detail << " datasets=1000 categories=" << compared << " mismatches=" << mismatches;
  o.expect(mismatches == 0, "mismatch");
}

LabeledDataset random_points(std::size_t n, std::size_t d, SplitMix64& rng) {
  std::vector<Example> ex;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(d);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    ex.push_back(make_example(std::move(x), int(i % 2)));
  }
  return make_dataset(std::move(ex), {"A"});
}

void rademacher_dominance(Outcome& o) {
  SplitMix64 rng(derive_seed(3, {1}));
  int datasets = 0, violations = 0, agreement_checks = 0, disagreements = 0;
  double worst_margin = -1e300;
  for (std::size_t n : {10u, 16u, 50u, 100u})
    for (int rep = 0; rep < 5; ++rep) {
      const double gamma = std::pow(10.0, rng.uniform(-1.0, 1.0));
      const auto k = build_rbf_kernel_matrix(random_points(n, 1 + rng.below(5), rng), gamma);
      const auto mc = kernel_rademacher_exact_sup(k, kDefaultRademacherDraws, rng(), false);
      const double bound = kernel_rademacher_closed_form_bound(1.0, n);
      worst_margin = std::max(worst_margin, mc.mean - bound - kRademacherSigmas * mc.std_error);
      violations += mc.mean > bound + kRademacherSigmas * mc.std_error;
      ++datasets;
      if (n <= 16) {
        const auto exact = kernel_rademacher_exact_sup(k, 0, 0, true);
        ++agreement_checks;
        disagreements += std::abs(mc.mean - exact.mean) > kAgreementSigmas * mc.std_error;
      }
    }
  o.detail << " datasets=" << datasets << " violations=" << violations << " worst_margin=" << worst_margin
           << " exact_vs_mc=" << agreement_checks - disagreements << '/' << agreement_checks;
  o.expect(violations == 0, "dominance");
  o.expect(disagreements == 0, "agreement");
}

double occupancy_failure_rate(const std::vector<double>& freq, double gamma, double delta, std::uint64_t seed) {
  const auto n = bounds::group_occupancy_threshold(freq.size(), gamma, delta);
  SplitMix64 rng(seed);
  const int trials = 10000;
  int bad = 0;
  for (int t = 0; t < trials; ++t) {
    std::vector<std::size_t> counts(freq.size(), 0);
    for (std::uint64_t i = 0; i < n; ++i) {
      double u = rng.uniform(), acc = 0.0;
      std::size_t g = 0;
      while (g + 1 < freq.size() && u >= (acc += freq[g])) ++g;
      ++counts[g];
    }
    bool low = false;
    for (std::size_t g = 0; g < freq.size(); ++g) low = low || double(counts[g]) <= freq[g] * double(n) / 2;
    bad += low;
  }
  return double(bad) / trials;
}

void ratio_and_occupancy(Outcome& o) {
  SplitMix64 rng(derive_seed(4, {1}));
  int counterexamples = 0, satisfied = 0;
  for (int i = 0; i < 100000; ++i) {
    const double eps = rng.uniform(0.0, 1.0), psi = rng.uniform(0.0, 1.0);
    const double p2 = rng.uniform(psi, 1.0), p1 = rng.uniform(0.0, p2);
    const double tol = psi * eps / 3.0;
    const double p1t = std::clamp(p1 + rng.uniform(-tol, tol), 0.0, 1.0);
    const double p2t = std::clamp(p2 + rng.uniform(-tol, tol), 0.0, 1.0);
    const auto r = bounds::ratio_closeness({p1, p2, p1t, p2t, psi, eps});
    counterexamples += r == bounds::RatioCheck::ConclusionFails;
    satisfied += r == bounds::RatioCheck::Holds;
  }
  o.detail << " grids=100000 hypotheses_met=" << satisfied << " counterexamples=" << counterexamples;
  o.expect(counterexamples == 0, "counterexample");

  struct Case {
    std::vector<double> freq;
    double gamma, delta;
  };
  for (const Case& c : {Case{{0.2, 0.2, 0.3, 0.3}, 0.2, 0.1}, Case{{0.5, 0.5}, 0.5, 0.05}}) {
    const double rate = occupancy_failure_rate(c.freq, c.gamma, c.delta, derive_seed(4, {2, c.freq.size()}));
    const double limit = c.delta + kOccupancySigmas * std::sqrt(c.delta * (1 - c.delta) / 10000);
    o.detail << " occupancy(" << c.freq.size() << ',' << c.gamma << ',' << c.delta << ")="
             << bounds::group_occupancy_threshold(c.freq.size(), c.gamma, c.delta) << " rate=" << rate;
    o.expect(rate <= limit, "occupancy rate");
  }
}

void convergence(Outcome& o) {
  const auto d = testing::two_atom_distribution();
  const auto always_one = PredictorModel::constant(1, 1);
  double small = 0.0, large = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    small += *convergence_gap(d, always_one, {"A", 1}, 1000, s);
    large += *convergence_gap(d, always_one, {"A", 1}, 16000, 1000 + s);
  }
  small /= 200;
  large /= 200;
  o.detail << " mean_gap(1000)=" << small << " mean_gap(16000)=" << large;
  o.expect(large <= kConvergenceRatio * small + kConvergenceSlack, "mean gap");

  auto cfg = testing::skewed_sweep_config();
  cfg.worker_count = 8;
  const auto result = run_sweep(cfg);
  o.expect(result.failed_tasks == 0, "sweep tasks failed");
  const auto bins = dispersion_summary(result.records, {{0.0, 0.02}, {0.02, 0.1}, {0.1, 1.0}});
  o.detail << " p90:";
  bool all_defined = std::all_of(bins.begin(), bins.end(), [](const BinSummary& b) { return b.p90_abs_error; });
  o.expect(all_defined, "empty bin");
  if (!all_defined) return;
  for (const auto& b : bins) o.detail << " [" << b.bin.lo << ',' << b.bin.hi << ")=" << *b.p90_abs_error;
  for (std::size_t i = 1; i < bins.size(); ++i)
    o.expect(*bins[i].p90_abs_error <= *bins[i - 1].p90_abs_error + kDispersionSlack, "monotone");
  o.expect(*bins.back().p90_abs_error < *bins.front().p90_abs_error, "narrowing");
}

void trainer_sanity(Outcome& o) {
  const auto clusters = testing::separable_clusters(50, 2.0, 7);
  const double linear_acc = accuracy(train_linear_svm(clusters, {1e-3, 30, 1}), clusters);
  const auto xor_ds = testing::xor_dataset();
  const double rbf_acc = accuracy(train_rbf_svm(xor_ds, {1.0, 1e-3, 50, 0}), xor_ds);
  o.detail << " linear_acc=" << linear_acc << " rbf_xor_acc=" << rbf_acc;
  o.expect(linear_acc == 1.0, "linear");
  o.expect(rbf_acc == 1.0, "rbf");

  SplitMix64 rng(derive_seed(6, {1}));
  const auto ds = random_points(8, 3, rng);
  std::vector<std::size_t> batch(ds.size());
  for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;
  const double h = 1e-5;
  double worst = 0.0;
  for (std::uint64_t point = 0; point < 10; ++point) {
    ReluNetConfig cfg;
    cfg.hidden_units = 6;
    cfg.seed = rng();
    auto p = init_relu_params(3, cfg);
    const auto g = relu_loss_and_gradient(p, ds, batch).gradient;
    auto check = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + h;
      const double up = relu_loss_and_gradient(p, ds, batch).loss;
      param = saved - h;
      const double down = relu_loss_and_gradient(p, ds, batch).loss;
      param = saved;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(analytic - numeric) /
                                  std::max({std::abs(analytic), std::abs(numeric), 1e-6}));
    };
    for (std::size_t k = 0; k < p.hidden_weights.data().size(); ++k)
      check(p.hidden_weights.data()[k], g.hidden_weights.data()[k]);
    for (std::size_t k = 0; k < p.hidden_units(); ++k) {
      check(p.hidden_bias[k], g.hidden_bias[k]);
      check(p.output_weights[k], g.output_weights[k]);
    }
    check(p.output_bias, g.output_bias);
  }
  o.detail << " relu_grad_max_rel_err=" << worst;
  o.expect(worst <= kGradientTolerance, "gradient");
}

void pipeline_determinism(Outcome& o) {
  testing::TempDir dir;
  SweepConfig cfg;
  cfg.dataset_id = "two_atom";
  cfg.source = OracleSource{"", testing::two_atom_distribution(), 600};
  cfg.g1 = "A";
  cfg.g2 = "B";
  cfg.plan.v1 = {20, 60};
  cfg.plan.v2 = {30, 90};
  cfg.plan.reps = 3;
  cfg.plan.seed = 7;
  cfg.models = {ModelKind::LinearSvm, ModelKind::RbfSvm, ModelKind::ReluNet};
  cfg.linear.epochs = 5;
  cfg.rbf.epochs = 3;
  cfg.relu.hidden_units = 16;
  cfg.relu.epochs = 5;

  std::string bodies[2];
  std::size_t records = 0;
  const std::size_t workers[2] = {1, 8};
  for (int i = 0; i < 2; ++i) {
    cfg.worker_count = workers[i];
    cfg.output_path = dir.file("out" + std::to_string(workers[i]) + ".csv");
    const auto result = run_sweep(cfg);
    o.expect(result.failed_tasks == 0, "failed tasks");
    records = result.records.size();
    bodies[i] = testing::read_text(cfg.output_path);
  }
  const std::size_t expected = 2 * 2 * 3 * cfg.models.size() * 2 * 2;
  o.detail << " records=" << records << " expected=" << expected << " csv_bytes=" << bodies[0].size()
           << " identical=" << (bodies[0] == bodies[1] ? "yes" : "no");
  o.expect(!bodies[0].empty() && bodies[0] == bodies[1], "bytes differ");
  o.expect(records == expected, "record count");
}

void adult_scale_dry_run(Outcome& o) {
  std::vector<Example> ex;
  for (std::size_t i = 0; i < 16192; ++i) ex.push_back(make_example({0}, 0, {0}));
  for (std::size_t i = 0; i < 32650; ++i) ex.push_back(make_example({0}, 0, {1}));
  const auto ds = make_dataset(std::move(ex), {"Female", "Male"});
  SplitPlan plan;
  plan.v1 = plan.v2 = {200, 400, 800, 1600, 3200, 6400, 12800};
  plan.reps = 25;
  const auto all = enumerate_splits(ds, "Female", "Male", plan);
  plan.train_size_window = TrainSizeWindow{4500, 9000};
  const auto windowed = enumerate_splits(ds, "Female", "Male", plan);
  const auto selected = windowed.selected_indices().size();
  o.detail << " splits=" << all.size() << " selected=" << selected;
  o.expect(all.size() == 1225, "split count");
  o.expect(selected < all.size() && selected > 0, "window");
  // Cross-check the count-only filter against the materializing one on one cell per z1.
  std::vector<Split> sample;
  for (std::size_t k = 0; k < all.size(); k += 25) sample.push_back(all.at(k));
  o.expect(filter_by_train_size(sample, {4500, 9000}).size() * 25 == selected, "filter agreement");
}

}  // namespace
}  // namespace multical::acceptance

int main() {
  using namespace multical::acceptance;
  const std::pair<const char*, std::function<void(Outcome&)>> criteria[] = {
      {"formula fidelity", formula_fidelity},
      {"calibration-error exactness", calibration_exactness},
      {"rademacher dominance", rademacher_dominance},
      {"ratio closeness and group occupancy", ratio_and_occupancy},
      {"convergence and dispersion", convergence},
      {"trainer sanity", trainer_sanity},
      {"pipeline determinism", pipeline_determinism},
      {"adult-scale dry run", adult_scale_dry_run},
  };
  int failures = 0, index = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      check(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("%s %d %s (%.2fs):%s\n", o.pass ? "PASS" : "FAIL", ++index, name, secs, o.detail.str().c_str());
  }
  std::printf("%d/%d criteria passed\n", index - failures, index);
  return failures ? 1 : 0;
}
