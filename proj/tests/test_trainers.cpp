#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "test_util.hpp"

namespace multical {
namespace {

using testing::make_dataset;
using testing::make_example;
using testing::separable_clusters;
using testing::xor_dataset;

LabeledDataset all_ones(std::size_t n) {
  std::vector<Example> ex;
  for (std::size_t i = 0; i < n; ++i) ex.push_back(make_example({double(i), -double(i)}, 1));
  return make_dataset(std::move(ex), {"A"});
}

LabeledDataset shuffled(const LabeledDataset& ds, std::uint64_t seed) {
  LabeledDataset out = ds;
  SplitMix64 rng(seed);
  shuffle(out.examples, rng);
  return out;
}

// ----- linear SVM

TEST(LinearSvm, SeparatesClusters) {
  const auto ds = separable_clusters(50, 2.0, 7);
  const auto m = train_linear_svm(ds, {1e-3, 30, 1});
  EXPECT_EQ(m.kind(), ModelKind::LinearSvm);
  EXPECT_DOUBLE_EQ(accuracy(m, ds), 1.0);
  EXPECT_FALSE(m.degenerate());
}

TEST(LinearSvm, SingleLabelGivesFlaggedConstant) {
  const auto ds = all_ones(5);
  const auto m = train_linear_svm(ds, {});
  EXPECT_TRUE(m.degenerate());
  for (double x = -100; x <= 100; x += 13.5) EXPECT_EQ(m.predict(std::vector<double>{x, x * x}), 1);
}

TEST(LinearSvm, BitwiseDeterministic) {
  const auto ds = separable_clusters(30, 1.0, 3);
  const auto a = train_linear_svm(ds, {1e-2, 10, 99});
  const auto b = train_linear_svm(ds, {1e-2, 10, 99});
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, train_linear_svm(shuffled(ds, 5), {1e-2, 10, 99}));
}

TEST(LinearSvm, ObjectiveSettlesDown) {
  const auto ds = separable_clusters(40, 0.3, 11);  // overlapping clusters
  TrainTrace trace;
  train_linear_svm(ds, {1e-2, 40, 2}, &trace);
  ASSERT_EQ(trace.epoch_objective.size(), 40u);
  const double late = *std::max_element(trace.epoch_objective.end() - 10, trace.epoch_objective.end());
  EXPECT_LE(late, trace.epoch_objective.front() + 1e-12);
  EXPECT_LE(trace.epoch_objective.back(), 1.0);  // the zero predictor scores exactly 1
}

TEST(LinearSvm, ParameterValidation) {
  const auto ds = separable_clusters(5, 1.0, 1);
  EXPECT_THROW(train_linear_svm(ds, {0.0, 10, 0}), Error);
  EXPECT_THROW(train_linear_svm(ds, {1e-3, 0, 0}), Error);
  try {
    train_linear_svm(make_dataset({}, {"A"}), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyDataset);
  }
}

// ----- RBF SVM

TEST(RbfSvm, SolvesXor) {
  const auto ds = xor_dataset();
  const auto m = train_rbf_svm(ds, {1.0, 1e-3, 50, 0});
  EXPECT_DOUBLE_EQ(accuracy(m, ds), 1.0);
  EXPECT_EQ(m.as<RbfSvmParams>().coefficients.size(), 4u);
}

TEST(RbfSvm, SinglePointPredictsItsLabel) {
  const auto ds = make_dataset({make_example({0.5, -2.0}, 1)}, {"A"});
  const auto m = train_rbf_svm(ds, {});
  EXPECT_EQ(m.predict(ds.examples[0].features), 1);
}

TEST(RbfSvm, VanishingWidthGivesMajorityConstant) {
  std::vector<Example> ex;
  for (int i = 0; i < 10; ++i) ex.push_back(make_example({double(i % 5), double(i / 5)}, i < 6 ? 1 : 0));
  const auto ds = make_dataset(std::move(ex), {"A"});
  const auto m = train_rbf_svm(ds, {1e-9, 1e-2, 50, 4});
  double lo = 1e300, hi = -1e300;
  for (const auto& e : ds.examples) {
    lo = std::min(lo, m.raw_score(e.features));
    hi = std::max(hi, m.raw_score(e.features));
    EXPECT_EQ(m.predict(e.features), 1);
  }
  EXPECT_LT(hi - lo, 1e-6 * std::max(1.0, std::abs(hi)));
}

TEST(RbfSvm, InvariantToRowOrder) {
  const auto ds = separable_clusters(15, 0.4, 21);
  const auto a = train_rbf_svm(ds, {0.7, 1e-2, 5, 8});
  for (std::uint64_t s = 1; s <= 3; ++s) EXPECT_EQ(a, train_rbf_svm(shuffled(ds, s), {0.7, 1e-2, 5, 8}));
}

TEST(RbfSvm, ObjectiveBoundedByZeroPredictor) {
  const auto ds = separable_clusters(20, 0.2, 13);
  TrainTrace trace;
  train_rbf_svm(ds, {2.0, 1e-2, 20, 1}, &trace);
  ASSERT_EQ(trace.epoch_objective.size(), 20u);
  EXPECT_LE(trace.epoch_objective.back(), 1.0);
}

// ----- ReLU network

double relative_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

TEST(ReluNet, GradientMatchesCentralDifferences) {
  const auto ds = make_dataset({make_example({0.3, -1.2, 0.7}, 1), make_example({-0.8, 0.4, 1.5}, 0),
                                make_example({1.1, 0.9, -0.6}, 1)},
                               {"A"});
  const std::vector<std::size_t> batch = {0, 1, 2};
  const double h = 1e-5;
  double worst = 0.0;
  for (std::uint64_t point = 0; point < 10; ++point) {
    ReluNetConfig cfg;
    cfg.hidden_units = 6;
    cfg.seed = 1000 + point;
    auto p = init_relu_params(3, cfg);
    const auto g = relu_loss_and_gradient(p, ds, batch).gradient;

    auto check = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + h;
      const double up = relu_loss_and_gradient(p, ds, batch).loss;
      param = saved - h;
      const double down = relu_loss_and_gradient(p, ds, batch).loss;
      param = saved;
      worst = std::max(worst, relative_error(analytic, (up - down) / (2 * h)));
    };
    for (std::size_t k = 0; k < p.hidden_weights.data().size(); ++k)
      check(p.hidden_weights.data()[k], g.hidden_weights.data()[k]);
    for (std::size_t k = 0; k < p.hidden_units(); ++k) {
      check(p.hidden_bias[k], g.hidden_bias[k]);
      check(p.output_weights[k], g.output_weights[k]);
    }
    check(p.output_bias, g.output_bias);
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(ReluNet, ZeroOutputLayerScoresZero) {
  ReluNetConfig cfg;
  cfg.hidden_units = 16;
  cfg.zero_init_output = true;
  const PredictorModel m(init_relu_params(4, cfg));
  SplitMix64 rng(3);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.uniform(-10, 10);
    EXPECT_EQ(m.raw_score(x), 0.0);
    EXPECT_EQ(m.predict(x), 1);
  }
}

TEST(ReluNet, EightUnitsFitSeparableData) {
  const auto ds = separable_clusters(25, 1.5, 17);
  ReluNetConfig cfg;
  cfg.hidden_units = 8;
  cfg.learning_rate = 0.1;
  cfg.epochs = 500;
  cfg.batch_size = 10;
  cfg.seed = 5;
  const auto m = train_relu_net(ds, cfg);
  EXPECT_DOUBLE_EQ(accuracy(m, ds), 1.0);
}

TEST(ReluNet, DeterministicAndOrderFree) {
  const auto ds = separable_clusters(20, 0.5, 2);
  ReluNetConfig cfg;
  cfg.hidden_units = 5;
  cfg.epochs = 5;
  cfg.seed = 77;
  const auto a = train_relu_net(ds, cfg);
  EXPECT_EQ(a, train_relu_net(ds, cfg));
  EXPECT_EQ(a, train_relu_net(shuffled(ds, 9), cfg));
}

TEST(ReluNet, LossTraceDecreases) {
  const auto ds = separable_clusters(25, 1.0, 4);
  ReluNetConfig cfg;
  cfg.hidden_units = 10;
  cfg.learning_rate = 0.05;
  cfg.epochs = 50;
  TrainTrace trace;
  train_relu_net(ds, cfg, &trace);
  ASSERT_EQ(trace.epoch_objective.size(), 50u);
  EXPECT_LT(trace.epoch_objective.back(), trace.epoch_objective.front());
}

TEST(ReluNet, DivergenceIsReported) {
  std::vector<Example> ex;
  for (int i = 0; i < 8; ++i) ex.push_back(make_example({1e10 * (i % 2 ? 1 : -1), 1e10 * ((i % 4) < 2 ? 1 : -1)}, i % 3 == 0));
  const auto ds = make_dataset(std::move(ex), {"A"});
  ReluNetConfig cfg;
  cfg.hidden_units = 4;
  cfg.learning_rate = 10.0;
  cfg.epochs = 50;
  try {
    train_relu_net(ds, cfg);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteLoss);
  }
}

TEST(ReluNet, SingleLabelGivesFlaggedConstant) {
  auto ds = all_ones(4);
  for (auto& e : ds.examples) e.label = 0;
  const auto m = train_relu_net(ds, {});
  EXPECT_TRUE(m.degenerate());
  for (const auto& e : ds.examples) EXPECT_EQ(m.predict(e.features), 0);
}

// ----- norms

TEST(Norms, HandComputedMatrices) {
  const Matrix id(2, 2, {1, 0, 0, 1});
  EXPECT_NEAR(spectral_norm(id), 1.0, 1e-8);
  EXPECT_DOUBLE_EQ(two_one_norm(id), 2.0);
  const Matrix d(2, 2, {3, 0, 0, 4});
  EXPECT_NEAR(spectral_norm(d), 4.0, 4e-8);
  EXPECT_DOUBLE_EQ(two_one_norm(d), 7.0);
  const Matrix z(3, 2);
  EXPECT_EQ(spectral_norm(z), 0.0);
  EXPECT_EQ(two_one_norm(z), 0.0);
}

TEST(Norms, RankOneSpectralNormIsProductOfNorms) {
  // u vᵀ with u = (1, 2, 2), v = (3, 4): ‖·‖₂ = 3·5.
  const Matrix m(3, 2, {3, 4, 6, 8, 6, 8});
  EXPECT_NEAR(spectral_norm(m), 15.0, 15e-8);
  EXPECT_DOUBLE_EQ(two_one_norm(m), 5.0 + 10.0 + 10.0);
}

TEST(Norms, WeightNormsPerLayer) {
  ReluNetParams p{Matrix(2, 2, {3, 0, 0, 4}), {0.5, -0.5}, {0.6, 0.8}, 9.0};
  const auto n = weight_norms(PredictorModel(p));
  ASSERT_EQ(n.spectral.size(), 2u);
  EXPECT_NEAR(n.spectral[0], 4.0, 1e-7);
  EXPECT_DOUBLE_EQ(n.two_one[0], 7.0);
  EXPECT_NEAR(n.spectral[1], 1.0, 1e-8);
  EXPECT_NEAR(n.two_one[1], 1.0, 1e-15);
  EXPECT_THROW(weight_norms(PredictorModel::constant(1, 2)), Error);
}

// ----- predictor contract

TEST(PredictorModel, ThresholdAtZeroPredictsOne) {
  const PredictorModel m(LinearSvmParams{{1.0, -1.0}, 0.0});
  EXPECT_EQ(m.predict(std::vector<double>{2.0, 2.0}), 1);
  EXPECT_EQ(m.predict(std::vector<double>{1.0, 2.0}), 0);
  EXPECT_EQ(m.predict(std::vector<double>{2.0, 1.0}), 1);
}

TEST(PredictorModel, JsonRoundTripScoresBitExactly) {
  testing::TempDir dir;
  const auto ds = separable_clusters(10, 0.6, 8);
  ReluNetConfig relu;
  relu.hidden_units = 7;
  relu.epochs = 3;
  const std::vector<PredictorModel> models = {train_linear_svm(ds, {1e-2, 5, 1}),
                                              train_rbf_svm(ds, {0.9, 1e-2, 5, 1}),
                                              train_relu_net(ds, relu), PredictorModel::constant(0, 2, true)};
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto path = dir.file("m" + std::to_string(i) + ".json");
    save_model(models[i], path);
    const auto back = load_model(path);
    EXPECT_EQ(back, models[i]);
    for (const auto& e : ds.examples) EXPECT_EQ(back.raw_score(e.features), models[i].raw_score(e.features));
  }
}

TEST(PredictorModel, RejectsForeignJson) {
  EXPECT_THROW(model_from_json(nlohmann::json{{"format", "other"}}), Error);
  auto j = model_to_json(PredictorModel::constant(1, 1));
  j["version"] = 99;
  EXPECT_THROW(model_from_json(j), Error);
}

TEST(ModelKind, NamesRoundTrip) {
  for (auto k : {ModelKind::LinearSvm, ModelKind::RbfSvm, ModelKind::ReluNet})
    EXPECT_EQ(parse_model_kind(to_string(k)), k);
  EXPECT_EQ(parse_model_kind("relu"), ModelKind::ReluNet);
  EXPECT_THROW(parse_model_kind("tree"), Error);
}

}  // namespace
}  // namespace multical
