#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "smartaug/error.hpp"
#include "smartaug/trainer.hpp"

namespace smartaug {
namespace {

constexpr NetworkAOptions kTinyA{3};
constexpr NetworkB1Options kTinyB{4, 4, 16, 0.5};

std::vector<std::vector<double>> snapshot(const LayerGraph& g) {
  std::vector<std::vector<double>> out;
  for (const Parameter& p : g.parameters()) out.push_back(p.tensor.values());
  return out;
}

ParameterList joint_params(const NetworkB1& b, std::initializer_list<const NetworkA*> as) {
  ParameterList params = b.graph.parameters();
  for (const NetworkA* a : as) {
    auto pa = a->graph.parameters();
    params.insert(params.end(), pa.begin(), pa.end());
  }
  return params;
}

AugmentBatch make_batch(const Dataset& ds, std::vector<int> labels, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  return make_augment_batch(ds, ds.class_indices(), labels, k, rng);
}

TEST(CombinedLoss, HandValues) {
  EXPECT_DOUBLE_EQ(combined_loss(2.0, 1.0, {0.3, 0.7}), 1.3);
  EXPECT_DOUBLE_EQ(combined_loss(1.0, 1.0, {0.7, 0.3}), 1.0);
  EXPECT_EQ(combined_loss(5.0, 0.4, {0.0, 0.7}), 0.7 * 0.4);
}

TEST(CombinedLoss, Errors) {
  EXPECT_THROW(combined_loss(std::nan(""), 1.0, {0.3, 0.7}), std::domain_error);
  EXPECT_THROW(combined_loss(1.0, INFINITY, {0.3, 0.7}), std::domain_error);
  EXPECT_THROW(combined_loss(-1.0, 1.0, {0.3, 0.7}), std::domain_error);
  EXPECT_THROW(combined_loss(1.0, 1.0, {0.0, 0.0}), ConfigError);
  EXPECT_THROW(combined_loss(1.0, 1.0, {-0.1, 0.7}), ConfigError);
}

TEST(CombinedLoss, OneUlpOnRandomPairs) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 10.0), w(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), b = u(rng);
    const CombinedLossParams p{w(rng), w(rng)};
    const double expected = p.alpha * a + p.beta * b;
    const double got = combined_loss(a, b, p);
    EXPECT_LE(std::abs(got - expected), std::abs(std::nextafter(expected, INFINITY) - expected));
    const Tensor t = combined_loss(Tensor::scalar(a), Tensor::scalar(b), p);
    EXPECT_LE(std::abs(t.item() - expected), std::abs(std::nextafter(expected, INFINITY) - expected));
  }
}

TEST(CombinedLoss, TensorGradientsAreTheWeights) {
  Tensor a = Tensor::scalar(2.0, true), b = Tensor::scalar(1.0, true);
  backward(combined_loss(a, b, {0.3, 0.7}));
  EXPECT_EQ(a.grad()[0], 0.3);
  EXPECT_EQ(b.grad()[0], 0.7);
}

struct JointFixture {
  Dataset ds = gen_synthetic(6, 2, {8, 8}, 4);
  Rng init{11};
  NetworkA a = build_network_a(2, 1, {8, 8}, init, kTinyA);
  NetworkB1 b = build_network_b1(1, 2, {8, 8}, init, kTinyB);
};

TEST(JointStep, PerfectReconstructionLeavesOnlyTheClassifierTerm) {
  JointFixture f;
  AugmentBatch batch = make_batch(f.ds, {0, 1, 1}, 2, 3);
  Rng unused(0);
  batch.target_image = f.a.forward(batch.packed_input, Mode::kTrain, unused).clone();
  NesterovSgd opt(joint_params(f.b, {&f.a}), 1e-3, 0.9);
  Rng rng(5);
  const StepLosses s = joint_step(batch, f.a, f.b, {0.3, 0.7}, opt, rng);
  EXPECT_EQ(s.loss_a, 0.0);
  EXPECT_DOUBLE_EQ(s.total, 0.7 * s.loss_b);
}

TEST(JointStep, AlphaZeroMatchesPlainClassifierStep) {
  JointFixture f;
  const AugmentBatch batch = make_batch(f.ds, {1}, 2, 9);

  Rng init_copy(11);
  NetworkA a_ref = build_network_a(2, 1, {8, 8}, init_copy, kTinyA);
  NetworkB1 b_ref = build_network_b1(1, 2, {8, 8}, init_copy, kTinyB);
  Rng unused(0);
  const Tensor out1 = a_ref.forward(batch.packed_input, Mode::kTrain, unused).detach();
  const Tensor parts[] = {out1, batch.target_image};
  const int labels[] = {1, 1};
  NesterovSgd opt_ref(b_ref.graph.parameters(), 0.01, 0.9);
  Rng rng_ref(21);
  baseline_step(concat(parts), labels, b_ref, opt_ref, rng_ref);

  const auto a_before = snapshot(f.a.graph);
  NesterovSgd opt(joint_params(f.b, {&f.a}), 0.01, 0.9);
  Rng rng(21);
  joint_step(batch, f.a, f.b, {0.0, 1.0}, opt, rng);

  EXPECT_EQ(snapshot(f.b.graph), snapshot(b_ref.graph));
  EXPECT_NE(snapshot(f.a.graph), a_before) << "A must still learn through B's loss";
}

TEST(JointStep, BetaZeroLeavesClassifierUntouched) {
  JointFixture f;
  const AugmentBatch batch = make_batch(f.ds, {0, 1}, 2, 2);
  const auto b_before = snapshot(f.b.graph);
  const auto a_before = snapshot(f.a.graph);
  NesterovSgd opt(joint_params(f.b, {&f.a}), 0.01, 0.9);
  Rng rng(1);
  joint_step(batch, f.a, f.b, {1.0, 0.0}, opt, rng);
  EXPECT_EQ(snapshot(f.b.graph), b_before);
  EXPECT_NE(snapshot(f.a.graph), a_before);
}

double total_loss(const AugmentBatch& batch, NetworkA& a, NetworkB1& b, const CombinedLossParams& p,
                  std::uint64_t dropout_seed) {
  NoGradGuard guard;
  Rng rng(dropout_seed);
  const Tensor out1 = a.forward(batch.packed_input, Mode::kTrain, rng);
  const Tensor la = mse_loss(out1, batch.target_image);
  const Tensor parts[] = {out1, batch.target_image};
  const Tensor logits = b.forward(concat(parts), Mode::kTrain, rng);
  std::vector<int> labels = batch.class_label;
  labels.insert(labels.end(), batch.class_label.begin(), batch.class_label.end());
  return combined_loss(la.item(), softmax_cross_entropy(logits, labels).item(), p);
}

TEST(JointStep, SmallStepDescendsOverTenSeeds) {
  const Dataset ds = gen_synthetic(8, 2, {8, 8}, 6);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng init(seed);
    NetworkA a = build_network_a(2, 1, {8, 8}, init, kTinyA);
    NetworkB1 b = build_network_b1(1, 2, {8, 8}, init, kTinyB);
    const AugmentBatch batch = make_batch(ds, {0, 1, 0, 1}, 2, seed);
    const CombinedLossParams p{0.3, 0.7};
    const double before = total_loss(batch, a, b, p, 100 + seed);
    NesterovSgd opt(joint_params(b, {&a}), 1e-3, 0.9);
    Rng rng(100 + seed);
    const StepLosses s = joint_step(batch, a, b, p, opt, rng);
    EXPECT_DOUBLE_EQ(s.total, before);
    const double after = total_loss(batch, a, b, p, 100 + seed);
    EXPECT_LT(after, before) << "seed " << seed;
  }
}

struct MultiFixture {
  Dataset ds = gen_synthetic(6, 2, {8, 8}, 8);
  Rng init{12};
  NetworkA a0 = build_network_a(2, 1, {8, 8}, init, kTinyA);
  NetworkA a1 = build_network_a(2, 1, {8, 8}, init, kTinyA);
  NetworkB1 b = build_network_b1(1, 2, {8, 8}, init, kTinyB);
  std::map<int, NetworkA*> augmenters{{0, &a0}, {1, &a1}};
};

TEST(MultiAStep, SingleClassBatchEqualsJointStep) {
  MultiFixture m;
  MultiFixture j;
  const AugmentBatch batch = make_batch(m.ds, {1, 1, 1}, 2, 4);
  NesterovSgd opt_m(joint_params(m.b, {&m.a0, &m.a1}), 0.01, 0.9);
  NesterovSgd opt_j(joint_params(j.b, {&j.a1}), 0.01, 0.9);
  Rng rm(3), rj(3);
  const StepLosses sm = multi_a_step(batch, m.augmenters, m.b, {0.3, 0.7}, opt_m, rm);
  const StepLosses sj = joint_step(batch, j.a1, j.b, {0.3, 0.7}, opt_j, rj);
  EXPECT_EQ(sm.loss_a, sj.loss_a);
  EXPECT_EQ(sm.loss_b, sj.loss_b);
  EXPECT_EQ(sm.total, sj.total);
  EXPECT_EQ(snapshot(m.b.graph), snapshot(j.b.graph));
  EXPECT_EQ(snapshot(m.a1.graph), snapshot(j.a1.graph));
}

TEST(MultiAStep, OtherClassAugmenterReceivesNoGradient) {
  MultiFixture m;
  const AugmentBatch batch = make_batch(m.ds, {1, 1}, 2, 5);
  const auto a0_before = snapshot(m.a0.graph);
  const auto a1_before = snapshot(m.a1.graph);
  NesterovSgd opt(joint_params(m.b, {&m.a0, &m.a1}), 0.01, 0.9);
  Rng rng(1);
  multi_a_step(batch, m.augmenters, m.b, {0.3, 0.7}, opt, rng);
  EXPECT_EQ(snapshot(m.a0.graph), a0_before);
  EXPECT_NE(snapshot(m.a1.graph), a1_before);
  EXPECT_EQ(m.a0.graph.forward_calls(), 0u);
}

TEST(MultiAStep, BalancedBatchAveragesPerClassMse) {
  MultiFixture m;
  const AugmentBatch batch = make_batch(m.ds, {0, 1, 1, 0}, 2, 6);
  const auto parts = route_by_class(batch, m.augmenters);
  Rng unused(0);
  double mse[2];
  {
    NoGradGuard guard;
    for (int c = 0; c < 2; ++c) {
      const Tensor out = m.augmenters[c]->forward(parts[c].batch.packed_input, Mode::kTrain, unused);
      mse[c] = mse_loss(out, parts[c].batch.target_image).item();
    }
  }
  NesterovSgd opt(joint_params(m.b, {&m.a0, &m.a1}), 0.01, 0.9);
  Rng rng(2);
  const StepLosses s = multi_a_step(batch, m.augmenters, m.b, {0.3, 0.7}, opt, rng);
  EXPECT_NEAR(s.loss_a, (mse[0] + mse[1]) / 2.0, 1e-15);
}

TEST(BaselineStep, UniformLogitsGiveLn2) {
  Rng init(1);
  NetworkB1 b = build_network_b1(1, 2, {8, 8}, init, kTinyB);
  for (const Parameter& p : b.graph.parameters()) {
    if (p.name.rfind("b_fc2", 0) == 0) {
      Tensor t = p.tensor;
      std::fill(t.data().begin(), t.data().end(), 0.0);
    }
  }
  const Dataset ds = gen_synthetic(2, 2, {8, 8}, 1);
  const std::size_t idx[] = {0, 1, 2, 3};
  NesterovSgd opt(b.graph.parameters(), 0.01, 0.9);
  Rng rng(1);
  EXPECT_NEAR(baseline_step(ds.batch_images(idx), ds.batch_labels(idx), b, opt, rng), std::log(2.0), 1e-15);
}

TEST(BaselineStep, ConfidentCorrectLogitsBarelyMove) {
  Rng init(1);
  NetworkB1 b = build_network_b1(1, 2, {8, 8}, init, kTinyB);
  for (const Parameter& p : b.graph.parameters()) {
    Tensor t = p.tensor;
    if (p.name == "b_fc2.weight") std::fill(t.data().begin(), t.data().end(), 0.0);
    if (p.name == "b_fc2.bias") {
      t.at(0) = 60.0;
      t.at(1) = -60.0;
    }
  }
  const Tensor images(Shape{3, 1, 8, 8}, 0.4);
  const int labels[] = {0, 0, 0};
  const auto before = snapshot(b.graph);
  NesterovSgd opt(b.graph.parameters(), 0.01, 0.9);
  Rng rng(1);
  EXPECT_LT(baseline_step(images, labels, b, opt, rng), 1e-40);
  const auto after = snapshot(b.graph);
  for (std::size_t i = 0; i < before.size(); ++i) {
    for (std::size_t j = 0; j < before[i].size(); ++j) EXPECT_NEAR(after[i][j], before[i][j], 1e-40);
  }
}

// Class 0 is brighter on the left half, class 1 on the right half; the sign
// of (left sum - right sum) separates them linearly.
Dataset half_bright_dataset(std::size_t per_class, std::size_t side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dark(0.0, 0.45), bright(0.55, 1.0);
  Dataset ds;
  ds.channels = 1;
  ds.height = ds.width = side;
  ds.class_names = {"left", "right"};
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const int label = static_cast<int>(i % 2);
    std::vector<double> px(side * side);
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) {
        const bool left = x < side / 2;
        px[y * side + x] = (left == (label == 0)) ? bright(rng) : dark(rng);
      }
    }
    ds.samples.push_back({Tensor(Shape{1, side, side}, std::move(px)), label, std::nullopt});
  }
  return ds;
}

TEST(BaselineStep, LearnsSeparableSyntheticSet) {
  const Dataset ds = half_bright_dataset(64, 16, 2);
  Rng init(3);
  NetworkB1 b = build_network_b1(1, 2, {16, 16}, init, {4, 8, 32, 0.5});
  NesterovSgd opt(b.graph.parameters(), 0.01, 0.9);
  Rng rng(4);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> losses;
  for (int step = 0; step < 50; ++step) {
    std::shuffle(order.begin(), order.end(), rng);
    const std::span<const std::size_t> idx(order.data(), 32);
    losses.push_back(baseline_step(ds.batch_images(idx), ds.batch_labels(idx), b, opt, rng));
  }
  const double first = (losses[0] + losses[1] + losses[2] + losses[3] + losses[4]) / 5;
  const double last = (losses[45] + losses[46] + losses[47] + losses[48] + losses[49]) / 5;
  EXPECT_LT(last, first);
  EXPECT_GT(validate(b, ds).accuracy, 0.95);
}

TEST(Validate, MemorizedTrainingSetScoresPerfectly) {
  const Dataset ds = gen_synthetic(8, 2, {8, 8}, 3);
  Rng init(5);
  NetworkB1 b = build_network_b1(1, 2, {8, 8}, init, {4, 8, 32, 0.0});
  NesterovSgd opt(b.graph.parameters(), 0.01, 0.9);
  Rng rng(1);
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), 0);
  for (int step = 0; step < 200; ++step) baseline_step(ds.batch_images(all), ds.batch_labels(all), b, opt, rng);
  EXPECT_EQ(validate(b, ds).accuracy, 1.0);
}

TEST(Validate, RandomLabelsGiveChanceAccuracy) {
  Dataset ds = gen_synthetic(500, 2, {8, 8}, 4);
  std::mt19937_64 coin(7);
  for (Sample& s : ds.samples) s.label = static_cast<int>(coin() & 1);
  Rng init(6);
  NetworkB1 b = build_network_b1(1, 2, {8, 8}, init, kTinyB);
  const ValidationResult r = validate(b, ds);
  EXPECT_NEAR(r.accuracy, 0.5, 0.05);
  EXPECT_TRUE(std::isfinite(r.loss));
}

TEST(Validate, IndependentOfAttachedAugmenterAndBatching) {
  const Dataset ds = gen_synthetic(30, 2, {8, 8}, 5);
  JointFixture f;
  const ValidationResult alone = validate(f.b, ds);
  const AugmentBatch batch = make_batch(f.ds, {0, 1}, 2, 1);
  Rng rng(0);
  f.a.forward(batch.packed_input, Mode::kTrain, rng);
  const std::size_t calls = f.a.graph.forward_calls();
  const ValidationResult attached = validate(f.b, ds);
  EXPECT_EQ(f.a.graph.forward_calls(), calls);
  EXPECT_EQ(alone.loss, attached.loss);
  EXPECT_EQ(alone.accuracy, attached.accuracy);
  EXPECT_NEAR(validate(f.b, ds, 7).loss, alone.loss, 1e-12);
  EXPECT_EQ(validate(f.b, ds, 7).accuracy, alone.accuracy);
}

TEST(Validate, EmptySetIsAnError) {
  JointFixture f;
  Dataset empty = f.ds.subset({});
  EXPECT_THROW(validate(f.b, empty), ConfigError);
}

DatasetSplits tiny_splits() {
  return {gen_synthetic(12, 2, {8, 8}, 1), gen_synthetic(5, 2, {8, 8}, 2), gen_synthetic(4, 2, {8, 8}, 3)};
}

TrainingConfig tiny_config(AugmentMode mode, std::size_t epochs) {
  TrainingConfig c;
  c.mode = mode;
  c.epochs = epochs;
  c.batch_size = 8;
  c.seed = 42;
  c.a_options = kTinyA;
  c.b_options = kTinyB;
  return c;
}

TEST(RunTraining, ZeroEpochsTestsTheUntrainedNetwork) {
  const DatasetSplits data = tiny_splits();
  const TrainState st = run_training(tiny_config(AugmentMode::kSingleA, 0), data);
  EXPECT_TRUE(st.metrics.empty());
  EXPECT_FALSE(st.best_epoch.has_value());
  EXPECT_TRUE(st.best_checkpoint.empty());
  Rng init = make_rng(42, 1);
  NetworkB1 fresh = build_network_b1(1, 2, {8, 8}, init, kTinyB);
  EXPECT_EQ(st.test_accuracy, validate(fresh, data.test).accuracy);
}

TEST(RunTraining, SameSeedSameMetrics) {
  const DatasetSplits data = tiny_splits();
  for (AugmentMode mode : {AugmentMode::kBaseline, AugmentMode::kSingleA, AugmentMode::kMultiA}) {
    const TrainState a = run_training(tiny_config(mode, 3), data);
    const TrainState b = run_training(tiny_config(mode, 3), data);
    EXPECT_EQ(metrics_to_csv(a.metrics, a.test_accuracy), metrics_to_csv(b.metrics, b.test_accuracy));
  }
}

TEST(RunTraining, SelectsBestValidationEpochNotFinal) {
  const DatasetSplits data = tiny_splits();
  const std::vector<double> trajectory = {0.9, 0.4, 0.6, 0.4, 0.8};
  TrainingHooks hooks;
  hooks.validator = [&](NetworkB1&, const Dataset&, std::size_t epoch) {
    return ValidationResult{trajectory[epoch], 0.5};
  };
  const TrainState st = run_training(tiny_config(AugmentMode::kSingleA, 5), data, hooks);
  ASSERT_TRUE(st.best_epoch.has_value());
  EXPECT_EQ(*st.best_epoch, 1u);
  EXPECT_EQ(st.best_validation_loss, 0.4);
  EXPECT_EQ(st.best_validation_history, (std::vector<double>{0.9, 0.4, 0.4, 0.4, 0.4}));
  ASSERT_EQ(st.tested_network_b.size(), st.best_checkpoint.size());
  for (std::size_t i = 0; i < st.best_checkpoint.size(); ++i) {
    EXPECT_EQ(st.tested_network_b[i].tensor.values(), st.best_checkpoint[i].tensor.values());
  }
  for (std::size_t e = 0; e < st.metrics.size(); ++e) {
    EXPECT_EQ(st.metrics[e].test_accuracy_at_best.has_value(), e == 1);
  }
  EXPECT_EQ(*st.metrics[1].test_accuracy_at_best, st.test_accuracy);

  // Equal later losses do not replace the earlier best.
  EXPECT_EQ(st.metrics[3].val_loss_b, 0.4);
}

TEST(RunTraining, BestValidationLossNeverIncreases) {
  const TrainState st = run_training(tiny_config(AugmentMode::kSingleA, 6), tiny_splits());
  for (std::size_t i = 1; i < st.best_validation_history.size(); ++i) {
    EXPECT_LE(st.best_validation_history[i], st.best_validation_history[i - 1]);
  }
  EXPECT_EQ(st.best_validation_loss, st.metrics[*st.best_epoch].val_loss_b);
}

TEST(RunTraining, EvaluationNeverRunsNetworkA) {
  for (AugmentMode mode : {AugmentMode::kSingleA, AugmentMode::kMultiA}) {
    const TrainState st = run_training(tiny_config(mode, 2), tiny_splits());
    EXPECT_GT(st.a_forward_passes_training, 0u);
    EXPECT_EQ(st.a_forward_passes_during_eval, 0u);
  }
}

TEST(RunTraining, ModeContracts) {
  const DatasetSplits data = tiny_splits();
  const TrainState base = run_training(tiny_config(AugmentMode::kBaseline, 2), data);
  for (const MetricsRecord& r : base.metrics) {
    EXPECT_FALSE(r.train_loss_a.has_value());
    EXPECT_EQ(r.train_loss_total, r.train_loss_b);
  }
  EXPECT_TRUE(base.network_a_states.empty());

  const TrainState smart = run_training(tiny_config(AugmentMode::kSingleA, 2), data);
  for (const MetricsRecord& r : smart.metrics) EXPECT_TRUE(r.train_loss_a.has_value());
  EXPECT_EQ(smart.network_a_states.count(-1), 1u);

  const TrainState multi = run_training(tiny_config(AugmentMode::kMultiA, 1), data);
  EXPECT_EQ(multi.network_a_states.size(), 2u);
  EXPECT_EQ(multi.network_a_states.count(0) + multi.network_a_states.count(1), 2u);
}

TEST(RunTraining, InconsistenciesReportedBeforeTraining) {
  DatasetSplits data = tiny_splits();
  std::size_t epochs_seen = 0;
  TrainingHooks hooks;
  hooks.on_epoch = [&](const MetricsRecord&) { ++epochs_seen; };

  DatasetSplits small = data;
  small.train = gen_synthetic(2, 2, {8, 8}, 1);
  TrainingConfig cfg = tiny_config(AugmentMode::kSingleA, 3);
  cfg.k = 2;
  try {
    run_training(cfg, small, hooks);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("needs at least 3"), std::string::npos) << e.what();
  }

  DatasetSplits mismatched = data;
  mismatched.val = gen_synthetic(5, 2, {12, 12}, 2);
  EXPECT_THROW(run_training(cfg, mismatched, hooks), ConfigError);
  DatasetSplits no_test = data;
  no_test.test = data.test.subset({});
  EXPECT_THROW(run_training(cfg, no_test, hooks), ConfigError);
  TrainingConfig bad = cfg;
  bad.loss = {0.0, 0.0};
  EXPECT_THROW(run_training(bad, data, hooks), ConfigError);
  EXPECT_EQ(epochs_seen, 0u);
}

TEST(TrainingConfig, LinearLossSchedule) {
  TrainingConfig c;
  c.epochs = 5;
  c.loss = {0.3, 0.7};
  EXPECT_EQ(c.loss_at_epoch(3).alpha, 0.3);
  c.final_loss = CombinedLossParams{0.7, 0.3};
  EXPECT_DOUBLE_EQ(c.loss_at_epoch(0).alpha, 0.3);
  EXPECT_DOUBLE_EQ(c.loss_at_epoch(2).alpha, 0.5);
  EXPECT_DOUBLE_EQ(c.loss_at_epoch(2).beta, 0.5);
  EXPECT_DOUBLE_EQ(c.loss_at_epoch(4).alpha, 0.7);
}

}  // namespace
}  // namespace smartaug
