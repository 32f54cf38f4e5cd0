#include <benchmark/benchmark.h>

#include "smartaug/runtime.hpp"
#include "smartaug/trainer.hpp"

namespace {

using namespace smartaug;

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// args: batch, in channels, filters, spatial size
void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto c = static_cast<std::size_t>(state.range(1));
  const auto f = static_cast<std::size_t>(state.range(2));
  const auto s = static_cast<std::size_t>(state.range(3));
  Rng rng(1);
  Tensor x = random_tensor({n, c, s, s}, rng, true);
  Tensor w = random_tensor({f, c, 3, 3}, rng, true);
  Tensor b = random_tensor({f}, rng, true);
  for (auto _ : state) {
    Tensor loss = sum(conv2d(x, w, b, Padding::kSame));
    backward(loss);
    benchmark::DoNotOptimize(w.grad().data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * n));
}
BENCHMARK(BM_Conv2dForwardBackward)->Args({32, 1, 8, 32})->Args({16, 8, 8, 32})->Args({32, 8, 16, 16});

void BM_Conv2dInfer(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Tensor x = random_tensor({n, 1, 32, 32}, rng, false);
  Tensor w = random_tensor({16, 1, 3, 3}, rng, false);
  Tensor b = random_tensor({16}, rng, false);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, Padding::kSame).data().data());
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * n));
}
BENCHMARK(BM_Conv2dInfer)->Arg(1)->Arg(32);

void BM_BatchNormTrain(benchmark::State& state) {
  Rng rng(2);
  Tensor x = random_tensor({32, 8, 32, 32}, rng, true);
  Tensor gamma(Shape{8}, 1.0, true);
  Tensor beta(Shape{8}, 0.0, true);
  BatchNormStats stats(8);
  for (auto _ : state) {
    backward(sum(batchnorm2d(x, gamma, beta, Mode::kTrain, stats)));
  }
}
BENCHMARK(BM_BatchNormTrain);

// args: batch, input dim, units
void BM_Dense(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const auto u = static_cast<std::size_t>(state.range(2));
  Rng rng(3);
  Tensor x = random_tensor({n, d}, rng, true);
  Tensor w = random_tensor({d, u}, rng, true);
  Tensor b = random_tensor({u}, rng, true);
  for (auto _ : state) {
    backward(sum(dense(x, w, b)));
    benchmark::DoNotOptimize(w.grad().data());
  }
}
BENCHMARK(BM_Dense)->Args({32, 2048, 1024})->Args({32, 512, 64});

struct StepFixture {
  Dataset train = gen_synthetic(40, 2, {32, 32}, 7);
  Rng rng{5};
  NetworkA net_a;
  NetworkB1 net_b;
  std::vector<std::vector<std::size_t>> members = train.class_indices();

  explicit StepFixture(std::size_t a_filters, NetworkB1Options b_options) {
    Rng init(9);
    net_a = build_network_a(2, 1, {32, 32}, init, {a_filters});
    net_b = build_network_b1(1, 2, {32, 32}, init, b_options);
  }
};

// args: Network A filters, B conv1, B conv2, B hidden units
void BM_JointStep(benchmark::State& state) {
  StepFixture fx(static_cast<std::size_t>(state.range(0)),
                 {static_cast<std::size_t>(state.range(1)), static_cast<std::size_t>(state.range(2)),
                  static_cast<std::size_t>(state.range(3)), 0.5});
  ParameterList params = fx.net_b.graph.parameters();
  for (auto& p : fx.net_a.graph.parameters()) params.push_back(p);
  NesterovSgd opt(params, 0.01, 0.9);
  std::vector<int> labels(16);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 2);
  for (auto _ : state) {
    AugmentBatch batch = make_augment_batch(fx.train, fx.members, labels, 2, fx.rng);
    benchmark::DoNotOptimize(joint_step(batch, fx.net_a, fx.net_b, {}, opt, fx.rng).total);
  }
}
BENCHMARK(BM_JointStep)->Args({8, 8, 16, 64})->Args({16, 16, 32, 1024})->Unit(benchmark::kMillisecond);

void BM_BaselineStep(benchmark::State& state) {
  StepFixture fx(8, {static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)),
                     static_cast<std::size_t>(state.range(2)), 0.5});
  NesterovSgd opt(fx.net_b.graph.parameters(), 0.01, 0.9);
  std::vector<std::size_t> idx(32);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const Tensor images = fx.train.batch_images(idx);
  const auto labels = fx.train.batch_labels(idx);
  for (auto _ : state) benchmark::DoNotOptimize(baseline_step(images, labels, fx.net_b, opt, fx.rng));
}
BENCHMARK(BM_BaselineStep)->Args({8, 16, 64})->Args({16, 32, 1024})->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  smartaug::configure_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
