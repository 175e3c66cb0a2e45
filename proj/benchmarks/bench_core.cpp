#include <benchmark/benchmark.h>

#include <random>

#include "gsr/diagnosis.hpp"
#include "gsr/diff/ops.hpp"
#include "gsr/kuramoto.hpp"
#include "gsr/models.hpp"
#include "gsr/parallel.hpp"
#include "gsr/training.hpp"

namespace {

using namespace gsr;
using diff::Tensor;

std::vector<double> uniform(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

void BM_ConvForward(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const Tensor x = Tensor::from({8, 8, len}, uniform(64 * len, 1));
  const Tensor w = Tensor::from({8, 8, 7}, uniform(448, 2));
  const Tensor b = Tensor::from({8}, uniform(8, 3));
  diff::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(diff::causal_conv1d(x, w, b, 2));
  state.SetItemsProcessed(state.iterations() * 64 * len * 8 * 7);
}
BENCHMARK(BM_ConvForward)->Arg(200)->Arg(800);

void BM_ConvBackward(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  Tensor x = Tensor::parameter({8, 8, len}, uniform(64 * len, 1));
  Tensor w = Tensor::parameter({8, 8, 7}, uniform(448, 2));
  Tensor b = Tensor::parameter({8}, uniform(8, 3));
  for (auto _ : state) {
    x.zero_grad();
    w.zero_grad();
    b.zero_grad();
    diff::backward(diff::sum(diff::causal_conv1d(x, w, b, 2)));
  }
}
BENCHMARK(BM_ConvBackward)->Arg(200);

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = Tensor::from({n, n}, uniform(n * n, 4));
  const Tensor b = Tensor::from({n, n}, uniform(n * n, 5));
  diff::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(diff::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(8)->Arg(64)->Arg(200);

void BM_Simulate(benchmark::State& state) {
  kuramoto::KuramotoConfig cfg;
  const auto c = kuramoto::build_two_cluster_coupling(cfg);
  Rng rng(0);
  const auto init = kuramoto::draw_initial_state(cfg, rng);
  for (auto _ : state)
    benchmark::DoNotOptimize(kuramoto::simulate(cfg, c, 5 * cfg.window, init.phases, init.omegas));
}
BENCHMARK(BM_Simulate);

void BM_TrainingStep(benchmark::State& state) {
  const auto source = static_cast<models::GraphSource>(state.range(0));
  kuramoto::KuramotoConfig k;
  const auto c = kuramoto::build_two_cluster_coupling(k);
  const auto data = kuramoto::make_training_dataset(k, c, 16);
  training::TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  cfg.model_kind = source;
  for (auto _ : state) benchmark::DoNotOptimize(training::train(data.train, cfg, {}));
  state.SetLabel(std::string(models::to_string(source)));
}
BENCHMARK(BM_TrainingStep)
    ->Arg(static_cast<int>(models::GraphSource::reference))
    ->Arg(static_cast<int>(models::GraphSource::observation))
    ->Unit(benchmark::kMillisecond);

void BM_Diagnose(benchmark::State& state) {
  kuramoto::KuramotoConfig k;
  const auto c = kuramoto::build_two_cluster_coupling(k);
  const auto ref = models::GsrModel::create(models::GraphSource::reference, {}, k.n, 0);
  const auto obs = models::GsrModel::create(models::GraphSource::observation, {}, k.n, 0);
  const auto run = kuramoto::make_diagnosis_run(k, c, kuramoto::Decouple{0});
  for (auto _ : state) benchmark::DoNotOptimize(diagnosis::diagnose(run.signal, ref, obs, 0.5, {}, k.window));
}
BENCHMARK(BM_Diagnose)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  gsr::tune_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
