#include <benchmark/benchmark.h>

#include <random>

#include "dkstn/adam.hpp"
#include "dkstn/model.hpp"
#include "dkstn/taam.hpp"
#include "dkstn/training.hpp"

using namespace dkstn;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> d(0.0, 1.0);
  for (auto& v : t.data()) v = d(rng);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const Tensor a = random_tensor({n, n}, rng), b = random_tensor({n, n}, rng);
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(matmul(tape.constant(a), tape.constant(b)).value());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

// First SRCM layer on the full 13 x 144 grid: 4 -> 16 channels, 7x7, stride 2.
void BM_Conv2dForwardBackward(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor({8, 4, 13, 144}, rng);
  Parameter k("k", random_tensor({16, 4, 7, 7}, rng));
  for (auto _ : state) {
    Tape tape;
    Var y = sum(conv2d(tape.constant(x), tape.param(k), std::nullopt, 2, 3));
    tape.backward(y);
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Unit(benchmark::kMillisecond);

void BM_LstmCell(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  LstmWeights w = init_lstm("cell", d, d, rng);
  const Tensor x = random_tensor({16, d}, rng), h = random_tensor({16, d}, rng);
  for (auto _ : state) {
    Tape tape;
    LstmState s = lstm_cell(tape.constant(x), {tape.constant(h), tape.constant(h)},
                            tape.param(w.weight), tape.param(w.bias));
    benchmark::DoNotOptimize(s.h.value());
  }
}
BENCHMARK(BM_LstmCell)->Arg(32)->Arg(256);

void BM_TrainStep(benchmark::State& state) {
  ModelConfig cfg;
  cfg.lon = 36;
  cfg.srcm.layers = 2;
  cfg.srcm.channels = 8;
  cfg.srcm.projection_dim = 32;
  cfg.taam.k = 7;
  cfg.taam.n = 10;
  cfg.taam.hidden = 32;
  DkstnModel model(cfg, 4);
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor({16, 7, cfg.lat, cfg.lon, cfg.channels}, rng);
  const Tensor y = random_tensor({16, 10, 2}, rng);
  AdamState adam;
  adam.config.learning_rate = 1e-4;
  const auto params = model.parameters();
  for (auto _ : state) {
    model.zero_grad();
    Tape tape;
    Var loss = loss_overall(model.forward(tape.constant(x)), y, 0.5, 0.5);
    tape.backward(loss);
    adam_step(params, adam);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
