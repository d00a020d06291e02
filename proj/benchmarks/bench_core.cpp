#include <benchmark/benchmark.h>

#include "neurodecode/model.hpp"
#include "neurodecode/ops.hpp"
#include "neurodecode/preprocess.hpp"
#include "neurodecode/training.hpp"

using namespace nd;

namespace {

SensorLayout random_layout(int n) {
  Rng rng(7, 0);
  SensorLayout l;
  for (int i = 0; i < n; ++i) l.positions.push_back({rng.uniform(), rng.uniform()});
  return l;
}

void bm_matmul(benchmark::State& state) {
  auto n = state.range(0);
  Rng rng(1, 0);
  Tensor a = Tensor::randn({n, n}, rng);
  Tensor b = Tensor::randn({n, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}
BENCHMARK(bm_matmul)->Arg(64)->Arg(256);

void bm_conv1d(benchmark::State& state) {
  Rng rng(2, 0);
  Tensor x = Tensor::randn({64, 300}, rng);
  Tensor w = Tensor::randn({64, 64, 3}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv1d(x, w, state.range(0)));
}
BENCHMARK(bm_conv1d)->Arg(1)->Arg(16);

void bm_decimate(benchmark::State& state) {
  Rng rng(3, 0);
  Tensor x = Tensor::randn({16, 150000}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(decimate_moving_average(x, 5));
}
BENCHMARK(bm_decimate);

void bm_model_forward(benchmark::State& state) {
  ModelConfig cfg;
  cfg.c_in = 16;
  cfg.d1 = 32;
  cfg.d2 = 32;
  cfg.n_blocks = 2;
  cfg.k_harmonics = 8;
  cfg.rnn_hidden = 16;
  cfg.f_out = 8;
  Model m(cfg, {"S01"}, random_layout(16), 5);
  Rng rng(4, 0);
  Tensor x = Tensor::randn({16, 300}, rng);
  Rng drng(0, 0);
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(x, "S01", false, drng));
}
BENCHMARK(bm_model_forward);

void bm_train_step(benchmark::State& state) {
  ModelConfig cfg;
  cfg.c_in = 8;
  cfg.d1 = 16;
  cfg.d2 = 16;
  cfg.n_blocks = 2;
  cfg.k_harmonics = 4;
  cfg.rnn_hidden = 8;
  cfg.f_out = 8;
  cfg.spatial_dropout_p = 0.0;
  Model m(cfg, {"S01"}, random_layout(8), 6);
  Rng rng(5, 0);
  WindowDataset ds;
  ds.feature_rate_hz = 100.0;
  ds.subjects = {"S01"};
  for (int i = 0; i < 8; ++i) {
    WindowPair w;
    w.subject_id = "S01";
    w.eeg = Tensor::randn({8, 300}, rng);
    w.audio = Tensor::randn({8, 300}, rng);
    w.window_index = i;
    ds.windows.push_back(std::move(w));
  }
  TrainConfig tc;
  tc.batch_size = 8;
  Adam opt(m.parameters(), tc.lr);
  std::vector<std::size_t> batch = {0, 1, 2, 3, 4, 5, 6, 7};
  std::int64_t step = 0;
  for (auto _ : state) benchmark::DoNotOptimize(train_step(m, opt, ds, batch, tc, 1, step++));
}
BENCHMARK(bm_train_step);

}  // namespace

BENCHMARK_MAIN();
