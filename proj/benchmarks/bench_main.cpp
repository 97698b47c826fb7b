#include <benchmark/benchmark.h>

#include "wsol/attention.hpp"
#include "wsol/dataset.hpp"
#include "wsol/metrics.hpp"
#include "wsol/model.hpp"
#include "wsol/ops.hpp"
#include "wsol/trainer.hpp"

using namespace wsol;

namespace {

Tensor gaussian(Shape shape, std::uint64_t seed) {
  CounterRng rng(seed);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.gaussian();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = gaussian({n, n}, 1), b = gaussian({n, n}, 2);
  for (auto _ : state) {
    Graph g;
    benchmark::DoNotOptimize(matmul(g.input(a), g.input(b)).value()[0]);
  }
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

void BM_EnhancedAttention(benchmark::State& state) {
  const auto s = static_cast<std::size_t>(state.range(0));
  const bool backward = state.range(1) != 0;
  const Tensor x = gaussian({16, s, s}, 3);
  const NonLocalParams p = NonLocalParams::init(16, 2, 4);
  for (auto _ : state) {
    Graph g;
    const Var a = enhanced_attention(g.parameter(x), g.parameter(p.w_f), g.parameter(p.w_g), g.parameter(p.w_z));
    if (backward) g.backward(sum_all(square(a)));
    benchmark::DoNotOptimize(a.value()[0]);
  }
}
BENCHMARK(BM_EnhancedAttention)->Args({8, 0})->Args({16, 0})->Args({16, 1});

void BM_TrainStep(benchmark::State& state) {
  SynthConfig sc;
  sc.n_train = 32;
  const auto data = generate_split(sc, Split::train);
  std::vector<const SynthSample*> batch;
  for (const auto& s : data) batch.push_back(&s);
  TrainConfig tc;
  TinyBackbone model = TinyBackbone::init(tc.model, 1);
  SgdMomentum opt(model);
  const ForwardConfig fwd = tc.forward_config();
  std::uint64_t step = 0;
  for (auto _ : state) {
    const BatchResult br = batch_gradients(model, batch, fwd, CounterRng(7, ++step));
    opt.step(model, br.gradients, 0.0, tc.momentum, 0.0);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 32);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_MaxBoxAccV2(benchmark::State& state) {
  SynthConfig sc;
  sc.n_test = static_cast<std::size_t>(state.range(0));
  const auto test = generate_split(sc, Split::test);
  std::vector<ScoreMap> maps;
  for (const auto& s : test) {
    Tensor m({64, 64});
    for (std::size_t i = 0; i < m.numel(); ++i) m[i] = s.image[i];
    maps.push_back({s.image_id, std::move(m)});
  }
  const BoxSets gt = ground_truth(test);
  for (auto _ : state) benchmark::DoNotOptimize(max_box_acc_v2(maps, gt).mean);
}
BENCHMARK(BM_MaxBoxAccV2)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
