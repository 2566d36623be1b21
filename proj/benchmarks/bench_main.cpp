#include <benchmark/benchmark.h>

#include "ilpc/dsp.hpp"
#include "ilpc/io.hpp"
#include "ilpc/layers.hpp"
#include "ilpc/lpmdn.hpp"
#include "ilpc/model.hpp"
#include "ilpc/trainer.hpp"

namespace {

using namespace ilpc;

void BM_PredictSample(benchmark::State& state) {
  Rng rng(7);
  std::vector<double> coeffs(16);
  for (double& c : coeffs) c = 0.05 * rng.normal();
  LpFilter filter(coeffs);
  for (double& h : filter.history) h = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(predict_sample(filter));
}
BENCHMARK(BM_PredictSample);

void BM_GruStep(benchmark::State& state) {
  Rng rng(7);
  const std::size_t in = 129, hidden = state.range(0);
  GruLayer gru = GruLayer::create("g", in, hidden, rng);
  GruState s(hidden);
  std::vector<double> x(in);
  for (double& v : x) v = rng.normal();
  for (auto _ : state) gru_apply(gru, s, x.data());
}
BENCHMARK(BM_GruStep)->Arg(64)->Arg(256);

void BM_Stft(benchmark::State& state) {
  Rng rng(7);
  std::vector<double> x(24000);
  for (double& v : x) v = 0.3 * rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(stft(x));
}
BENCHMARK(BM_Stft);

void BM_MogNll(benchmark::State& state) {
  MogParams dist{{0.5, 0.5}, {-0.1, 0.2}, {0.05, 0.3}};
  double x = 0.1;
  for (auto _ : state) benchmark::DoNotOptimize(mog_nll(dist, x));
}
BENCHMARK(BM_MogNll);

void BM_TrainStep(benchmark::State& state) {
  FrameConfig fcfg;
  auto corpus = synth_corpus(2, 0.5, 11, fcfg);
  TrainConfig tcfg;
  tcfg.batch_size = state.range(0);
  Rng rng(1);
  Trainer trainer(Model::create(ModelConfig::desk(), rng), tcfg);
  ChunkSchedule schedule(corpus, tcfg);
  for (auto _ : state) {
    Batch b = assemble_batch(corpus, schedule.batch_for_step(0), trainer.model().cfg,
                             tcfg, tcfg.noise_sigma, trainer.rng());
    benchmark::DoNotOptimize(trainer.train_step(b));
  }
}
BENCHMARK(BM_TrainStep)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
