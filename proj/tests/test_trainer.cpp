#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <unistd.h>
#include <vector>

#include "ilpc/dsp.hpp"
#include "ilpc/io.hpp"
#include "ilpc/trainer.hpp"

using namespace ilpc;

namespace {

ModelConfig small_model() {
  ModelConfig cfg = ModelConfig::desk();
  cfg.context_dim = 16;
  cfg.gru1_dim = 16;
  cfg.gru2_dim = 4;
  return cfg;
}

TrainConfig small_train() {
  TrainConfig cfg;
  cfg.chunk_len = 480;
  cfg.batch_size = 2;
  cfg.fft_size = 256;
  return cfg;
}

// x_n = rho * x_{n-1} + noise, peak-normalized; a maximally predictable corpus.
std::vector<CorpusItem> ar1_corpus(std::size_t n_utt, double seconds, std::uint64_t seed) {
  FrameConfig fcfg;
  Rng rng(seed);
  std::vector<CorpusItem> out;
  for (std::size_t u = 0; u < n_utt; ++u) {
    AudioBuffer a;
    a.samples.resize(static_cast<std::size_t>(seconds * 24000));
    double x = 0.0, peak = 0.0;
    for (double& v : a.samples) {
      x = 0.9 * x + 0.05 * rng.normal();
      v = x;
      peak = std::max(peak, std::abs(x));
    }
    for (double& v : a.samples) v *= 0.4 / peak;
    out.push_back({a, extract_features(a, fcfg)});
  }
  return out;
}

}  // namespace

TEST_CASE("total_loss: decomposition arithmetic") {
  LossBreakdown l = total_loss(1.0, 0.05, 10.0);
  CHECK(l.total == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(total_loss(0.7, 0.3, 0.0).total == 0.7);
  CHECK(std::abs(l.total - (l.nll + 10.0 * l.power)) < 1e-12);
  CHECK_THROWS(total_loss(std::nan(""), 0.0, 1.0));
}

TEST_CASE("inject_noise: zero sigma is the identity and draws nothing") {
  Rng rng(1);
  std::vector<double> x{0.1, -0.2, 0.3};
  Rng before = rng;
  CHECK(inject_noise(x, 0.0, rng) == x);
  CHECK(rng.normal() == before.normal());
}

TEST_CASE("inject_noise: empirical std matches sigma") {
  Rng rng(2);
  const double sigma = 4.0 / 65536.0;
  std::vector<double> zeros(1000000, 0.0);
  auto noisy = inject_noise(zeros, sigma, rng);
  double sq = 0.0;
  for (double v : noisy) sq += v * v;
  const double stddev = std::sqrt(sq / noisy.size());
  CHECK(stddev == doctest::Approx(sigma).epsilon(0.05));
}

TEST_CASE("power loss: zero for a perfect reconstruction, spectrum energy for silence") {
  Rng rng(3);
  const std::size_t S = 512 + 2 * 120;
  std::vector<double> clean(S);
  for (double& v : clean) v = 0.3 * rng.normal();
  Tensor ref = stft(clean, 512, 120);

  Graph g;
  Tensor xhat(S, 1);
  for (std::size_t i = 0; i < S; ++i) xhat(i, 0) = clean[i];
  int xnode = g.input(S, 1);
  int loss = power_loss_graph(g, xnode, g.constant(ref), 1, S, 512, 120);
  g.set_input(xnode, xhat);
  g.forward();
  CHECK(g.value(loss)[0] < 1e-18);

  g.set_input(xnode, Tensor(S, 1));
  g.forward();
  double mean_sq = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) mean_sq += ref[i] * ref[i];
  mean_sq /= ref.size();
  CHECK(g.value(loss)[0] == doctest::Approx(mean_sq).epsilon(1e-9));
}

TEST_CASE("schedule: chunk shape, determinism, epoch coverage") {
  auto corpus = ar1_corpus(3, 1.0, 4);
  TrainConfig cfg = small_train();
  ChunkSchedule sched(corpus, cfg);

  // 200 frames per utterance, 4 frames per 480-sample chunk -> 50 chunks each
  CHECK(sched.chunks().size() == 150);

  ChunkSchedule sched2(corpus, cfg);
  for (int step = 0; step < 5; ++step) {
    auto a = sched.batch_for_step(step);
    auto b = sched2.batch_for_step(step);
    REQUIRE(a.size() == cfg.batch_size);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].utterance == b[i].utterance);
      CHECK(a[i].start_frame == b[i].start_frame);
    }
  }

  // one epoch visits every chunk exactly once
  std::set<std::pair<std::size_t, std::size_t>> seen;
  const std::size_t steps_per_epoch = sched.chunks().size() / cfg.batch_size;
  for (std::size_t step = 0; step < steps_per_epoch; ++step)
    for (const auto& ref : sched.batch_for_step(step))
      seen.insert({ref.utterance, ref.start_frame});
  CHECK(seen.size() == sched.chunks().size());
}

TEST_CASE("schedule: short utterances are skipped") {
  auto corpus = ar1_corpus(2, 1.0, 5);
  FrameConfig fcfg;
  AudioBuffer tiny;
  tiny.samples.assign(480, 0.1);  // shorter than one 960-sample chunk
  corpus.push_back({tiny, extract_features(tiny, fcfg)});
  TrainConfig cfg;  // chunk_len 960
  ChunkSchedule sched(corpus, cfg);
  for (const auto& c : sched.chunks()) CHECK(c.utterance < 2);
}

TEST_CASE("assemble_batch: targets stay clean under noise injection") {
  auto corpus = ar1_corpus(1, 1.0, 6);
  TrainConfig cfg = small_train();
  ModelConfig mcfg = small_model();
  Rng rng(9);
  std::vector<ChunkRef> refs{{0, 4}, {0, 12}};
  Batch b = assemble_batch(corpus, refs, mcfg, cfg, 0.1, rng);  // huge sigma
  for (std::size_t i = 0; i < cfg.chunk_len; ++i) {
    CHECK(b.target(i * 2 + 0, 0) == corpus[0].audio.samples[4 * 120 + i]);
    CHECK(b.target(i * 2 + 1, 0) == corpus[0].audio.samples[12 * 120 + i]);
  }
  // conditioning values differ from the clean samples under that sigma
  std::size_t differing = 0;
  for (std::size_t i = 1; i < cfg.chunk_len; ++i)
    differing += b.xprev(i * 2, 0) != corpus[0].audio.samples[4 * 120 + i - 1];
  CHECK(differing > cfg.chunk_len / 2);
}

TEST_CASE("trainer: identical seeds give identical loss traces") {
  auto corpus = ar1_corpus(2, 1.0, 7);
  TrainConfig cfg = small_train();
  Rng ra(cfg.seed), rb(cfg.seed);
  Trainer ta(Model::create(small_model(), ra), cfg);
  Trainer tb(Model::create(small_model(), rb), cfg);
  ChunkSchedule sched(corpus, cfg);
  for (int step = 0; step < 5; ++step) {
    Batch batch_a = assemble_batch(corpus, sched.batch_for_step(step), ta.model().cfg,
                                   cfg, cfg.noise_sigma, ta.rng());
    Batch batch_b = assemble_batch(corpus, sched.batch_for_step(step), tb.model().cfg,
                                   cfg, cfg.noise_sigma, tb.rng());
    LossBreakdown la = ta.train_step(batch_a);
    LossBreakdown lb = tb.train_step(batch_b);
    CHECK(la.total == lb.total);
    CHECK(std::abs(la.total - (la.nll + cfg.lambda_pl * la.power)) < 1e-12);
  }
}

TEST_CASE("trainer: lambda zero collapses the total onto the NLL bitwise") {
  auto corpus = ar1_corpus(2, 1.0, 8);
  TrainConfig cfg = small_train();
  cfg.lambda_pl = 0.0;
  Rng rng(cfg.seed);
  Trainer trainer(Model::create(small_model(), rng), cfg);
  ChunkSchedule sched(corpus, cfg);
  for (int step = 0; step < 5; ++step) {
    Batch b = assemble_batch(corpus, sched.batch_for_step(step), trainer.model().cfg,
                             cfg, cfg.noise_sigma, trainer.rng());
    LossBreakdown l = trainer.train_step(b);
    CHECK(l.total == l.nll);
    CHECK(l.power > 0.0);
  }
}

TEST_CASE("trainer: held-out NLL is finite at initialization") {
  auto corpus = ar1_corpus(2, 1.0, 10);
  TrainConfig cfg = small_train();
  Rng rng(cfg.seed);
  Trainer trainer(Model::create(small_model(), rng), cfg);
  const double nll = held_out_nll(trainer, corpus);
  CHECK(std::isfinite(nll));
  CHECK(nll < 10.0);
}

TEST_CASE("trainer: resume from a checkpoint continues the exact trace") {
  namespace fs = std::filesystem;
  const std::string ckpt =
      (fs::temp_directory_path() / ("ilpc_resume_" + std::to_string(::getpid()) + ".ckpt"))
          .string();
  auto corpus = ar1_corpus(2, 1.0, 11);
  TrainConfig cfg = small_train();

  Rng ra(cfg.seed);
  Trainer full(Model::create(small_model(), ra), cfg);
  ChunkSchedule sched(corpus, cfg);
  std::vector<double> tail;
  for (int step = 0; step < 10; ++step) {
    Batch b = assemble_batch(corpus, sched.batch_for_step(step), full.model().cfg,
                             cfg, cfg.noise_sigma, full.rng());
    LossBreakdown l = full.train_step(b);
    if (step == 4) full.save(ckpt);
    if (step >= 5) tail.push_back(l.total);
  }

  Rng rb(999);  // deliberately different init; load must overwrite everything
  Trainer resumed(Model::create(small_model(), rb), cfg);
  resumed.load(ckpt);
  CHECK(resumed.step() == 5);
  for (int step = 5; step < 10; ++step) {
    Batch b = assemble_batch(corpus, sched.batch_for_step(step), resumed.model().cfg,
                             cfg, cfg.noise_sigma, resumed.rng());
    CHECK(resumed.train_step(b).total == tail[step - 5]);
  }
  fs::remove(ckpt);
}

TEST_CASE("trainer: AR(1) corpus trains by at least one nat in 1500 steps") {
  auto corpus = ar1_corpus(4, 1.0, 12);
  std::vector<CorpusItem> held{corpus.back()};
  corpus.pop_back();

  TrainConfig cfg = small_train();
  Rng rng(cfg.seed);
  Trainer trainer(Model::create(small_model(), rng), cfg);
  const double nll_init = held_out_nll(trainer, held);
  ChunkSchedule sched(corpus, cfg);
  for (int step = 0; step < 1500; ++step) {
    Batch b = assemble_batch(corpus, sched.batch_for_step(step), trainer.model().cfg,
                             cfg, cfg.noise_sigma, trainer.rng());
    trainer.train_step(b);
  }
  const double nll_final = held_out_nll(trainer, held);
  CHECK(nll_init - nll_final >= 1.0);
}
