#pragma once

#include <cstdint>
#include <vector>

#include "ilpc/graph.hpp"
#include "ilpc/io.hpp"
#include "ilpc/model.hpp"
#include "ilpc/optim.hpp"
#include "ilpc/rng.hpp"

namespace ilpc {

struct TrainConfig {
  std::size_t chunk_len = 960;  // samples per sequence, multiple of frame_shift
  std::size_t batch_size = 8;
  double lambda_pl = 10.0;
  double noise_sigma = 4.0 / 65536.0;  // 2-bit error at 16-bit quantization
  std::size_t total_steps = 10000;
  std::size_t eval_every = 500;
  std::uint64_t seed = 1;
  double base_lr = 2e-3;
  std::size_t warmup = 1500;
  double grad_clip = 100.0;  // global grad-norm cap; <= 0 disables clipping
  int fft_size = 512;
  int stft_hop = 120;
};

struct LossBreakdown {
  double nll = 0.0;
  double power = 0.0;
  double total = 0.0;
};

LossBreakdown total_loss(double nll, double power, double lambda);

// Adds Gaussian noise; sigma == 0 is the identity and draws nothing.
std::vector<double> inject_noise(const std::vector<double>& samples, double sigma, Rng& rng);

// One frame-aligned training chunk.
struct ChunkRef {
  std::size_t utterance;
  std::size_t start_frame;
};

// Assembled tensors for one step. Sample-rate fields are time-major
// (row = t*batch + b); features and reference magnitudes are sequence-major.
struct Batch {
  Tensor features;    // (B*T x D)
  Tensor xprev;       // (R x 1), noise-injected teacher samples
  Tensor prediction;  // (R x 1), LP term over the noise-injected history
  Tensor target;      // (R x 1), clean
  Tensor ref_mag;     // (B*F x bins), STFT magnitudes of the clean chunks
  std::vector<std::uint8_t> voicing;  // B*T
};

// Stateless epoch scheduling: the chunk order for any step is a pure function
// of (seed, step), so training resumes exactly from a checkpoint.
class ChunkSchedule {
 public:
  ChunkSchedule(const std::vector<CorpusItem>& corpus, const TrainConfig& cfg);

  std::vector<ChunkRef> batch_for_step(std::uint64_t step) const;
  const std::vector<ChunkRef>& chunks() const { return chunks_; }

 private:
  const std::vector<ChunkRef>& epoch_order(std::uint64_t epoch) const;

  std::vector<ChunkRef> chunks_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  mutable std::uint64_t cached_epoch_ = ~0ull;
  mutable std::vector<ChunkRef> cached_order_;
};

// STFT magnitude loss over the differentiable sample path. `xhat_tmajor` is
// (batch*samples_per_seq x 1) time-major; `ref_mag` sequence-major magnitudes.
// Returns a scalar node: mean squared magnitude error per bin.
int power_loss_graph(Graph& g, int xhat_tmajor, int ref_mag, std::size_t batch,
                     std::size_t samples_per_seq, int fft_size, int hop);

Batch assemble_batch(const std::vector<CorpusItem>& corpus,
                     const std::vector<ChunkRef>& refs, const ModelConfig& mcfg,
                     const TrainConfig& cfg, double sigma, Rng& rng);

// Owns the model, optimizer, and the static training graph.
class Trainer {
 public:
  Trainer(Model model, TrainConfig cfg);

  // The graph binds into the owned model, so the trainer is pinned in place.
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  LossBreakdown train_step(const Batch& batch);

  // Teacher-forced NLL only, no parameter update.
  double teacher_nll(const Batch& batch);

  Model& model() { return model_; }
  Adam& adam() { return adam_; }
  Rng& rng() { return rng_; }
  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }
  const TrainConfig& config() const { return cfg_; }

  void save(const std::string& path);

  // Restores parameters, optimizer state, step counter, and rng from a
  // checkpoint with a matching model configuration.
  void load(const std::string& path);

 private:
  void build_graph();

  Model model_;
  TrainConfig cfg_;
  Adam adam_;
  Rng rng_;
  std::uint64_t step_ = 0;
  std::vector<Param*> params_;

  Graph graph_;
  int in_features_, in_xprev_, in_pred_, in_target_, in_refmag_;
  int nll_node_, power_node_, total_node_;
};

// Mean teacher-forced NLL per sample over a held-out set, clean inputs.
double held_out_nll(Trainer& trainer, const std::vector<CorpusItem>& held);

}  // namespace ilpc
