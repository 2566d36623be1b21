#include "ilpc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "ilpc/lpmdn.hpp"

extern "C" void openblas_set_num_threads(int);

namespace ilpc {

namespace {
constexpr double kPi = 3.14159265358979323846;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (0x9E3779B97F4A7C15ull * (salt + 1));
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

}  // namespace

// STFT power loss over the differentiable sample path: frames of xhat are
// gathered, windowed, projected onto fixed DFT bases, and the magnitude
// spectrogram is compared against the clean reference, mean per bin.
int power_loss_graph(Graph& g, int xhat_tmajor, int ref_mag, std::size_t batch,
                     std::size_t samples_per_seq, int fft_size, int hop) {
  const std::size_t fft = fft_size;
  const std::size_t bins = fft / 2 + 1;
  const std::size_t frames_per_seq = (samples_per_seq - fft) / hop + 1;

  int xhat_seq = g.gather_rows(xhat_tmajor, to_seq_major_index(batch, samples_per_seq));
  std::vector<std::size_t> idx;
  idx.reserve(batch * frames_per_seq * fft);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t f = 0; f < frames_per_seq; ++f)
      for (std::size_t j = 0; j < fft; ++j)
        idx.push_back(b * samples_per_seq + f * hop + j);
  int frames = g.reshape(g.gather_rows(xhat_seq, std::move(idx)),
                         batch * frames_per_seq, fft);

  Tensor window(1, fft);
  {
    auto w = hann_window(fft_size);
    std::copy(w.begin(), w.end(), window.data());
  }
  Tensor dft_cos(fft, bins), dft_sin(fft, bins);
  for (std::size_t j = 0; j < fft; ++j)
    for (std::size_t b = 0; b < bins; ++b) {
      double ang = 2.0 * kPi * static_cast<double>(j * b) / static_cast<double>(fft);
      dft_cos(j, b) = std::cos(ang);
      dft_sin(j, b) = std::sin(ang);
    }

  int windowed = g.mul(frames, g.constant(std::move(window)));
  int re = g.matmul(windowed, g.constant(std::move(dft_cos)));
  int im = g.matmul(windowed, g.constant(std::move(dft_sin)));
  // 1e-24 keeps sqrt differentiable at silent bins; the magnitude error is
  // at most 1e-12.
  int mag = g.sqrt_(g.add_scalar(g.add(g.square(re), g.square(im)), 1e-24));
  return g.mean_all(g.square(g.sub(mag, ref_mag)));
}

LossBreakdown total_loss(double nll, double power, double lambda) {
  if (!std::isfinite(nll) || !std::isfinite(power))
    throw std::runtime_error("total_loss: non-finite input");
  return {nll, power, nll + lambda * power};
}

std::vector<double> inject_noise(const std::vector<double>& samples, double sigma, Rng& rng) {
  if (sigma < 0.0) throw std::runtime_error("inject_noise: sigma must be >= 0");
  std::vector<double> out = samples;
  if (sigma == 0.0) return out;
  for (double& v : out) v += sigma * rng.normal();
  return out;
}

ChunkSchedule::ChunkSchedule(const std::vector<CorpusItem>& corpus, const TrainConfig& cfg)
    : batch_size_(cfg.batch_size), seed_(cfg.seed) {
  if (cfg.chunk_len % 120 != 0)
    throw std::runtime_error("ChunkSchedule: chunk_len must be a multiple of the frame shift");
  for (std::size_t u = 0; u < corpus.size(); ++u) {
    const auto& item = corpus[u];
    const std::size_t hop = item.features.frame_count > 0
                                ? item.audio.samples.size() / item.features.frame_count
                                : 0;
    const std::size_t frames_per_chunk = hop > 0 ? cfg.chunk_len / hop : 0;
    if (frames_per_chunk == 0 || item.features.frame_count < frames_per_chunk ||
        item.audio.samples.size() < cfg.chunk_len) {
      std::cerr << "ChunkSchedule: skipping utterance " << u
                << " shorter than chunk_len\n";
      continue;
    }
    // Non-overlapping tiling of the eligible frames.
    for (std::size_t fs = 0; fs + frames_per_chunk <= item.features.frame_count;
         fs += frames_per_chunk) {
      if ((fs + frames_per_chunk) * hop <= item.audio.samples.size())
        chunks_.push_back({u, fs});
    }
  }
  if (chunks_.empty()) throw std::runtime_error("ChunkSchedule: no eligible chunks");
}

const std::vector<ChunkRef>& ChunkSchedule::epoch_order(std::uint64_t epoch) const {
  if (epoch != cached_epoch_) {
    cached_order_ = chunks_;
    Rng rng(mix_seed(seed_, epoch));
    for (std::size_t i = cached_order_.size(); i > 1; --i)
      std::swap(cached_order_[i - 1], cached_order_[rng.below(i)]);
    cached_epoch_ = epoch;
  }
  return cached_order_;
}

std::vector<ChunkRef> ChunkSchedule::batch_for_step(std::uint64_t step) const {
  std::vector<ChunkRef> out;
  out.reserve(batch_size_);
  const std::uint64_t n = chunks_.size();
  for (std::size_t i = 0; i < batch_size_; ++i) {
    std::uint64_t pos = step * batch_size_ + i;
    out.push_back(epoch_order(pos / n)[pos % n]);
  }
  return out;
}

Batch assemble_batch(const std::vector<CorpusItem>& corpus,
                     const std::vector<ChunkRef>& refs, const ModelConfig& mcfg,
                     const TrainConfig& cfg, double sigma, Rng& rng) {
  const std::size_t B = refs.size();
  const std::size_t S = cfg.chunk_len;
  const std::size_t hop = mcfg.frame_shift;
  const std::size_t T = S / hop;
  const std::size_t D = mcfg.feature_dim;
  const std::size_t M = mcfg.lp_order;
  const std::size_t fft = cfg.fft_size;
  const std::size_t frames_per_seq = (S - fft) / cfg.stft_hop + 1;
  const std::size_t bins = fft / 2 + 1;

  Batch batch;
  batch.features = Tensor(B * T, D);
  batch.xprev = Tensor(B * S, 1);
  batch.prediction = Tensor(B * S, 1);
  batch.target = Tensor(B * S, 1);
  batch.ref_mag = Tensor(B * frames_per_seq, bins);
  batch.voicing.resize(B * T);

  for (std::size_t b = 0; b < B; ++b) {
    const CorpusItem& item = corpus[refs[b].utterance];
    const std::size_t fs = refs[b].start_frame;
    const std::size_t start = fs * hop;

    for (std::size_t t = 0; t < T; ++t) {
      const double* row = item.features.row(fs + t);
      std::copy(row, row + D, &batch.features(b * T + t, 0));
      batch.voicing[b * T + t] = item.features.voiced(fs + t) ? 1 : 0;
    }

    // Conditioning samples with an M-sample prefix for the LP history;
    // zero-padded at utterance start. Targets stay clean.
    std::vector<double> cond(M + S, 0.0);
    for (std::size_t i = 0; i < M + S; ++i) {
      long idx = static_cast<long>(start + i) - static_cast<long>(M);
      if (idx >= 0) cond[i] = item.audio.samples[idx];
    }
    cond = inject_noise(cond, sigma, rng);

    for (std::size_t t = 0; t < S; ++t) {
      const std::size_t row = t * B + b;
      batch.target(row, 0) = item.audio.samples[start + t];
      batch.xprev(row, 0) = cond[M + t - 1];
      const double* alphas = item.features.alphas(fs + t / hop);
      double p = 0.0;
      for (std::size_t i = 0; i < M; ++i) p += alphas[i] * cond[M + t - 1 - i];
      batch.prediction(row, 0) = p;
    }

    std::vector<double> clean(item.audio.samples.begin() + start,
                              item.audio.samples.begin() + start + S);
    Tensor mag = stft(clean, cfg.fft_size, cfg.stft_hop);
    std::copy(mag.data(), mag.data() + mag.size(),
              &batch.ref_mag(b * frames_per_seq, 0));
  }
  return batch;
}

Trainer::Trainer(Model model, TrainConfig cfg)
    : model_(std::move(model)), cfg_(cfg), rng_(cfg.seed) {
  // Determinism requires a fixed BLAS thread count.
  openblas_set_num_threads(1);
  params_ = model_.parameters();
  build_graph();
}

void Trainer::build_graph() {
  const std::size_t B = cfg_.batch_size;
  const std::size_t S = cfg_.chunk_len;
  const std::size_t T = S / model_.cfg.frame_shift;
  const std::size_t frames_per_seq = (S - cfg_.fft_size) / cfg_.stft_hop + 1;
  const std::size_t bins = cfg_.fft_size / 2 + 1;

  in_features_ = graph_.input(B * T, model_.cfg.feature_dim);
  in_xprev_ = graph_.input(B * S, 1);
  in_pred_ = graph_.input(B * S, 1);
  in_target_ = graph_.input(B * S, 1);
  in_refmag_ = graph_.input(B * frames_per_seq, bins);

  int ctx = upsample_forward(graph_, model_, in_features_, B, T);
  WavegenNodes wg = wavegen_forward(graph_, model_, ctx, in_xprev_, in_pred_,
                                    in_target_, B, S);
  nll_node_ = wg.nll_mean;
  power_node_ = power_loss_graph(graph_, wg.xhat_tmajor, in_refmag_, B, S,
                                 cfg_.fft_size, cfg_.stft_hop);
  total_node_ = graph_.add(nll_node_, graph_.scale(power_node_, cfg_.lambda_pl));
}

LossBreakdown Trainer::train_step(const Batch& batch) {
  graph_.set_input(in_features_, batch.features);
  graph_.set_input(in_xprev_, batch.xprev);
  graph_.set_input(in_pred_, batch.prediction);
  graph_.set_input(in_target_, batch.target);
  graph_.set_input(in_refmag_, batch.ref_mag);
  try {
    graph_.forward();
  } catch (const std::exception& e) {
    double tmin = batch.target[0], tmax = batch.target[0];
    for (double v : batch.target.raw()) {
      tmin = std::min(tmin, v);
      tmax = std::max(tmax, v);
    }
    throw std::runtime_error(std::string("train_step: ") + e.what() + " at step " +
                             std::to_string(step_ + 1) + " (batch target range [" +
                             std::to_string(tmin) + ", " + std::to_string(tmax) + "])");
  }
  LossBreakdown loss = total_loss(graph_.value(nll_node_)[0],
                                  graph_.value(power_node_)[0], cfg_.lambda_pl);
  graph_.backward(total_node_);
  if (cfg_.grad_clip > 0.0) {
    double sq = 0.0;
    for (Param* p : params_)
      for (double g : p->grad.raw()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (getenv("ILPC_LOG_GNORM")) fprintf(stderr, "gnorm %.3f\n", norm);
    if (norm > cfg_.grad_clip) {
      const double s = cfg_.grad_clip / norm;
      for (Param* p : params_)
        for (double& g : p->grad.raw()) g *= s;
    }
  }
  adam_.step(params_, noam_lr(step_ + 1, cfg_.base_lr, cfg_.warmup));
  ++step_;
  return loss;
}

double Trainer::teacher_nll(const Batch& batch) {
  graph_.set_input(in_features_, batch.features);
  graph_.set_input(in_xprev_, batch.xprev);
  graph_.set_input(in_pred_, batch.prediction);
  graph_.set_input(in_target_, batch.target);
  graph_.set_input(in_refmag_, batch.ref_mag);
  graph_.forward();
  return graph_.value(nll_node_)[0];
}

void Trainer::save(const std::string& path) {
  save_checkpoint(path, model_, adam_, step_, rng_);
}

void Trainer::load(const std::string& path) {
  LoadedCheckpoint ck = load_checkpoint(path);
  auto loaded = ck.model.parameters();
  if (loaded.size() != params_.size())
    throw std::runtime_error("Trainer::load: parameter count mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (loaded[i]->name != params_[i]->name ||
        !loaded[i]->value.same_shape(params_[i]->value))
      throw std::runtime_error("Trainer::load: checkpoint incompatible at " +
                               params_[i]->name);
    params_[i]->value = loaded[i]->value;
  }
  adam_ = std::move(ck.adam);
  step_ = ck.step;
  rng_ = ck.rng;
}

double held_out_nll(Trainer& trainer, const std::vector<CorpusItem>& held) {
  const TrainConfig& cfg = trainer.config();
  TrainConfig sched_cfg = cfg;
  ChunkSchedule schedule(held, sched_cfg);
  const auto& chunks = schedule.chunks();
  Rng unused(0);
  double acc = 0.0;
  std::size_t batches = 0;
  for (std::size_t pos = 0; pos + cfg.batch_size <= chunks.size();
       pos += cfg.batch_size) {
    std::vector<ChunkRef> refs(chunks.begin() + pos,
                               chunks.begin() + pos + cfg.batch_size);
    Batch b = assemble_batch(held, refs, trainer.model().cfg, cfg, 0.0, unused);
    acc += trainer.teacher_nll(b);
    ++batches;
  }
  if (batches == 0) throw std::runtime_error("held_out_nll: held-out set too small");
  return acc / static_cast<double>(batches);
}

}  // namespace ilpc
