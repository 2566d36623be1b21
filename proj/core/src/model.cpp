#include "ilpc/model.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "ilpc/lpmdn.hpp"

namespace ilpc {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

ModelConfig ModelConfig::paper(int lp_order) {
  ModelConfig c;
  c.lp_order = lp_order;
  c.feature_dim = lp_order + 3;
  c.context_dim = 256;
  c.gru1_dim = 256;
  c.gru2_dim = 16;
  return c;
}

ModelConfig ModelConfig::desk(int lp_order) {
  ModelConfig c;
  c.lp_order = lp_order;
  c.feature_dim = lp_order + 3;
  c.context_dim = 128;
  c.gru1_dim = 64;
  c.gru2_dim = 8;
  return c;
}

Model Model::create(const ModelConfig& cfg, Rng& rng) {
  Model m;
  m.cfg = cfg;
  const std::size_t fd = cfg.feature_dim;
  const std::size_t cd = cfg.context_dim;
  m.conv1 = Conv1dLayer::create("conv1", fd, fd, rng);
  m.conv2 = Conv1dLayer::create("conv2", fd, fd, rng);
  m.fc_context = FcLayer::create("fc_context", fd, cd, rng);
  m.upsampler = TransposedConvLayer::create("upsampler", cd, cd, cfg.frame_shift, rng);
  m.gru1 = GruLayer::create("gru1", cd + 1, cfg.gru1_dim, rng);
  // The scalar x_{n-1} is one input among context_dim+1; fan-in scaling makes
  // its weights so small that the autoregressive path starts out invisible.
  // Give that row unit-order scale so sample history is usable from step one.
  for (std::size_t j = 0; j < m.gru1.w_input.value.cols(); ++j)
    m.gru1.w_input.value(cd, j) *= 0.25 * std::sqrt(static_cast<double>(cd + 1));
  m.gru2 = GruLayer::create("gru2", cfg.gru1_dim, cfg.gru2_dim, rng);
  m.fc_head = FcLayer::create("fc_head", cfg.gru2_dim, cfg.head_dim(), rng);
  return m;
}

std::vector<Param*> Model::parameters() {
  std::vector<Param*> out;
  conv1.collect(out);
  conv2.collect(out);
  fc_context.collect(out);
  upsampler.collect(out);
  gru1.collect(out);
  gru2.collect(out);
  fc_head.collect(out);
  return out;
}

void feature_norm(const ModelConfig& cfg, Tensor& mean, Tensor& scale) {
  const std::size_t d = cfg.feature_dim;
  mean = Tensor(1, d);
  scale = Tensor(1, d);
  // log_f0 is ~5.2 when voiced and 0 when unvoiced; center between the two.
  mean(0, 0) = 2.6;
  scale(0, 0) = 0.5;
  mean(0, 1) = 0.5;  // voicing flag to +-1
  scale(0, 1) = 2.0;
  mean(0, 2) = 0.0;  // log_energy spans roughly [-5, 2] for non-silent frames
  scale(0, 2) = 0.25;
  for (int i = 0; i < cfg.lp_order; ++i) {
    mean(0, 3 + i) = kPi * (i + 1) / (cfg.lp_order + 1);  // uniform LSF grid
    scale(0, 3 + i) = 2.0;
  }
}

int upsample_forward(Graph& g, Model& m, int features, std::size_t batch,
                     std::size_t frames_per_seq) {
  Tensor nm, ns;
  feature_norm(m.cfg, nm, ns);
  int f = g.mul(g.sub(features, g.constant(nm)), g.constant(ns));
  int h = g.tanh_(conv1x3_forward(g, m.conv1, f, batch, frames_per_seq));
  h = g.tanh_(conv1x3_forward(g, m.conv2, h, batch, frames_per_seq));
  int res = g.add(h, f);
  int ctx = fc_forward(g, m.fc_context, res);
  return transposed_conv_forward(g, m.upsampler, ctx);
}

std::vector<std::size_t> to_time_major_index(std::size_t batch, std::size_t len) {
  std::vector<std::size_t> idx(batch * len);
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t b = 0; b < batch; ++b) idx[t * batch + b] = b * len + t;
  return idx;
}

std::vector<std::size_t> to_seq_major_index(std::size_t batch, std::size_t len) {
  std::vector<std::size_t> idx(batch * len);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < len; ++t) idx[b * len + t] = t * batch + b;
  return idx;
}

WavegenNodes wavegen_forward(Graph& g, Model& m, int context_seq_major,
                             int xprev_tmajor, int prediction_tmajor,
                             int target_tmajor, std::size_t batch,
                             std::size_t samples_per_seq) {
  const std::size_t rows = batch * samples_per_seq;
  if (g.value(context_seq_major).rows() != rows)
    throw std::runtime_error("wavegen_forward: context rows != batch*samples");
  if (g.value(xprev_tmajor).rows() != rows || g.value(target_tmajor).rows() != rows ||
      g.value(prediction_tmajor).rows() != rows)
    throw std::runtime_error("wavegen_forward: sample-rate inputs misaligned");

  int ctx = g.gather_rows(context_seq_major, to_time_major_index(batch, samples_per_seq));
  int x = g.concat_cols({g.tanh_(ctx), xprev_tmajor});

  int xp1 = gru_xproj(g, m.gru1, x);
  GruNodes n1 = gru_bind(g, m.gru1);
  GruNodes n2 = gru_bind(g, m.gru2);

  int h1 = g.constant(Tensor(batch, m.cfg.gru1_dim));
  std::vector<int> h1_steps(samples_per_seq);
  for (std::size_t t = 0; t < samples_per_seq; ++t) {
    h1 = gru_step(g, n1, h1, g.slice_rows(xp1, t * batch, batch));
    h1_steps[t] = h1;
  }
  int h1_all = g.concat_rows(h1_steps);

  int xp2 = gru_xproj(g, m.gru2, h1_all);
  int h2 = g.constant(Tensor(batch, m.cfg.gru2_dim));
  std::vector<int> h2_steps(samples_per_seq);
  for (std::size_t t = 0; t < samples_per_seq; ++t) {
    h2 = gru_step(g, n2, h2, g.slice_rows(xp2, t * batch, batch));
    h2_steps[t] = h2;
  }
  int heads = fc_forward(g, m.fc_head, g.concat_rows(h2_steps));

  MogNodes mog = mog_nll_graph(g, heads, prediction_tmajor, target_tmajor, m.cfg.mixtures);
  WavegenNodes out;
  out.nll_rows = mog.nll;
  out.nll_mean = g.mean_all(mog.nll);
  out.xhat_tmajor = mog.mean;
  return out;
}

Tensor upsample_apply(const Model& m, const FeatureTrack& features) {
  Tensor f(features.frame_count, features.dim());
  std::copy(features.rows.begin(), features.rows.end(), f.data());
  Tensor nm, ns;
  feature_norm(m.cfg, nm, ns);
  for (std::size_t t = 0; t < f.rows(); ++t)
    for (std::size_t c = 0; c < f.cols(); ++c)
      f(t, c) = (f(t, c) - nm(0, c)) * ns(0, c);
  Tensor h = conv1x3_apply(m.conv1, f);
  for (double& v : h.raw()) v = std::tanh(v);
  h = conv1x3_apply(m.conv2, h);
  for (double& v : h.raw()) v = std::tanh(v);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] += f[i];
  Tensor ctx = fc_apply(m.fc_context, h);
  return transposed_conv_apply(m.upsampler, ctx);
}

AudioBuffer synthesize(const Model& m, const FeatureTrack& features, std::uint64_t seed,
                       double sharpen_factor, SynthesisStats* stats) {
  AudioBuffer out;
  out.sample_rate = 24000;
  if (features.frame_count == 0) return out;
  if (static_cast<int>(features.dim()) != m.cfg.feature_dim)
    throw std::runtime_error("synthesize: feature dim " + std::to_string(features.dim()) +
                             " does not match model dim " +
                             std::to_string(m.cfg.feature_dim));

  const std::size_t shift = m.cfg.frame_shift;
  Tensor ctx = upsample_apply(m, features);
  Rng rng(seed);
  GruState s1(m.cfg.gru1_dim), s2(m.cfg.gru2_dim);
  LpFilter filter(std::vector<double>(m.cfg.lp_order, 0.0));
  const int n_mix = m.cfg.mixtures;
  std::vector<double> gru1_in(m.cfg.context_dim + 1);
  double x_prev = 0.0;
  SynthesisStats local;
  out.samples.reserve(features.frame_count * shift);

  for (std::size_t t = 0; t < features.frame_count; ++t) {
    const double* alphas = features.alphas(t);
    std::copy(alphas, alphas + m.cfg.lp_order, filter.coeffs.begin());
    const bool voiced = features.voiced(t);
    for (std::size_t j = 0; j < shift; ++j) {
      const std::size_t n = t * shift + j;
      for (int c = 0; c < m.cfg.context_dim; ++c) gru1_in[c] = std::tanh(ctx(n, c));
      gru1_in[m.cfg.context_dim] = x_prev;
      gru_apply(m.gru1, s1, gru1_in.data());
      gru_apply(m.gru2, s2, s1.h.data());
      std::vector<double> head = fc_apply(m.fc_head, s2.h);
      NetHeads heads;
      if (n_mix == 1) {
        heads.raw_means = {head[0]};
        heads.raw_log_scales = {head[1]};
      } else {
        heads.gain_logits.assign(head.begin(), head.begin() + n_mix);
        heads.raw_means.assign(head.begin() + n_mix, head.begin() + 2 * n_mix);
        heads.raw_log_scales.assign(head.begin() + 2 * n_mix, head.begin() + 3 * n_mix);
      }
      double p = predict_sample(filter);
      MogParams dist = sharpen(heads_to_mog(heads, p), voiced, sharpen_factor);
      double x = mog_sample(dist, rng);
      if (x > 1.0 || x < -1.0) {
        x = std::clamp(x, -1.0, 1.0);
        ++local.clipped_samples;
      }
      push_history(filter, x);
      out.samples.push_back(x);
      x_prev = x;
    }
  }
  if (stats) *stats = local;
  if (local.clipped_samples > 0 && !stats)
    std::cerr << "synthesize: clipped " << local.clipped_samples << " samples to [-1, 1]\n";
  return out;
}

}  // namespace ilpc
