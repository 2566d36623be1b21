#pragma once

#include <cstdint>
#include <vector>

#include "ilpc/dsp.hpp"
#include "ilpc/graph.hpp"
#include "ilpc/layers.hpp"
#include "ilpc/rng.hpp"

namespace ilpc {

struct ModelConfig {
  int feature_dim = 19;  // lp_order + 3
  int context_dim = 128;
  int gru1_dim = 256;
  int gru2_dim = 16;
  int mixtures = 1;
  int frame_shift = 120;
  int lp_order = 16;

  int head_dim() const { return mixtures == 1 ? 2 : 3 * mixtures; }

  // Full-size preset: GRU dims 256/16.
  static ModelConfig paper(int lp_order = 16);
  // Small preset for CPU experiments: GRU dims 64/8.
  static ModelConfig desk(int lp_order = 16);
};

// The vocoder: an upsampling network bringing frame-rate features to sample
// rate, and an autoregressive generation network emitting mixture heads that
// the LP term shifts into the speech domain.
struct Model {
  ModelConfig cfg;
  Conv1dLayer conv1, conv2;
  FcLayer fc_context;
  TransposedConvLayer upsampler;
  GruLayer gru1, gru2;
  FcLayer fc_head;

  static Model create(const ModelConfig& cfg, Rng& rng);
  std::vector<Param*> parameters();
};

// Fixed per-column affine normalization of the raw feature rows, applied at
// the front of the upsampler in both the graph and numeric paths. Returns
// 1 x feature_dim tensors: x' = (x - mean) * scale.
void feature_norm(const ModelConfig& cfg, Tensor& mean, Tensor& scale);

// Graph-side upsampling: feature normalization, two tanh conv layers,
// residual add with the normalized features, FC to context_dim, transposed
// conv to sample rate. `features` is (batch*frames_per_seq x feature_dim)
// sequence-major; the result is
// (batch*frames_per_seq*frame_shift x context_dim) sequence-major.
int upsample_forward(Graph& g, Model& m, int features, std::size_t batch,
                     std::size_t frames_per_seq);

// Graph-side teacher-forced generation. All sample-rate nodes are time-major
// (row = t*batch + b) so each GRU step is a contiguous row slice.
struct WavegenNodes {
  int nll_mean;     // scalar
  int nll_rows;     // (R x 1)
  int xhat_tmajor;  // (R x 1), differentiable mixture-mean path
};
WavegenNodes wavegen_forward(Graph& g, Model& m, int context_seq_major,
                             int xprev_tmajor, int prediction_tmajor,
                             int target_tmajor, std::size_t batch,
                             std::size_t samples_per_seq);

// Row reordering helpers between sequence-major and time-major layouts.
std::vector<std::size_t> to_time_major_index(std::size_t batch, std::size_t len);
std::vector<std::size_t> to_seq_major_index(std::size_t batch, std::size_t len);

struct SynthesisStats {
  std::size_t clipped_samples = 0;
};

// Free-running synthesis from a trained model. Deterministic per seed; output
// length is frame_count * frame_shift, clamped to [-1, 1] at emission.
AudioBuffer synthesize(const Model& m, const FeatureTrack& features, std::uint64_t seed,
                       double sharpen_factor = 0.7, SynthesisStats* stats = nullptr);

// Numeric (graph-free) upsampling used by synthesize; exposed for tests.
Tensor upsample_apply(const Model& m, const FeatureTrack& features);

}  // namespace ilpc
