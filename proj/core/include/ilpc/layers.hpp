#pragma once

#include <cstddef>
#include <vector>

#include "ilpc/graph.hpp"
#include "ilpc/optim.hpp"
#include "ilpc/rng.hpp"

namespace ilpc {

// Weight-normalized dense layer; weight rows are output units.
struct FcLayer {
  NormParam weight;  // v: (out x in)
  Param bias;        // (1 x out)

  static FcLayer create(const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  std::size_t in_dim() const { return weight.direction.value.cols(); }
  std::size_t out_dim() const { return weight.direction.value.rows(); }
  void collect(std::vector<Param*>& out);
};

int fc_forward(Graph& g, FcLayer& layer, int x);
std::vector<double> fc_apply(const FcLayer& layer, const std::vector<double>& x);
Tensor fc_apply(const FcLayer& layer, const Tensor& x);

// Width-3 convolution over frames, edge frames replicated. Kernel columns
// are ordered [previous | current | next] input channels.
struct Conv1dLayer {
  NormParam kernel;  // (out x 3*in)
  Param bias;        // (1 x out)

  static Conv1dLayer create(const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  std::size_t in_dim() const { return kernel.direction.value.cols() / 3; }
  std::size_t out_dim() const { return kernel.direction.value.rows(); }
  void collect(std::vector<Param*>& out);
};

// `frames` is (batch*frames_per_seq x in), sequence-major; replication never
// crosses a sequence boundary.
int conv1x3_forward(Graph& g, Conv1dLayer& layer, int frames, std::size_t batch,
                    std::size_t frames_per_seq);
Tensor conv1x3_apply(const Conv1dLayer& layer, const Tensor& frames);

// Upsampling by an integer factor with kernel width == stride, so each output
// block depends on exactly one input frame. Kernel rows are (tap*out + ch).
struct TransposedConvLayer {
  NormParam kernel;  // (stride*out x in)
  Param bias;        // (1 x out)
  std::size_t stride = 0;

  static TransposedConvLayer create(const std::string& name, std::size_t in,
                                    std::size_t out, std::size_t stride, Rng& rng);
  std::size_t in_dim() const { return kernel.direction.value.cols(); }
  std::size_t out_dim() const { return kernel.direction.value.rows() / stride; }
  void collect(std::vector<Param*>& out);
};

// (T x in) -> (T*stride x out)
int transposed_conv_forward(Graph& g, TransposedConvLayer& layer, int frames);
Tensor transposed_conv_apply(const TransposedConvLayer& layer, const Tensor& frames);

// Gated recurrent unit:
//   z = sigmoid(x Wz + h Uz + bz)
//   r = sigmoid(x Wr + h Ur + br)
//   c = tanh(x Wc + (r . h) Uc + bc)
//   h' = (1 - z) . h + z . c
// Input-side weights/biases are packed [z | r | c]. Not weight-normalized.
struct GruLayer {
  Param w_input;      // (in x 3H)
  Param bias;         // (1 x 3H)
  Param u_gates;      // (H x 2H), [z | r]
  Param u_candidate;  // (H x H)

  static GruLayer create(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng);
  std::size_t in_dim() const { return w_input.value.rows(); }
  std::size_t hidden_dim() const { return w_input.value.cols() / 3; }
  void collect(std::vector<Param*>& out);
};

struct GruState {
  std::vector<double> h;
  explicit GruState(std::size_t hidden) : h(hidden, 0.0) {}
};

// Graph-side recurrence. Bind once per graph, precompute the input projection
// for the whole sequence, then chain steps on row slices of it.
struct GruNodes {
  int u_gates;
  int u_candidate;
  std::size_t hidden;
};
GruNodes gru_bind(Graph& g, GruLayer& layer);
int gru_xproj(Graph& g, GruLayer& layer, int x);  // (R x in) -> (R x 3H)
int gru_step(Graph& g, const GruNodes& nodes, int h, int xproj);

// Inference-path step; x has layer.in_dim() entries.
void gru_apply(const GruLayer& layer, GruState& state, const double* x);

}  // namespace ilpc
