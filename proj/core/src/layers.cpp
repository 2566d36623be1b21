#include "ilpc/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace ilpc {

namespace {
double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y = x * W^T + b for a weight-normalized (out x in) weight.
Tensor affine_nt(const Tensor& x, const Tensor& w, const Param& bias) {
  if (x.cols() != w.cols())
    throw std::runtime_error("layer: input width " + x.shape_str() +
                             " does not match weight " + w.shape_str());
  Tensor y(x.rows(), w.rows());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t o = 0; o < w.rows(); ++o) {
      double s = bias.value[o];
      for (std::size_t c = 0; c < x.cols(); ++c) s += x(r, c) * w(o, c);
      y(r, o) = s;
    }
  return y;
}
}  // namespace

FcLayer FcLayer::create(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  FcLayer l;
  Tensor v = xavier_init(out, in, rng);  // rows are output units
  l.weight = NormParam::create(name + ".w", std::move(v));
  l.bias = Param(name + ".b", Tensor(1, out));
  return l;
}

void FcLayer::collect(std::vector<Param*>& out) {
  out.push_back(&weight.direction);
  out.push_back(&weight.gain);
  out.push_back(&bias);
}

int fc_forward(Graph& g, FcLayer& layer, int x) {
  int w = weight_norm(g, layer.weight);
  return g.add(g.matmul_nt(x, w), g.param(layer.bias));
}

Tensor fc_apply(const FcLayer& layer, const Tensor& x) {
  return affine_nt(x, effective_weight(layer.weight), layer.bias);
}

std::vector<double> fc_apply(const FcLayer& layer, const std::vector<double>& x) {
  Tensor xt(1, x.size());
  std::copy(x.begin(), x.end(), xt.data());
  Tensor y = fc_apply(layer, xt);
  return y.raw();
}

Conv1dLayer Conv1dLayer::create(const std::string& name, std::size_t in, std::size_t out,
                                Rng& rng) {
  Conv1dLayer l;
  Tensor v = xavier_init(out, 3 * in, rng);
  l.kernel = NormParam::create(name + ".w", std::move(v));
  l.bias = Param(name + ".b", Tensor(1, out));
  return l;
}

void Conv1dLayer::collect(std::vector<Param*>& out) {
  out.push_back(&kernel.direction);
  out.push_back(&kernel.gain);
  out.push_back(&bias);
}

int conv1x3_forward(Graph& g, Conv1dLayer& layer, int frames, std::size_t batch,
                    std::size_t frames_per_seq) {
  const std::size_t total = batch * frames_per_seq;
  if (g.value(frames).rows() != total)
    throw std::runtime_error("conv1x3: frame rows do not match batch*frames_per_seq");
  std::vector<std::size_t> prev(total), next(total);
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t t = 0; t < frames_per_seq; ++t) {
      std::size_t r = s * frames_per_seq + t;
      prev[r] = t == 0 ? r : r - 1;
      next[r] = t + 1 == frames_per_seq ? r : r + 1;
    }
  int ctx = g.concat_cols({g.gather_rows(frames, std::move(prev)), frames,
                           g.gather_rows(frames, std::move(next))});
  int w = weight_norm(g, layer.kernel);
  return g.add(g.matmul_nt(ctx, w), g.param(layer.bias));
}

Tensor conv1x3_apply(const Conv1dLayer& layer, const Tensor& frames) {
  const std::size_t in = layer.in_dim();
  const std::size_t rows = frames.rows();
  Tensor ctx(rows, 3 * in);
  for (std::size_t t = 0; t < rows; ++t) {
    std::size_t p = t == 0 ? t : t - 1;
    std::size_t nx = t + 1 == rows ? t : t + 1;
    for (std::size_t c = 0; c < in; ++c) {
      ctx(t, c) = frames(p, c);
      ctx(t, in + c) = frames(t, c);
      ctx(t, 2 * in + c) = frames(nx, c);
    }
  }
  return affine_nt(ctx, effective_weight(layer.kernel), layer.bias);
}

TransposedConvLayer TransposedConvLayer::create(const std::string& name, std::size_t in,
                                                std::size_t out, std::size_t stride,
                                                Rng& rng) {
  TransposedConvLayer l;
  l.stride = stride;
  Tensor v = xavier_init(stride * out, in, rng);
  l.kernel = NormParam::create(name + ".w", std::move(v));
  l.bias = Param(name + ".b", Tensor(1, out));
  return l;
}

void TransposedConvLayer::collect(std::vector<Param*>& out) {
  out.push_back(&kernel.direction);
  out.push_back(&kernel.gain);
  out.push_back(&bias);
}

int transposed_conv_forward(Graph& g, TransposedConvLayer& layer, int frames) {
  const std::size_t t_in = g.value(frames).rows();
  const std::size_t out = layer.out_dim();
  int w = weight_norm(g, layer.kernel);
  int blocks = g.matmul_nt(frames, w);  // (T x stride*out), tap-major columns
  int samples = g.reshape(blocks, t_in * layer.stride, out);
  return g.add(samples, g.param(layer.bias));
}

Tensor transposed_conv_apply(const TransposedConvLayer& layer, const Tensor& frames) {
  const std::size_t out = layer.out_dim();
  Tensor w = effective_weight(layer.kernel);
  Tensor y(frames.rows() * layer.stride, out);
  for (std::size_t t = 0; t < frames.rows(); ++t)
    for (std::size_t tap = 0; tap < layer.stride; ++tap)
      for (std::size_t o = 0; o < out; ++o) {
        double s = layer.bias.value[o];
        const std::size_t row = tap * out + o;
        for (std::size_t c = 0; c < frames.cols(); ++c) s += frames(t, c) * w(row, c);
        y(t * layer.stride + tap, o) = s;
      }
  return y;
}

GruLayer GruLayer::create(const std::string& name, std::size_t in, std::size_t hidden,
                          Rng& rng) {
  GruLayer l;
  l.w_input = Param(name + ".wx", xavier_init(in, 3 * hidden, rng));
  l.bias = Param(name + ".b", Tensor(1, 3 * hidden));
  l.u_gates = Param(name + ".uzr", xavier_init(hidden, 2 * hidden, rng));
  l.u_candidate = Param(name + ".uc", xavier_init(hidden, hidden, rng));
  return l;
}

void GruLayer::collect(std::vector<Param*>& out) {
  out.push_back(&w_input);
  out.push_back(&bias);
  out.push_back(&u_gates);
  out.push_back(&u_candidate);
}

GruNodes gru_bind(Graph& g, GruLayer& layer) {
  return {g.param(layer.u_gates), g.param(layer.u_candidate), layer.hidden_dim()};
}

int gru_xproj(Graph& g, GruLayer& layer, int x) {
  return g.add(g.matmul(x, g.param(layer.w_input)), g.param(layer.bias));
}

int gru_step(Graph& g, const GruNodes& nodes, int h, int xproj) {
  const std::size_t hd = nodes.hidden;
  int rec = g.matmul(h, nodes.u_gates);  // (B x 2H)
  int z = g.sigmoid(g.add(g.slice_cols(xproj, 0, hd), g.slice_cols(rec, 0, hd)));
  int r = g.sigmoid(g.add(g.slice_cols(xproj, hd, hd), g.slice_cols(rec, hd, hd)));
  int cand = g.tanh_(g.add(g.slice_cols(xproj, 2 * hd, hd),
                           g.matmul(g.mul(r, h), nodes.u_candidate)));
  int keep = g.add_scalar(g.scale(z, -1.0), 1.0);  // 1 - z
  return g.add(g.mul(h, keep), g.mul(cand, z));
}

void gru_apply(const GruLayer& layer, GruState& state, const double* x) {
  const std::size_t hd = layer.hidden_dim();
  const std::size_t in = layer.in_dim();
  std::vector<double> proj(3 * hd);
  for (std::size_t j = 0; j < 3 * hd; ++j) proj[j] = layer.bias.value[j];
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = x[i];
    const double* wrow = layer.w_input.value.data() + i * layer.w_input.value.cols();
    for (std::size_t j = 0; j < 3 * hd; ++j) proj[j] += xi * wrow[j];
  }
  std::vector<double> zr(2 * hd, 0.0);
  for (std::size_t i = 0; i < hd; ++i) {
    const double hi = state.h[i];
    const double* urow = layer.u_gates.value.data() + i * layer.u_gates.value.cols();
    for (std::size_t j = 0; j < 2 * hd; ++j) zr[j] += hi * urow[j];
  }
  std::vector<double> z(hd), r(hd);
  for (std::size_t j = 0; j < hd; ++j) {
    z[j] = sigmoid_scalar(proj[j] + zr[j]);
    r[j] = sigmoid_scalar(proj[hd + j] + zr[hd + j]);
  }
  std::vector<double> cand(hd);
  for (std::size_t j = 0; j < hd; ++j) cand[j] = proj[2 * hd + j];
  for (std::size_t i = 0; i < hd; ++i) {
    const double rh = r[i] * state.h[i];
    const double* urow = layer.u_candidate.value.data() + i * layer.u_candidate.value.cols();
    for (std::size_t j = 0; j < hd; ++j) cand[j] += rh * urow[j];
  }
  for (std::size_t j = 0; j < hd; ++j) {
    double c = std::tanh(cand[j]);
    state.h[j] = (1.0 - z[j]) * state.h[j] + z[j] * c;
    if (!std::isfinite(state.h[j]))
      throw std::runtime_error("gru_apply: non-finite hidden state");
  }
}

}  // namespace ilpc
