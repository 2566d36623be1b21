#include "ilpc/graph.hpp"

#include <cblas.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace ilpc {

namespace {

// OpenBLAS misdetects rebranded Xeons (brand string "Intel(R) Xeon(R)
// Processor") and falls back to a several-times-slower generic kernel. Steer
// the dispatcher when the CPU has AVX-512 and no core type was chosen; this
// must run before the first BLAS call, hence a load-time constructor.
__attribute__((constructor(101))) void select_blas_core_type() {
  __builtin_cpu_init();  // required before cpu_supports in early constructors
  if (__builtin_cpu_supports("avx512f"))
    setenv("OPENBLAS_CORETYPE", "SKYLAKEX", /*overwrite=*/0);
}

void gemm(bool trans_b, const Tensor& a, const Tensor& b, Tensor& out,
          bool accumulate) {
  // out (MxN) = a (MxK) * op(b), op(b) = b (KxN) or b^T with b (NxK)
  const int m = static_cast<int>(a.rows());
  const int k = static_cast<int>(a.cols());
  const int n = static_cast<int>(out.cols());
  cblas_dgemm(CblasRowMajor, CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
              m, n, k, 1.0, a.data(), k, b.data(),
              trans_b ? k : n, accumulate ? 1.0 : 0.0, out.data(), n);
}

void gemm_tn(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate) {
  // out (MxN) = a^T (MxK after transpose, a stored KxM) * b (KxN)
  const int m = static_cast<int>(out.rows());
  const int n = static_cast<int>(out.cols());
  const int k = static_cast<int>(a.rows());
  cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, m, n, k, 1.0, a.data(),
              m, b.data(), n, accumulate ? 1.0 : 0.0, out.data(), n);
}

enum class Bcast { kSame, kRow, kCol };  // kRow: b is 1xC, kCol: b is Rx1

Bcast bcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.same_shape(b)) return Bcast::kSame;
  if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::kRow;
  if (b.cols() == 1 && b.rows() == a.rows()) return Bcast::kCol;
  throw std::runtime_error(std::string(op) + ": shape mismatch " +
                           a.shape_str() + " vs " + b.shape_str());
}

double bval(const Tensor& b, Bcast k, std::size_t r, std::size_t c) {
  switch (k) {
    case Bcast::kSame: return b(r, c);
    case Bcast::kRow: return b[c];
    default: return b[r];
  }
}

// Accumulate a full-shape gradient into the (possibly broadcast) operand.
void reduce_into(Tensor& bg, Bcast k, const Tensor& full) {
  const std::size_t rows = full.rows(), cols = full.cols();
  switch (k) {
    case Bcast::kSame:
      for (std::size_t i = 0; i < full.size(); ++i) bg[i] += full[i];
      break;
    case Bcast::kRow:
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) bg[c] += full(r, c);
      break;
    case Bcast::kCol:
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) bg[r] += full(r, c);
      break;
  }
}

}  // namespace

const char* op_name(Graph::Op op) {
  switch (op) {
    case Graph::Op::kInput: return "input";
    case Graph::Op::kConst: return "const";
    case Graph::Op::kParam: return "param";
    case Graph::Op::kMatmul: return "matmul";
    case Graph::Op::kMatmulNT: return "matmul_nt";
    case Graph::Op::kAdd: return "add";
    case Graph::Op::kSub: return "sub";
    case Graph::Op::kMul: return "mul";
    case Graph::Op::kDiv: return "div";
    case Graph::Op::kScale: return "scale";
    case Graph::Op::kAddScalar: return "add_scalar";
    case Graph::Op::kTanh: return "tanh";
    case Graph::Op::kSigmoid: return "sigmoid";
    case Graph::Op::kExp: return "exp";
    case Graph::Op::kLog: return "log";
    case Graph::Op::kSqrt: return "sqrt";
    case Graph::Op::kSquare: return "square";
    case Graph::Op::kClamp: return "clamp";
    case Graph::Op::kSoftmax: return "softmax";
    case Graph::Op::kRowSum: return "row_sum";
    case Graph::Op::kRowMax: return "row_max";
    case Graph::Op::kSumAll: return "sum_all";
    case Graph::Op::kMeanAll: return "mean_all";
    case Graph::Op::kConcatCols: return "concat_cols";
    case Graph::Op::kConcatRows: return "concat_rows";
    case Graph::Op::kSliceCols: return "slice_cols";
    case Graph::Op::kSliceRows: return "slice_rows";
    case Graph::Op::kGatherRows: return "gather_rows";
    case Graph::Op::kReshape: return "reshape";
  }
  return "?";
}

int Graph::push(Node n) {
  n.grad = Tensor(n.value.rows(), n.value.cols());
  nodes_.push_back(std::move(n));
  forward_done_ = false;
  return static_cast<int>(nodes_.size()) - 1;
}

int Graph::input(std::size_t rows, std::size_t cols) {
  Node n{Op::kInput, {}, Tensor(rows, cols)};
  return push(std::move(n));
}

int Graph::constant(Tensor t) {
  Node n{Op::kConst, {}, std::move(t)};
  return push(std::move(n));
}

int Graph::param(Param& p) {
  Node n{Op::kParam, {}, Tensor(p.value.rows(), p.value.cols())};
  n.bound = &p;
  return push(std::move(n));
}

int Graph::matmul(int a, int b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  if (ta.cols() != tb.rows())
    throw std::runtime_error("matmul: inner dims " + ta.shape_str() + " vs " +
                             tb.shape_str());
  return push({Op::kMatmul, {a, b}, Tensor(ta.rows(), tb.cols())});
}

int Graph::matmul_nt(int a, int b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  if (ta.cols() != tb.cols())
    throw std::runtime_error("matmul_nt: inner dims " + ta.shape_str() +
                             " vs " + tb.shape_str());
  return push({Op::kMatmulNT, {a, b}, Tensor(ta.rows(), tb.rows())});
}

int Graph::add(int a, int b) {
  bcast_kind(nodes_[a].value, nodes_[b].value, "add");
  return push({Op::kAdd, {a, b}, Tensor(nodes_[a].value.rows(), nodes_[a].value.cols())});
}

int Graph::sub(int a, int b) {
  bcast_kind(nodes_[a].value, nodes_[b].value, "sub");
  return push({Op::kSub, {a, b}, Tensor(nodes_[a].value.rows(), nodes_[a].value.cols())});
}

int Graph::mul(int a, int b) {
  bcast_kind(nodes_[a].value, nodes_[b].value, "mul");
  return push({Op::kMul, {a, b}, Tensor(nodes_[a].value.rows(), nodes_[a].value.cols())});
}

int Graph::div(int a, int b) {
  bcast_kind(nodes_[a].value, nodes_[b].value, "div");
  return push({Op::kDiv, {a, b}, Tensor(nodes_[a].value.rows(), nodes_[a].value.cols())});
}

int Graph::scale(int a, double s) {
  Node n{Op::kScale, {a}, Tensor(nodes_[a].value.rows(), nodes_[a].value.cols())};
  n.s0 = s;
  return push(std::move(n));
}

int Graph::add_scalar(int a, double s) {
  Node n{Op::kAddScalar, {a}, Tensor(nodes_[a].value.rows(), nodes_[a].value.cols())};
  n.s0 = s;
  return push(std::move(n));
}

#define ILPC_UNARY(NAME, OP)                                                   \
  int Graph::NAME(int a) {                                                     \
    return push({Op::OP, {a},                                                  \
                 Tensor(nodes_[a].value.rows(), nodes_[a].value.cols())});     \
  }
ILPC_UNARY(tanh_, kTanh)
ILPC_UNARY(sigmoid, kSigmoid)
ILPC_UNARY(exp_, kExp)
ILPC_UNARY(log_, kLog)
ILPC_UNARY(sqrt_, kSqrt)
ILPC_UNARY(square, kSquare)
ILPC_UNARY(softmax, kSoftmax)
#undef ILPC_UNARY

int Graph::clamp(int a, double lo, double hi) {
  Node n{Op::kClamp, {a}, Tensor(nodes_[a].value.rows(), nodes_[a].value.cols())};
  n.s0 = lo;
  n.s1 = hi;
  return push(std::move(n));
}

int Graph::row_sum(int a) {
  return push({Op::kRowSum, {a}, Tensor(nodes_[a].value.rows(), 1)});
}

int Graph::row_max_detached(int a) {
  return push({Op::kRowMax, {a}, Tensor(nodes_[a].value.rows(), 1)});
}

int Graph::sum_all(int a) { return push({Op::kSumAll, {a}, Tensor(1, 1)}); }
int Graph::mean_all(int a) { return push({Op::kMeanAll, {a}, Tensor(1, 1)}); }

int Graph::concat_cols(const std::vector<int>& parts) {
  if (parts.empty()) throw std::runtime_error("concat_cols: empty");
  std::size_t rows = nodes_[parts[0]].value.rows();
  std::size_t cols = 0;
  for (int p : parts) {
    if (nodes_[p].value.rows() != rows)
      throw std::runtime_error("concat_cols: row mismatch");
    cols += nodes_[p].value.cols();
  }
  return push({Op::kConcatCols, parts, Tensor(rows, cols)});
}

int Graph::concat_rows(const std::vector<int>& parts) {
  if (parts.empty()) throw std::runtime_error("concat_rows: empty");
  std::size_t cols = nodes_[parts[0]].value.cols();
  std::size_t rows = 0;
  for (int p : parts) {
    if (nodes_[p].value.cols() != cols)
      throw std::runtime_error("concat_rows: column mismatch");
    rows += nodes_[p].value.rows();
  }
  return push({Op::kConcatRows, parts, Tensor(rows, cols)});
}

int Graph::slice_cols(int a, std::size_t offset, std::size_t count) {
  const Tensor& t = nodes_[a].value;
  if (offset + count > t.cols()) throw std::runtime_error("slice_cols: out of range");
  Node n{Op::kSliceCols, {a}, Tensor(t.rows(), count)};
  n.a0 = offset;
  n.a1 = count;
  return push(std::move(n));
}

int Graph::slice_rows(int a, std::size_t offset, std::size_t count) {
  const Tensor& t = nodes_[a].value;
  if (offset + count > t.rows()) throw std::runtime_error("slice_rows: out of range");
  Node n{Op::kSliceRows, {a}, Tensor(count, t.cols())};
  n.a0 = offset;
  n.a1 = count;
  return push(std::move(n));
}

int Graph::gather_rows(int a, std::vector<std::size_t> indices) {
  const Tensor& t = nodes_[a].value;
  for (std::size_t i : indices)
    if (i >= t.rows()) throw std::runtime_error("gather_rows: index out of range");
  Node n{Op::kGatherRows, {a}, Tensor(indices.size(), t.cols())};
  n.indices = std::move(indices);
  return push(std::move(n));
}

int Graph::reshape(int a, std::size_t rows, std::size_t cols) {
  const Tensor& t = nodes_[a].value;
  if (rows * cols != t.size()) throw std::runtime_error("reshape: size mismatch");
  return push({Op::kReshape, {a}, Tensor(rows, cols)});
}

void Graph::set_input(int id, const Tensor& t) {
  if (!nodes_[id].value.same_shape(t))
    throw std::runtime_error("set_input: shape mismatch " +
                             nodes_[id].value.shape_str() + " vs " + t.shape_str());
  nodes_[id].value = t;
}

void Graph::set_input(int id, const double* data, std::size_t n) {
  if (nodes_[id].value.size() != n)
    throw std::runtime_error("set_input: size mismatch");
  std::memcpy(nodes_[id].value.data(), data, n * sizeof(double));
}

void Graph::check_finite(const Node& n) const {
  // |v| <= DBL_MAX is false for NaN and infinities; unlike std::isfinite the
  // comparison vectorizes, and this scan runs over every node each forward.
  const double* v = n.value.data();
  const std::size_t size = n.value.size();
  std::size_t bad = 0;
  for (std::size_t i = 0; i < size; ++i)
    bad += !(std::abs(v[i]) <= std::numeric_limits<double>::max());
  if (bad > 0)
    throw std::runtime_error(std::string("non-finite value after op ") + op_name(n.op));
}

void Graph::compute(Node& n) {
  auto in = [&](int i) -> const Tensor& { return nodes_[n.inputs[i]].value; };
  Tensor& out = n.value;
  switch (n.op) {
    case Op::kInput:
    case Op::kConst:
      break;
    case Op::kParam:
      out = n.bound->value;
      break;
    case Op::kMatmul:
      gemm(false, in(0), in(1), out, false);
      break;
    case Op::kMatmulNT:
      gemm(true, in(0), in(1), out, false);
      break;
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      Bcast k = bcast_kind(a, b, op_name(n.op));
      for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) {
          double bv = bval(b, k, r, c);
          double av = a(r, c);
          double v = 0;
          switch (n.op) {
            case Op::kAdd: v = av + bv; break;
            case Op::kSub: v = av - bv; break;
            case Op::kMul: v = av * bv; break;
            default: v = av / bv; break;
          }
          out(r, c) = v;
        }
      break;
    }
    case Op::kScale:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = in(0)[i] * n.s0;
      break;
    case Op::kAddScalar:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = in(0)[i] + n.s0;
      break;
    case Op::kTanh:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(in(0)[i]);
      break;
    case Op::kSigmoid:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-in(0)[i]));
      break;
    case Op::kExp:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(in(0)[i]);
      break;
    case Op::kLog:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(in(0)[i]);
      break;
    case Op::kSqrt:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(in(0)[i]);
      break;
    case Op::kSquare:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = in(0)[i] * in(0)[i];
      break;
    case Op::kClamp:
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::min(n.s1, std::max(n.s0, in(0)[i]));
      break;
    case Op::kSoftmax: {
      const Tensor& a = in(0);
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double m = a(r, 0);
        for (std::size_t c = 1; c < a.cols(); ++c) m = std::max(m, a(r, c));
        double sum = 0;
        for (std::size_t c = 0; c < a.cols(); ++c) {
          out(r, c) = std::exp(a(r, c) - m);
          sum += out(r, c);
        }
        for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) /= sum;
      }
      break;
    }
    case Op::kRowSum: {
      const Tensor& a = in(0);
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0;
        for (std::size_t c = 0; c < a.cols(); ++c) s += a(r, c);
        out[r] = s;
      }
      break;
    }
    case Op::kRowMax: {
      const Tensor& a = in(0);
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double m = a(r, 0);
        for (std::size_t c = 1; c < a.cols(); ++c) m = std::max(m, a(r, c));
        out[r] = m;
      }
      break;
    }
    case Op::kSumAll: {
      double s = 0;
      for (double v : in(0).raw()) s += v;
      out[0] = s;
      break;
    }
    case Op::kMeanAll: {
      double s = 0;
      for (double v : in(0).raw()) s += v;
      out[0] = s / static_cast<double>(in(0).size());
      break;
    }
    case Op::kConcatCols: {
      std::size_t off = 0;
      for (int p : n.inputs) {
        const Tensor& a = nodes_[p].value;
        for (std::size_t r = 0; r < a.rows(); ++r)
          std::memcpy(&out(r, off), a.data() + r * a.cols(), a.cols() * sizeof(double));
        off += a.cols();
      }
      break;
    }
    case Op::kConcatRows: {
      std::size_t off = 0;
      for (int p : n.inputs) {
        const Tensor& a = nodes_[p].value;
        std::memcpy(&out(off, 0), a.data(), a.size() * sizeof(double));
        off += a.rows();
      }
      break;
    }
    case Op::kSliceCols: {
      const Tensor& a = in(0);
      for (std::size_t r = 0; r < out.rows(); ++r)
        std::memcpy(&out(r, 0), a.data() + r * a.cols() + n.a0, n.a1 * sizeof(double));
      break;
    }
    case Op::kSliceRows:
      std::memcpy(out.data(), in(0).data() + n.a0 * in(0).cols(), out.size() * sizeof(double));
      break;
    case Op::kGatherRows: {
      const Tensor& a = in(0);
      for (std::size_t r = 0; r < n.indices.size(); ++r)
        std::memcpy(&out(r, 0), a.data() + n.indices[r] * a.cols(), a.cols() * sizeof(double));
      break;
    }
    case Op::kReshape:
      std::memcpy(out.data(), in(0).data(), out.size() * sizeof(double));
      break;
  }
}

void Graph::propagate(Node& n) {
  auto ing = [&](int i) -> Tensor& { return nodes_[n.inputs[i]].grad; };
  auto inv = [&](int i) -> const Tensor& { return nodes_[n.inputs[i]].value; };
  const Tensor& g = n.grad;
  const Tensor& y = n.value;
  switch (n.op) {
    case Op::kInput:
    case Op::kConst:
    case Op::kRowMax:
      break;
    case Op::kParam:
      for (std::size_t i = 0; i < g.size(); ++i) n.bound->grad[i] += g[i];
      break;
    case Op::kMatmul: {
      // dA += G * B^T ; dB += A^T * G
      gemm(true, g, inv(1), ing(0), true);
      gemm_tn(inv(0), g, ing(1), true);
      break;
    }
    case Op::kMatmulNT: {
      // Y = A * B^T : dA += G * B ; dB += G^T * A
      gemm(false, g, inv(1), ing(0), true);
      gemm_tn(g, inv(0), ing(1), true);
      break;
    }
    case Op::kAdd:
    case Op::kSub: {
      Tensor& ga = ing(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      Bcast k = bcast_kind(inv(0), inv(1), op_name(n.op));
      if (n.op == Op::kAdd) {
        reduce_into(ing(1), k, g);
      } else {
        Tensor neg(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) neg[i] = -g[i];
        reduce_into(ing(1), k, neg);
      }
      break;
    }
    case Op::kMul: {
      const Tensor& a = inv(0);
      const Tensor& b = inv(1);
      Bcast k = bcast_kind(a, b, "mul");
      Tensor& ga = ing(0);
      Tensor gb(g.rows(), g.cols());
      for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) {
          ga(r, c) += g(r, c) * bval(b, k, r, c);
          gb(r, c) = g(r, c) * a(r, c);
        }
      reduce_into(ing(1), k, gb);
      break;
    }
    case Op::kDiv: {
      const Tensor& a = inv(0);
      const Tensor& b = inv(1);
      Bcast k = bcast_kind(a, b, "div");
      Tensor& ga = ing(0);
      Tensor gb(g.rows(), g.cols());
      for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) {
          double bv = bval(b, k, r, c);
          ga(r, c) += g(r, c) / bv;
          gb(r, c) = -g(r, c) * a(r, c) / (bv * bv);
        }
      reduce_into(ing(1), k, gb);
      break;
    }
    case Op::kScale: {
      Tensor& ga = ing(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.s0;
      break;
    }
    case Op::kAddScalar: {
      Tensor& ga = ing(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      break;
    }
    case Op::kTanh: {
      Tensor& ga = ing(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
      break;
    }
    case Op::kSigmoid: {
      Tensor& ga = ing(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
      break;
    }
    case Op::kExp: {
      Tensor& ga = ing(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
      break;
    }
    case Op::kLog: {
      Tensor& ga = ing(0);
      const Tensor& a = inv(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / a[i];
      break;
    }
    case Op::kSqrt: {
      Tensor& ga = ing(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 0.5 / y[i];
      break;
    }
    case Op::kSquare: {
      Tensor& ga = ing(0);
      const Tensor& a = inv(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 2.0 * a[i];
      break;
    }
    case Op::kClamp: {
      Tensor& ga = ing(0);
      const Tensor& a = inv(0);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (a[i] > n.s0 && a[i] < n.s1) ga[i] += g[i];
      break;
    }
    case Op::kSoftmax: {
      Tensor& ga = ing(0);
      for (std::size_t r = 0; r < y.rows(); ++r) {
        double dot = 0;
        for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
        for (std::size_t c = 0; c < y.cols(); ++c)
          ga(r, c) += y(r, c) * (g(r, c) - dot);
      }
      break;
    }
    case Op::kRowSum: {
      Tensor& ga = ing(0);
      for (std::size_t r = 0; r < ga.rows(); ++r)
        for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g[r];
      break;
    }
    case Op::kSumAll: {
      Tensor& ga = ing(0);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
      break;
    }
    case Op::kMeanAll: {
      Tensor& ga = ing(0);
      double s = g[0] / static_cast<double>(ga.size());
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s;
      break;
    }
    case Op::kConcatCols: {
      std::size_t off = 0;
      for (int p : n.inputs) {
        Tensor& ga = nodes_[p].grad;
        for (std::size_t r = 0; r < ga.rows(); ++r)
          for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g(r, off + c);
        off += ga.cols();
      }
      break;
    }
    case Op::kConcatRows: {
      std::size_t off = 0;
      for (int p : n.inputs) {
        Tensor& ga = nodes_[p].grad;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[off * ga.cols() + i];
        off += ga.rows();
      }
      break;
    }
    case Op::kSliceCols: {
      Tensor& ga = ing(0);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) ga(r, n.a0 + c) += g(r, c);
      break;
    }
    case Op::kSliceRows: {
      Tensor& ga = ing(0);
      double* dst = &ga(n.a0, 0);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
      break;
    }
    case Op::kGatherRows: {
      Tensor& ga = ing(0);
      for (std::size_t r = 0; r < n.indices.size(); ++r) {
        double* dst = &ga(n.indices[r], 0);
        const double* src = g.data() + r * g.cols();
        for (std::size_t c = 0; c < g.cols(); ++c) dst[c] += src[c];
      }
      break;
    }
    case Op::kReshape: {
      Tensor& ga = ing(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      break;
    }
  }
}

void Graph::forward() {
  for (Node& n : nodes_) {
    compute(n);
    check_finite(n);
  }
  forward_done_ = true;
  backward_done_ = false;
}

void Graph::backward(int output) {
  if (!forward_done_) throw std::runtime_error("backward: forward() required first");
  if (backward_done_)
    throw std::runtime_error("backward: already called; run forward() to reset");
  if (nodes_[output].value.size() != 1)
    throw std::runtime_error("backward: output must be scalar, got " +
                             nodes_[output].value.shape_str());
  for (Node& n : nodes_) n.grad.fill(0.0);
  nodes_[output].grad[0] = 1.0;
  for (int i = output; i >= 0; --i) propagate(nodes_[i]);
  backward_done_ = true;
}

}  // namespace ilpc
