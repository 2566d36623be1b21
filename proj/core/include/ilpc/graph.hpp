#pragma once

#include <string>
#include <vector>

#include "ilpc/tensor.hpp"

namespace ilpc {

// A named trainable tensor. The optimizer owns the update rule; the graph
// binds leaves to these so gradients accumulate here after backward().
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param() = default;
  Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor(value.rows(), value.cols());
  }
};

// Static computation graph with reverse-mode differentiation.
//
// Nodes are created in topological order and hold preallocated value/grad
// buffers, so a graph built once can be re-run every training step with new
// inputs and no allocation churn. All tensors are 2-D; broadcast is limited
// to a (1xC) or (Rx1) second operand on elementwise ops.
class Graph {
 public:
  enum class Op {
    kInput,
    kConst,
    kParam,
    kMatmul,    // (RxK)·(KxC)
    kMatmulNT,  // (RxK)·(CxK)^T
    kAdd,
    kSub,
    kMul,
    kDiv,
    kScale,      // a * s0
    kAddScalar,  // a + s0
    kTanh,
    kSigmoid,
    kExp,
    kLog,
    kSqrt,
    kSquare,
    kClamp,    // clamp to [s0, s1], zero gradient outside
    kSoftmax,  // per row, max-subtracted
    kRowSum,   // (RxC) -> (Rx1)
    kRowMax,   // (RxC) -> (Rx1), detached (no gradient)
    kSumAll,   // -> (1x1)
    kMeanAll,  // -> (1x1)
    kConcatCols,
    kConcatRows,
    kSliceCols,   // columns [a0, a0+a1)
    kSliceRows,   // rows [a0, a0+a1)
    kGatherRows,  // rows picked by index table, backward scatter-adds
    kReshape,
  };

  int input(std::size_t rows, std::size_t cols);
  int constant(Tensor t);
  int param(Param& p);

  int matmul(int a, int b);
  int matmul_nt(int a, int b);
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int div(int a, int b);
  int scale(int a, double s);
  int add_scalar(int a, double s);
  int tanh_(int a);
  int sigmoid(int a);
  int exp_(int a);
  int log_(int a);
  int sqrt_(int a);
  int square(int a);
  int clamp(int a, double lo, double hi);
  int softmax(int a);
  int row_sum(int a);
  int row_max_detached(int a);
  int sum_all(int a);
  int mean_all(int a);
  int concat_cols(const std::vector<int>& parts);
  int concat_rows(const std::vector<int>& parts);
  int slice_cols(int a, std::size_t offset, std::size_t count);
  int slice_rows(int a, std::size_t offset, std::size_t count);
  int gather_rows(int a, std::vector<std::size_t> indices);
  int reshape(int a, std::size_t rows, std::size_t cols);

  void set_input(int id, const Tensor& t);
  void set_input(int id, const double* data, std::size_t n);

  // Recomputes every node in creation order; errors on any non-finite value.
  void forward();

  // Populates gradients of a scalar output w.r.t. every reachable node and
  // accumulates into bound Params. Requires a fresh forward() first.
  void backward(int output);

  const Tensor& value(int id) const { return nodes_[id].value; }
  const Tensor& grad(int id) const { return nodes_[id].grad; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Op op;
    std::vector<int> inputs;
    Tensor value;
    Tensor grad;
    std::size_t a0 = 0, a1 = 0;
    double s0 = 0.0, s1 = 0.0;
    std::vector<std::size_t> indices;
    Param* bound = nullptr;
  };

  int push(Node n);
  void compute(Node& n);
  void propagate(Node& n);
  void check_finite(const Node& n) const;

  std::vector<Node> nodes_;
  bool forward_done_ = false;
  bool backward_done_ = false;
};

const char* op_name(Graph::Op op);

}  // namespace ilpc
