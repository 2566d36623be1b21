#pragma once

#include <cstdint>
#include <vector>

#include "ilpc/graph.hpp"
#include "ilpc/rng.hpp"
#include "ilpc/tensor.hpp"

namespace ilpc {

// Uniform in +-sqrt(6/(fan_in+fan_out)), shape (fan_in x fan_out).
Tensor xavier_init(std::size_t fan_in, std::size_t fan_out, Rng& rng);

// Learning rate that ramps linearly to `base` at `warmup` and decays as
// 1/sqrt(step) afterwards. step >= 1.
double noam_lr(std::size_t step, double base = 1e-3, std::size_t warmup = 4000);

// Weight reparameterized as w = g * v / ||v|| per row; rows are output units.
struct NormParam {
  Param direction;  // v
  Param gain;       // g, one scalar per row of v

  static NormParam create(const std::string& name, Tensor v);
};

// Builds the effective weight inside a graph so gradients reach both g and v.
int weight_norm(Graph& g, NormParam& p);

// Materializes the effective weight outside any graph (inference path).
Tensor effective_weight(const NormParam& p);

class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Applies one bias-corrected update and clears gradients. Parameter order
  // must be stable across calls (moments are keyed by position).
  void step(const std::vector<Param*>& params, double lr);

  std::size_t step_count() const { return step_; }

  // Checkpoint access.
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  void set_step_count(std::size_t s) { step_ = s; }
  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }
  double epsilon() const { return eps_; }

 private:
  double beta1_, beta2_, eps_;
  std::size_t step_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace ilpc
