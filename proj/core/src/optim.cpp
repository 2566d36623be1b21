#include "ilpc/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace ilpc {

Tensor xavier_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(fan_in, fan_out);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

double noam_lr(std::size_t step, double base, std::size_t warmup) {
  if (step == 0) throw std::runtime_error("noam_lr: step must be >= 1");
  double s = static_cast<double>(step);
  double w = static_cast<double>(warmup);
  return base * std::min(s / w, std::sqrt(w / s));
}

NormParam NormParam::create(const std::string& name, Tensor v) {
  NormParam p;
  // Gains start at the row norms so the initial effective weight equals v.
  Tensor g(v.rows(), 1);
  for (std::size_t r = 0; r < v.rows(); ++r) {
    double s = 0;
    for (std::size_t c = 0; c < v.cols(); ++c) s += v(r, c) * v(r, c);
    g[r] = std::sqrt(s);
  }
  p.direction = Param(name + ".v", std::move(v));
  p.gain = Param(name + ".g", std::move(g));
  return p;
}

int weight_norm(Graph& g, NormParam& p) {
  int v = g.param(p.direction);
  int gain = g.param(p.gain);
  int norm = g.sqrt_(g.row_sum(g.square(v)));  // (rows x 1)
  return g.mul(g.div(v, norm), gain);
}

Tensor effective_weight(const NormParam& p) {
  const Tensor& v = p.direction.value;
  Tensor w(v.rows(), v.cols());
  for (std::size_t r = 0; r < v.rows(); ++r) {
    double s = 0;
    for (std::size_t c = 0; c < v.cols(); ++c) s += v(r, c) * v(r, c);
    double norm = std::sqrt(s);
    if (norm == 0.0) throw std::runtime_error("weight norm: zero row in " + p.direction.name);
    double f = p.gain.value[r] / norm;
    for (std::size_t c = 0; c < v.cols(); ++c) w(r, c) = v(r, c) * f;
  }
  return w;
}

void Adam::step(const std::vector<Param*>& params, double lr) {
  if (m_.empty()) {
    for (Param* p : params) {
      m_.emplace_back(p->value.rows(), p->value.cols());
      v_.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  if (m_.size() != params.size())
    throw std::runtime_error("adam: parameter count changed");
  ++step_;
  double t = static_cast<double>(step_);
  double c1 = 1.0 - std::pow(beta1_, t);
  double c2 = 1.0 - std::pow(beta2_, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (!p.grad.same_shape(p.value))
      throw std::runtime_error("adam: grad shape mismatch for " + p.name);
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      double gr = p.grad[j];
      if (!std::isfinite(gr))
        throw std::runtime_error("adam: non-finite gradient in " + p.name);
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * gr;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * gr * gr;
      double mhat = m_[i][j] / c1;
      double vhat = v_[i][j] / c2;
      p.value[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
    p.grad.fill(0.0);
  }
}

}  // namespace ilpc
