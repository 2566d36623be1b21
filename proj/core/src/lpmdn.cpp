#include "ilpc/lpmdn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ilpc {

namespace {
constexpr double kHalfLog2Pi = 0.918938533204672741780329736406;  // 0.5*ln(2*pi)

void require_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw std::runtime_error(std::string(what) + ": non-finite value");
}
}  // namespace

MogParams heads_to_mog(const NetHeads& heads, double prediction) {
  const std::size_t n = heads.mixtures();
  if (n == 0) throw std::runtime_error("heads_to_mog: empty heads");
  if (heads.raw_log_scales.size() != n ||
      (!heads.gain_logits.empty() && heads.gain_logits.size() != n))
    throw std::runtime_error("heads_to_mog: mixture count mismatch across heads");
  require_finite(heads.gain_logits, "heads_to_mog");
  require_finite(heads.raw_means, "heads_to_mog");
  require_finite(heads.raw_log_scales, "heads_to_mog");
  if (!std::isfinite(prediction)) throw std::runtime_error("heads_to_mog: non-finite prediction");

  MogParams out;
  out.weights.resize(n);
  if (n == 1 || heads.gain_logits.empty()) {
    if (n != 1) throw std::runtime_error("heads_to_mog: gain logits required for N > 1");
    out.weights[0] = 1.0;
  } else {
    double m = *std::max_element(heads.gain_logits.begin(), heads.gain_logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      out.weights[i] = std::exp(heads.gain_logits[i] - m);
      sum += out.weights[i];
    }
    for (double& w : out.weights) w /= sum;
  }
  out.means.resize(n);
  out.scales.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.means[i] = heads.raw_means[i] + prediction;
    out.scales[i] = std::exp(std::clamp(heads.raw_log_scales[i], kLogScaleMin, kLogScaleMax));
  }
  return out;
}

double mog_nll(const MogParams& dist, double x) {
  const std::size_t n = dist.means.size();
  // log-sum-exp over component log densities, max-subtracted.
  std::vector<double> lp(n);
  double m = -1e300;
  for (std::size_t i = 0; i < n; ++i) {
    double z = (x - dist.means[i]) / dist.scales[i];
    lp[i] = std::log(dist.weights[i]) - std::log(dist.scales[i]) - kHalfLog2Pi - 0.5 * z * z;
    m = std::max(m, lp[i]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(lp[i] - m);
  return -(m + std::log(sum));
}

double mog_sample(const MogParams& dist, Rng& rng) {
  const std::size_t n = dist.means.size();
  std::size_t pick = 0;
  if (n > 1) {
    double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += dist.weights[i];
      if (u < acc) {
        pick = i;
        break;
      }
      pick = i;
    }
  }
  return dist.means[pick] + dist.scales[pick] * rng.normal();
}

MogParams sharpen(const MogParams& dist, bool voiced, double factor) {
  if (factor <= 0.0) throw std::runtime_error("sharpen: factor must be positive");
  MogParams out = dist;
  if (voiced)
    for (double& s : out.scales) s *= factor;
  return out;
}

bool shift_invariance_check(const NetHeads& heads, double prediction, double x) {
  double a = mog_nll(heads_to_mog(heads, prediction), x);
  double b = mog_nll(heads_to_mog(heads, 0.0), x - prediction);
  return std::abs(a - b) <= 1e-12;
}

MogNodes mog_nll_graph(Graph& g, int heads, int prediction, int target, int mixtures) {
  const int n = mixtures;
  int z_mu, z_s, log_w = -1;
  if (n == 1) {
    z_mu = g.slice_cols(heads, 0, 1);
    z_s = g.slice_cols(heads, 1, 1);
  } else {
    int z_w = g.slice_cols(heads, 0, n);
    z_mu = g.slice_cols(heads, n, n);
    z_s = g.slice_cols(heads, 2 * n, n);
    // log softmax of the gain logits
    int wm = g.row_max_detached(z_w);
    int shifted = g.sub(z_w, wm);
    int lse = g.log_(g.row_sum(g.exp_(shifted)));
    log_w = g.sub(shifted, lse);
  }
  int clamped = g.clamp(z_s, kLogScaleMin, kLogScaleMax);
  int scales = g.exp_(clamped);
  int means = g.add(z_mu, prediction);  // (R x N) + (R x 1)
  // Per-component log density.
  int z = g.div(g.sub(g.scale(means, -1.0), g.scale(target, -1.0)), scales);
  int comp = g.sub(g.scale(g.square(z), -0.5), g.add_scalar(clamped, kHalfLog2Pi));
  MogNodes out;
  if (n == 1) {
    out.nll = g.scale(comp, -1.0);
    out.mean = means;
  } else {
    int lp = g.add(comp, log_w);
    int m = g.row_max_detached(lp);
    int lse = g.add(g.log_(g.row_sum(g.exp_(g.sub(lp, m)))), m);
    out.nll = g.scale(lse, -1.0);
    out.mean = g.row_sum(g.mul(g.softmax(g.slice_cols(heads, 0, n)), means));
  }
  return out;
}

}  // namespace ilpc
