#pragma once

#include <vector>

#include "ilpc/graph.hpp"
#include "ilpc/rng.hpp"

namespace ilpc {

// Raw network outputs feeding the mixture head. With a single component the
// gain logits are absent and the head carries [raw_mean, raw_log_scale] only.
struct NetHeads {
  std::vector<double> gain_logits;
  std::vector<double> raw_means;
  std::vector<double> raw_log_scales;

  std::size_t mixtures() const { return raw_means.size(); }
};

struct MogParams {
  std::vector<double> weights;  // sum to 1, each > 0
  std::vector<double> means;
  std::vector<double> scales;  // > 0
};

// Raw log-scales are clamped to this range before exponentiation.
constexpr double kLogScaleMin = -7.0;
constexpr double kLogScaleMax = 5.0;

// Mixture over speech samples: softmax gains, exp scales, and the mean
// shifted by the linear prediction so the network models the excitation.
MogParams heads_to_mog(const NetHeads& heads, double prediction);

// -log of the mixture density at x, via max-subtracted log-sum-exp.
double mog_nll(const MogParams& dist, double x);

// Ancestral sampling: pick a component by weight, then draw the Gaussian.
double mog_sample(const MogParams& dist, Rng& rng);

// Scale reduction in voiced regions; identity when unvoiced.
MogParams sharpen(const MogParams& dist, bool voiced, double factor = 0.7);

// True when the LP mean-shift identity holds to 1e-12:
// NLL(heads_to_mog(h, p), x) == NLL(heads_to_mog(h, 0), x - p).
bool shift_invariance_check(const NetHeads& heads, double prediction, double x);

// Graph-side mixture NLL. `heads` is (R x 3N), or (R x 2) when N == 1, with
// column layout [gain logits | raw means | raw log-scales]; `prediction` and
// `target` are (R x 1). Returns {per-row NLL node (R x 1), mixture-mean node}.
struct MogNodes {
  int nll;
  int mean;  // sum_i w_i * mu_i, the differentiable sample path
};
MogNodes mog_nll_graph(Graph& g, int heads, int prediction, int target, int mixtures);

}  // namespace ilpc
