#pragma once

#include "ilpc/dsp.hpp"

namespace ilpc {

struct EvalReport {
  double lsd_db = 0.0;             // log-spectral distance
  double f0_rmse_hz = 0.0;         // over frames voiced in both
  double voicing_agreement = 0.0;  // fraction in [0, 1]
};

// Objective copy-synthesis metrics. Errors if the lengths differ by more
// than one frame shift or the sample rates disagree.
EvalReport evaluate_pair(const AudioBuffer& reference, const AudioBuffer& synthesized,
                         const FrameConfig& cfg);

}  // namespace ilpc
