#include "ilpc/eval.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace ilpc {

EvalReport evaluate_pair(const AudioBuffer& reference, const AudioBuffer& synthesized,
                         const FrameConfig& cfg) {
  if (reference.sample_rate != synthesized.sample_rate)
    throw std::runtime_error("evaluate_pair: sample rate mismatch");
  const long diff = std::labs(static_cast<long>(reference.samples.size()) -
                              static_cast<long>(synthesized.samples.size()));
  if (diff > cfg.frame_shift)
    throw std::runtime_error("evaluate_pair: length mismatch beyond one frame (" +
                             std::to_string(diff) + " samples)");

  EvalReport rep;
  Tensor ref_mag = stft(reference.samples);
  Tensor syn_mag = stft(synthesized.samples);
  const std::size_t frames = std::min(ref_mag.rows(), syn_mag.rows());
  const std::size_t bins = ref_mag.cols();
  double lsd_acc = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    double acc = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
      double lr = 20.0 * std::log10(std::max(ref_mag(t, b), 1e-10));
      double ls = 20.0 * std::log10(std::max(syn_mag(t, b), 1e-10));
      acc += (lr - ls) * (lr - ls);
    }
    lsd_acc += std::sqrt(acc / bins);
  }
  rep.lsd_db = frames > 0 ? lsd_acc / frames : 0.0;

  auto ref_pitch = estimate_f0(reference, cfg);
  auto syn_pitch = estimate_f0(synthesized, cfg);
  const std::size_t pframes = std::min(ref_pitch.size(), syn_pitch.size());
  std::size_t agree = 0, both_voiced = 0;
  double sq = 0.0;
  for (std::size_t t = 0; t < pframes; ++t) {
    if (ref_pitch[t].voiced == syn_pitch[t].voiced) ++agree;
    if (ref_pitch[t].voiced && syn_pitch[t].voiced) {
      double d = ref_pitch[t].f0 - syn_pitch[t].f0;
      sq += d * d;
      ++both_voiced;
    }
  }
  rep.voicing_agreement = pframes > 0 ? static_cast<double>(agree) / pframes : 1.0;
  rep.f0_rmse_hz = both_voiced > 0 ? std::sqrt(sq / both_voiced) : 0.0;
  return rep;
}

}  // namespace ilpc
