#include <algorithm>
#include <cmath>

#include "ilpc/io.hpp"

namespace ilpc {

namespace {
constexpr double kPi = 3.14159265358979323846;

// Slowly varying, guaranteed-stable all-pole track: LSFs random-walk on a
// jittered uniform grid and stay strictly increasing with a margin.
class FilterTrack {
 public:
  FilterTrack(int order, Rng& rng) : order_(order), lsf_(order) {
    const double margin = 0.05;
    for (int i = 0; i < order; ++i) {
      double base = kPi * (i + 1) / (order + 1);
      lsf_[i] = base + rng.uniform(-0.3, 0.3) * kPi / (order + 1);
      lsf_[i] = std::clamp(lsf_[i], margin, kPi - margin);
    }
    enforce_order();
  }

  std::vector<double> advance(Rng& rng) {
    for (int i = 0; i < order_; ++i) lsf_[i] += rng.uniform(-0.003, 0.003);
    enforce_order();
    // Bandwidth expansion: shrink every pole radius by gamma so the coloring
    // stays gentle and the excitation dominates the waveform shape.
    std::vector<double> coeffs = lsf_to_lpc(lsf_);
    double g = 1.0;
    for (double& c : coeffs) {
      g *= 0.3;
      c *= g;
    }
    return coeffs;
  }

 private:
  void enforce_order() {
    const double gap = 0.05;  // keeps resonances moderate, LP gain tame
    lsf_[0] = std::max(lsf_[0], gap);
    for (int i = 1; i < order_; ++i) lsf_[i] = std::max(lsf_[i], lsf_[i - 1] + gap);
    double top = kPi - gap;
    lsf_[order_ - 1] = std::min(lsf_[order_ - 1], top);
    for (int i = order_ - 2; i >= 0; --i) lsf_[i] = std::min(lsf_[i], lsf_[i + 1] - gap);
  }

  int order_;
  std::vector<double> lsf_;
};

}  // namespace

std::vector<CorpusItem> synth_corpus(std::size_t n_utterances, double duration_s,
                                     std::uint64_t seed, const FrameConfig& cfg) {
  if (n_utterances < 1) throw std::runtime_error("synth_corpus: need at least one utterance");
  Rng rng(seed);
  const int sr = 24000;
  const int hop = cfg.frame_shift;
  const int order = cfg.lp_order;
  const std::size_t total = static_cast<std::size_t>(duration_s * sr);
  const std::size_t frames = total / hop;

  std::vector<CorpusItem> items;
  items.reserve(n_utterances);
  for (std::size_t u = 0; u < n_utterances; ++u) {
    FilterTrack filter(order, rng);
    // F0 grid commensurate with the frame shift: the pitch phase at frame
    // boundaries cycles with a short period (1, 2, or 4 frames), so the
    // frame-positional kernels of the upsampler give the generation network an
    // absolute phase reference. With irrational period/shift ratios the
    // free-running phase has no anchor and drifts under sampling noise.
    static const double kF0Grid[] = {100.0, 150.0, 200.0, 250.0, 300.0};
    double f0 = kF0Grid[rng.below(5)];
    double phase = rng.uniform();

    // Per-frame voicing plan: voiced runs with short unvoiced gaps.
    std::vector<bool> voiced_plan(frames);
    std::size_t t = 0;
    bool voiced = rng.uniform() < 0.85;
    while (t < frames) {
      std::size_t run = voiced ? 40 + rng.below(80) : 10 + rng.below(20);
      for (std::size_t i = 0; i < run && t < frames; ++i) voiced_plan[t++] = voiced;
      voiced = !voiced;
    }

    std::vector<double> x(frames * hop, 0.0);
    std::vector<double> history(order, 0.0);
    for (std::size_t fr = 0; fr < frames; ++fr) {
      auto alphas = filter.advance(rng);
      // F0 contour: constant per utterance (sampled above); keeping the pitch
      // task stationary is what makes the desk-scale recipe trainable.
      for (int j = 0; j < hop; ++j) {
        double e;
        if (voiced_plan[fr]) {
          phase += f0 / sr;
          if (phase >= 1.0) phase -= 1.0;
          e = 0.2 * (2.0 * phase - 1.0) + 0.004 * rng.normal();
        } else {
          e = 0.04 * rng.normal();
        }
        double v = e;
        for (int k = 0; k < order; ++k) v += alphas[k] * history[k];
        for (int k = order - 1; k > 0; --k) history[k] = history[k - 1];
        history[0] = v;
        x[fr * hop + j] = v;
      }
    }
    double peak = 1e-12;
    for (double v : x) peak = std::max(peak, std::abs(v));
    const double gain = 0.5 / peak;
    for (double& v : x) v *= gain;

    CorpusItem item;
    item.audio.sample_rate = sr;
    item.audio.samples = std::move(x);
    item.features = extract_features(item.audio, cfg);
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace ilpc
