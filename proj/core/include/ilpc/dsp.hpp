#pragma once

#include <cstddef>
#include <vector>

#include "ilpc/tensor.hpp"

namespace ilpc {

struct AudioBuffer {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = 24000;
};

struct FrameConfig {
  int frame_shift = 120;      // 5 ms at 24 kHz
  int analysis_window = 480;  // 4x the hop
  int lp_order = 16;
  // Pitch tracking.
  double f0_min = 60.0;
  double f0_max = 400.0;
  double voicing_threshold = 0.3;  // on the normalized autocorrelation peak
  int pitch_window = 1024;
  // Bandwidth expansion applied to the estimated LP coefficients (a_i *=
  // gamma^i). On strongly periodic frames raw LP poles sit close to the unit
  // circle; free-running synthesis feeds its own sampling noise through that
  // resonance and blows up. Pulling the poles in trades a little prediction
  // gain for a loop that stays stable.
  double lp_gamma = 0.92;
};

// Per-frame all-pole predictor plus the samples it conditions on.
// coeffs follow the prediction-plus convention: p = sum_i coeffs[i-1] * x[n-i].
struct LpFilter {
  std::vector<double> coeffs;
  std::vector<double> history;  // most recent first, length == order

  explicit LpFilter(std::vector<double> c)
      : coeffs(std::move(c)), history(coeffs.size(), 0.0) {}
  LpFilter() = default;
};

// Frame-rate conditioning features. Row layout:
//   [log_f0, voicing_flag, log_energy, lsf_1 .. lsf_M]
// The per-frame LP coefficients derived from the LSFs are cached alongside.
struct FeatureTrack {
  std::size_t frame_count = 0;
  int lp_order = 0;
  std::vector<double> rows;  // frame_count x (lp_order + 3)
  std::vector<double> lpc;   // frame_count x lp_order

  std::size_t dim() const { return static_cast<std::size_t>(lp_order) + 3; }
  double* row(std::size_t t) { return &rows[t * dim()]; }
  const double* row(std::size_t t) const { return &rows[t * dim()]; }
  double log_f0(std::size_t t) const { return row(t)[0]; }
  bool voiced(std::size_t t) const { return row(t)[1] != 0.0; }
  double log_energy(std::size_t t) const { return row(t)[2]; }
  const double* alphas(std::size_t t) const { return &lpc[t * lp_order]; }
};

struct PitchMark {
  double f0 = 0.0;  // Hz, 0 when unvoiced
  bool voiced = false;
};

struct LpAnalysis {
  std::vector<double> coeffs;
  std::vector<double> reflections;
  double residual_energy = 0.0;
};

// Periodic Hann window of length n.
std::vector<double> hann_window(int n);

// Centered, Hann-windowed frames, one per hop; zero-padded at the edges.
// T = floor(len / frame_shift). Errors if the audio is shorter than one window.
std::vector<std::vector<double>> frame_signal(const AudioBuffer& audio,
                                              const FrameConfig& cfg);

// r_k = sum_n frame[n] * frame[n+k] for k = 0..max_lag.
std::vector<double> autocorrelate(const std::vector<double>& frame, int max_lag);

// Levinson-Durbin recursion with 1e-9*r0 diagonal loading. Errors on r0 <= 0.
LpAnalysis levinson_durbin(const std::vector<double>& r, int order);

// LSF angles ascending in (0, pi). Even orders only; errors on unstable input.
std::vector<double> lpc_to_lsf(const std::vector<double>& coeffs);
std::vector<double> lsf_to_lpc(const std::vector<double>& lsf);

// p_n per the prediction-plus convention; pure.
double predict_sample(const LpFilter& filter);

// Shift the newest emitted sample into slot 0.
void push_history(LpFilter& filter, double x);

std::vector<PitchMark> estimate_f0(const AudioBuffer& audio, const FrameConfig& cfg);

FeatureTrack extract_features(const AudioBuffer& audio, const FrameConfig& cfg);

// Magnitude spectrogram, frames x (fft_size/2 + 1), no centering.
Tensor stft(const std::vector<double>& samples, int fft_size = 512, int hop = 120);

// In-place complex radix-2 FFT (interleaved re/im). n must be a power of two.
void fft_inplace(std::vector<double>& re, std::vector<double>& im);

}  // namespace ilpc
