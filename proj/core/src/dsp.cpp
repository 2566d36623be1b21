#include "ilpc/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ilpc {

namespace {
constexpr double kPi = 3.14159265358979323846;

// Value of a symmetric polynomial (coeffs c[0..M], c[i]==c[M-i], M even) on
// the unit circle at angle w, with the linear-phase factor removed:
//   f(w) = c[m] + 2 * sum_{k<m} c[k] * cos((m-k) w),  m = M/2
double sym_poly_eval(const std::vector<double>& c, double w) {
  std::size_t m = (c.size() - 1) / 2;
  double v = c[m];
  for (std::size_t k = 0; k < m; ++k)
    v += 2.0 * c[k] * std::cos(static_cast<double>(m - k) * w);
  return v;
}

// Roots of a deflated symmetric polynomial in (0, pi): sign changes on a
// 2048-point grid, bisected down to 1e-12.
std::vector<double> sym_poly_roots(const std::vector<double>& c, std::size_t expected) {
  constexpr int kGrid = 2048;
  std::vector<double> roots;
  double prev_w = 0.0;
  double prev_v = sym_poly_eval(c, prev_w);
  for (int i = 1; i <= kGrid; ++i) {
    double w = kPi * static_cast<double>(i) / (kGrid + 1);
    double v = sym_poly_eval(c, w);
    if (prev_v == 0.0) {
      roots.push_back(prev_w);
    } else if ((prev_v < 0.0) != (v < 0.0)) {
      double lo = prev_w, hi = w, flo = prev_v;
      while (hi - lo > 1e-12) {
        double mid = 0.5 * (lo + hi);
        double fm = sym_poly_eval(c, mid);
        if (fm == 0.0) {
          lo = hi = mid;
        } else if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev_w = w;
    prev_v = v;
    if (roots.size() == expected) break;
  }
  return roots;
}

std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

}  // namespace

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / n));
  return w;
}

std::vector<std::vector<double>> frame_signal(const AudioBuffer& audio,
                                              const FrameConfig& cfg) {
  const int len = static_cast<int>(audio.samples.size());
  const int win = cfg.analysis_window;
  const int hop = cfg.frame_shift;
  if (len < win) throw std::runtime_error("frame_signal: input too short");
  const int frames = len / hop;
  std::vector<double> window = hann_window(win);
  std::vector<std::vector<double>> out(frames);
  for (int t = 0; t < frames; ++t) {
    const int start = t * hop + (hop - win) / 2;
    std::vector<double>& f = out[t];
    f.resize(win);
    for (int i = 0; i < win; ++i) {
      int idx = start + i;
      double x = (idx >= 0 && idx < len) ? audio.samples[idx] : 0.0;
      f[i] = x * window[i];
    }
  }
  return out;
}

std::vector<double> autocorrelate(const std::vector<double>& frame, int max_lag) {
  if (frame.empty()) throw std::runtime_error("autocorrelate: empty frame");
  if (max_lag >= static_cast<int>(frame.size()))
    throw std::runtime_error("autocorrelate: max_lag >= frame length");
  std::vector<double> r(max_lag + 1, 0.0);
  const int n = static_cast<int>(frame.size());
  for (int k = 0; k <= max_lag; ++k) {
    double s = 0.0;
    for (int i = 0; i + k < n; ++i) s += frame[i] * frame[i + k];
    r[k] = s;
  }
  return r;
}

LpAnalysis levinson_durbin(const std::vector<double>& r, int order) {
  if (static_cast<int>(r.size()) < order + 1)
    throw std::runtime_error("levinson_durbin: need order+1 autocorrelation lags");
  if (r[0] <= 0.0) throw std::runtime_error("levinson_durbin: degenerate frame");
  const double r0 = r[0] * (1.0 + 1e-9);  // diagonal loading
  LpAnalysis out;
  std::vector<double>& a = out.coeffs;
  a.assign(order, 0.0);
  out.reflections.reserve(order);
  double err = r0;
  for (int i = 1; i <= order; ++i) {
    double acc = r[i];
    for (int j = 1; j < i; ++j) acc -= a[j - 1] * r[i - j];
    double k = acc / err;
    out.reflections.push_back(k);
    std::vector<double> prev(a.begin(), a.begin() + (i - 1));
    for (int j = 1; j < i; ++j) a[j - 1] = prev[j - 1] - k * prev[i - j - 1];
    a[i - 1] = k;
    err *= (1.0 - k * k);
  }
  out.residual_energy = err;
  return out;
}

std::vector<double> lpc_to_lsf(const std::vector<double>& coeffs) {
  const int order = static_cast<int>(coeffs.size());
  if (order % 2 != 0) throw std::runtime_error("lpc_to_lsf: order must be even");
  const int m = order / 2;
  // A(z) = 1 - sum alpha_i z^-i, extended with a zero for the degree-M+1
  // palindromes.
  std::vector<double> a(order + 2, 0.0);
  a[0] = 1.0;
  for (int i = 0; i < order; ++i) a[i + 1] = -coeffs[i];
  std::vector<double> p(order + 2), q(order + 2);
  for (int i = 0; i <= order + 1; ++i) {
    p[i] = a[i] + a[order + 1 - i];
    q[i] = a[i] - a[order + 1 - i];
  }
  // Deflate the fixed roots at z = -1 (P) and z = +1 (Q).
  std::vector<double> p1(order + 1), q1(order + 1);
  p1[0] = p[0];
  q1[0] = q[0];
  for (int i = 1; i <= order; ++i) {
    p1[i] = p[i] - p1[i - 1];
    q1[i] = q[i] + q1[i - 1];
  }
  std::vector<double> wp = sym_poly_roots(p1, m);
  std::vector<double> wq = sym_poly_roots(q1, m);
  if (static_cast<int>(wp.size()) != m || static_cast<int>(wq.size()) != m)
    throw std::runtime_error("lpc_to_lsf: unstable filter (missing roots)");
  std::vector<double> lsf(order);
  for (int i = 0; i < m; ++i) {
    lsf[2 * i] = wp[i];
    lsf[2 * i + 1] = wq[i];
  }
  for (int i = 1; i < order; ++i)
    if (lsf[i] <= lsf[i - 1])
      throw std::runtime_error("lpc_to_lsf: unstable filter (roots not interleaved)");
  return lsf;
}

std::vector<double> lsf_to_lpc(const std::vector<double>& lsf) {
  const int order = static_cast<int>(lsf.size());
  if (order % 2 != 0) throw std::runtime_error("lsf_to_lpc: order must be even");
  for (int i = 0; i < order; ++i) {
    if (lsf[i] <= 0.0 || lsf[i] >= kPi)
      throw std::runtime_error("lsf_to_lpc: LSF outside (0, pi)");
    if (i > 0 && lsf[i] <= lsf[i - 1])
      throw std::runtime_error("lsf_to_lpc: LSFs not strictly increasing");
  }
  std::vector<double> p{1.0, 1.0};   // (1 + z^-1)
  std::vector<double> q{1.0, -1.0};  // (1 - z^-1)
  for (int i = 0; i < order; i += 2)
    p = poly_mul(p, {1.0, -2.0 * std::cos(lsf[i]), 1.0});
  for (int i = 1; i < order; i += 2)
    q = poly_mul(q, {1.0, -2.0 * std::cos(lsf[i]), 1.0});
  std::vector<double> coeffs(order);
  for (int i = 1; i <= order; ++i) coeffs[i - 1] = -0.5 * (p[i] + q[i]);
  return coeffs;
}

double predict_sample(const LpFilter& filter) {
  double p = 0.0;
  for (std::size_t i = 0; i < filter.coeffs.size(); ++i)
    p += filter.coeffs[i] * filter.history[i];
  return p;
}

void push_history(LpFilter& filter, double x) {
  if (filter.history.empty()) return;
  for (std::size_t i = filter.history.size() - 1; i > 0; --i)
    filter.history[i] = filter.history[i - 1];
  filter.history[0] = x;
}

std::vector<PitchMark> estimate_f0(const AudioBuffer& audio, const FrameConfig& cfg) {
  const int len = static_cast<int>(audio.samples.size());
  const int hop = cfg.frame_shift;
  const int win = cfg.pitch_window;
  const int frames = len / hop;
  const double sr = audio.sample_rate;
  const int lag_min = std::max(1, static_cast<int>(sr / cfg.f0_max));
  const int lag_max = std::min(win - 2, static_cast<int>(sr / cfg.f0_min));
  std::vector<PitchMark> out(frames);
  std::vector<double> s(win);
  for (int t = 0; t < frames; ++t) {
    const int start = t * hop + hop / 2 - win / 2;
    double energy = 0.0;
    for (int i = 0; i < win; ++i) {
      int idx = start + i;
      s[i] = (idx >= 0 && idx < len) ? audio.samples[idx] : 0.0;
      energy += s[i] * s[i];
    }
    if (energy < 1e-9) continue;  // silence: unvoiced, f0 = 0
    // Normalized cross-correlation over the pitch lag range.
    double best = 0.0, best_prev = 0.0, best_next = 0.0;
    int best_lag = 0;
    auto ncc = [&](int k) {
      double num = 0.0, e0 = 0.0, e1 = 0.0;
      for (int i = 0; i + k < win; ++i) {
        num += s[i] * s[i + k];
        e0 += s[i] * s[i];
        e1 += s[i + k] * s[i + k];
      }
      double den = std::sqrt(e0 * e1);
      return den > 0.0 ? num / den : 0.0;
    };
    struct Peak {
      int lag;
      double value, prev, next;
    };
    std::vector<Peak> peaks;
    double gmax = 0.0;
    double prev = ncc(lag_min - 1);
    double cur = ncc(lag_min);
    for (int k = lag_min; k <= lag_max; ++k) {
      double next = ncc(k + 1);
      if (cur >= prev && cur >= next && cur > 0.0) {
        peaks.push_back({k, cur, prev, next});
        gmax = std::max(gmax, cur);
      }
      prev = cur;
      cur = next;
    }
    // Subharmonics of a periodic signal score as high as the true period --
    // sometimes higher, when the pitch drifts across the window. Take the
    // shortest lag within 15% of the global peak, not the global argmax.
    for (const Peak& p : peaks) {
      if (p.value >= 0.85 * gmax) {
        best = p.value;
        best_lag = p.lag;
        best_prev = p.prev;
        best_next = p.next;
        break;
      }
    }
    if (best > cfg.voicing_threshold && best_lag > 0) {
      // Parabolic interpolation around the peak lag.
      double denom = best_prev - 2.0 * best + best_next;
      double delta = denom != 0.0 ? 0.5 * (best_prev - best_next) / denom : 0.0;
      delta = std::clamp(delta, -0.5, 0.5);
      out[t].f0 = sr / (best_lag + delta);
      out[t].voiced = true;
    }
  }
  // Median cleanup: an estimate that disagrees with its voiced neighborhood by
  // more than 25% is an octave flip; snap it to the local median.
  std::vector<double> raw(frames);
  for (int t = 0; t < frames; ++t) raw[t] = out[t].f0;
  for (int t = 0; t < frames; ++t) {
    if (!out[t].voiced) continue;
    std::vector<double> local;
    for (int k = std::max(0, t - 2); k <= std::min(frames - 1, t + 2); ++k)
      if (out[k].voiced) local.push_back(raw[k]);
    std::nth_element(local.begin(), local.begin() + local.size() / 2, local.end());
    const double med = local[local.size() / 2];
    if (std::abs(out[t].f0 / med - 1.0) > 0.25) out[t].f0 = med;
  }
  return out;
}

FeatureTrack extract_features(const AudioBuffer& audio, const FrameConfig& cfg) {
  const int order = cfg.lp_order;
  auto frames = frame_signal(audio, cfg);
  auto pitch = estimate_f0(audio, cfg);
  FeatureTrack track;
  track.frame_count = frames.size();
  track.lp_order = order;
  track.rows.resize(track.frame_count * track.dim());
  track.lpc.resize(track.frame_count * order);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    auto r = autocorrelate(frames[t], order);
    double* row = track.row(t);
    row[0] = pitch[t].voiced ? std::log(pitch[t].f0) : 0.0;
    row[1] = pitch[t].voiced ? 1.0 : 0.0;
    row[2] = std::log(r[0] + 1e-10);
    std::vector<double> lsf;
    std::vector<double> alphas;
    if (r[0] > 1e-12) {
      alphas = levinson_durbin(r, order).coeffs;
      double g = 1.0;
      for (double& c : alphas) {
        g *= cfg.lp_gamma;
        c *= g;
      }
      lsf = lpc_to_lsf(alphas);
    } else {
      // Degenerate frame: flat predictor on the uniform LSF grid.
      alphas.assign(order, 0.0);
      lsf.resize(order);
      for (int i = 0; i < order; ++i) lsf[i] = kPi * (i + 1) / (order + 1);
    }
    std::copy(lsf.begin(), lsf.end(), row + 3);
    std::copy(alphas.begin(), alphas.end(), track.lpc.begin() + t * order);
  }
  return track;
}

void fft_inplace(std::vector<double>& re, std::vector<double>& im) {
  const std::size_t n = re.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::runtime_error("fft: size must be a power of two");
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t half = 1; half < n; half <<= 1) {
    const double ang = -kPi / static_cast<double>(half);
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (std::size_t base = 0; base < n; base += half << 1) {
      double cr = 1.0, ci = 0.0;
      for (std::size_t k = 0; k < half; ++k) {
        const std::size_t a = base + k, b = base + k + half;
        const double tr = re[b] * cr - im[b] * ci;
        const double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

Tensor stft(const std::vector<double>& samples, int fft_size, int hop) {
  const int len = static_cast<int>(samples.size());
  if (len < fft_size) throw std::runtime_error("stft: input shorter than fft_size");
  const int frames = (len - fft_size) / hop + 1;
  const int bins = fft_size / 2 + 1;
  std::vector<double> window = hann_window(fft_size);
  Tensor out(frames, bins);
  std::vector<double> re(fft_size), im(fft_size);
  for (int t = 0; t < frames; ++t) {
    const int start = t * hop;
    for (int i = 0; i < fft_size; ++i) {
      re[i] = samples[start + i] * window[i];
      im[i] = 0.0;
    }
    fft_inplace(re, im);
    for (int b = 0; b < bins; ++b)
      out(t, b) = std::sqrt(re[b] * re[b] + im[b] * im[b]);
  }
  return out;
}

}  // namespace ilpc
