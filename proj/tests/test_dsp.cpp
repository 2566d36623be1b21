#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "ilpc/dsp.hpp"
#include "ilpc/rng.hpp"

using namespace ilpc;

namespace {

constexpr double kPi = std::numbers::pi;

AudioBuffer sine(double hz, double seconds, double amp = 0.5, int rate = 24000) {
  AudioBuffer a;
  a.sample_rate = rate;
  const std::size_t n = static_cast<std::size_t>(seconds * rate);
  a.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    a.samples[i] = amp * std::sin(2.0 * kPi * hz * i / rate);
  return a;
}

// x_n = sum_i alpha_i x_{n-i} + excitation
std::vector<double> ar_process(const std::vector<double>& alpha, std::size_t n,
                               Rng& rng, double exc_scale = 1.0) {
  std::vector<double> x(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double v = exc_scale * rng.normal();
    for (std::size_t i = 0; i < alpha.size() && i < t; ++i)
      v += alpha[i] * x[t - 1 - i];
    x[t] = v;
  }
  return x;
}

}  // namespace

TEST_CASE("hann window is periodic and symmetric around the midpoint") {
  auto w = hann_window(8);
  CHECK(w[0] == doctest::Approx(0.0));
  CHECK(w[4] == doctest::Approx(1.0));
  CHECK(w[1] == doctest::Approx(w[7]));
  CHECK(w[2] == doctest::Approx(w[6]));
}

TEST_CASE("frame_signal: constant input reproduces the window") {
  AudioBuffer a;
  a.samples.assign(16, 1.0);
  FrameConfig cfg;
  cfg.analysis_window = 4;
  cfg.frame_shift = 2;
  auto frames = frame_signal(a, cfg);
  REQUIRE(frames.size() == 8);
  auto w = hann_window(4);
  // interior frame, away from the zero-padded edges
  for (int i = 0; i < 4; ++i) CHECK(frames[4][i] == doctest::Approx(w[i]));
}

TEST_CASE("frame_signal: frame count is floor(len / hop)") {
  AudioBuffer a;
  a.samples.assign(480, 0.25);
  FrameConfig cfg;
  CHECK(frame_signal(a, cfg).size() == 4);
}

TEST_CASE("frame_signal: silence gives all-zero frames") {
  AudioBuffer a;
  a.samples.assign(600, 0.0);
  FrameConfig cfg;
  for (const auto& f : frame_signal(a, cfg))
    for (double v : f) CHECK(v == 0.0);
}

TEST_CASE("frame_signal: input shorter than one window errors") {
  AudioBuffer a;
  a.samples.assign(100, 0.1);
  FrameConfig cfg;  // window 480
  CHECK_THROWS(frame_signal(a, cfg));
}

TEST_CASE("autocorrelate: impulse and hand arithmetic") {
  CHECK(autocorrelate({1, 0, 0, 0}, 2) == std::vector<double>{1, 0, 0});
  CHECK(autocorrelate({1, 1}, 1) == std::vector<double>{2, 1});
  CHECK_THROWS(autocorrelate({}, 0));
}

TEST_CASE("autocorrelate: white noise decorrelates") {
  Rng rng(11);
  std::vector<double> x(100000);
  for (double& v : x) v = rng.normal();
  auto r = autocorrelate(x, 1);
  CHECK(std::abs(r[1] / r[0]) < 0.02);
}

TEST_CASE("levinson_durbin: white noise gives zero predictor") {
  auto lp = levinson_durbin({1, 0, 0}, 2);
  CHECK(lp.coeffs[0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(lp.coeffs[1] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("levinson_durbin: order one is r1/r0") {
  auto lp = levinson_durbin({1, 0.9}, 1);
  CHECK(lp.coeffs[0] == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("levinson_durbin: degenerate r0 errors") {
  CHECK_THROWS(levinson_durbin({0.0, 0.0}, 1));
  CHECK_THROWS(levinson_durbin({-1.0, 0.0}, 1));
}

TEST_CASE("levinson_durbin: AR(3) recovery and reflection bounds") {
  Rng rng(3);
  const std::vector<double> alpha{0.6, -0.3, 0.1};
  auto x = ar_process(alpha, 100000, rng);
  auto r = autocorrelate(x, 3);
  auto lp = levinson_durbin(r, 3);
  for (int i = 0; i < 3; ++i) CHECK(lp.coeffs[i] == doctest::Approx(alpha[i]).epsilon(0.04));
  for (double k : lp.reflections) CHECK(std::abs(k) < 1.0);
}

TEST_CASE("lsf: flat order-2 predictor has the symmetric roots") {
  auto lsf = lpc_to_lsf({0.0, 0.0});
  REQUIRE(lsf.size() == 2);
  CHECK(lsf[0] == doctest::Approx(kPi / 3).epsilon(1e-9));
  CHECK(lsf[1] == doctest::Approx(2 * kPi / 3).epsilon(1e-9));
}

TEST_CASE("lsf: roundtrip on random stable order-16 filters") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    // build a stable filter from conjugate root pairs with radius < 0.98
    std::vector<double> poly{1.0};
    for (int p = 0; p < 8; ++p) {
      double radius = 0.1 + 0.85 * rng.uniform();
      double angle = kPi * rng.uniform();
      // multiply by (1 - 2 r cos(a) z^-1 + r^2 z^-2)
      std::vector<double> next(poly.size() + 2, 0.0);
      for (std::size_t i = 0; i < poly.size(); ++i) {
        next[i] += poly[i];
        next[i + 1] -= 2.0 * radius * std::cos(angle) * poly[i];
        next[i + 2] += radius * radius * poly[i];
      }
      poly = next;
    }
    std::vector<double> alpha(16);
    for (int i = 0; i < 16; ++i) alpha[i] = -poly[i + 1];
    auto lsf = lpc_to_lsf(alpha);
    for (std::size_t i = 1; i < lsf.size(); ++i) CHECK(lsf[i] > lsf[i - 1]);
    CHECK(lsf.front() > 0.0);
    CHECK(lsf.back() < kPi);
    auto back = lsf_to_lpc(lsf);
    for (int i = 0; i < 16; ++i) CHECK(std::abs(back[i] - alpha[i]) < 1e-8);
  }
}

TEST_CASE("lsf: non-increasing input errors") {
  CHECK_THROWS(lsf_to_lpc({1.0, 0.5}));
}

TEST_CASE("lpc_to_lsf: unstable filter errors") {
  CHECK_THROWS(lpc_to_lsf({2.5, 0.0}));  // root outside the unit circle
}

TEST_CASE("predict_sample: hand values and linearity") {
  LpFilter zero({0.0, 0.0});
  zero.history = {0.7, -0.3};
  CHECK(predict_sample(zero) == 0.0);

  LpFilter one({1.0});
  one.history = {0.5};
  CHECK(predict_sample(one) == 0.5);

  LpFilter two({0.9, -0.2});
  two.history = {0.4, 0.1};
  CHECK(predict_sample(two) == doctest::Approx(0.34).epsilon(1e-15));

  // linearity in the history
  LpFilter a({0.9, -0.2}), b({0.9, -0.2}), mix({0.9, -0.2});
  a.history = {0.4, 0.1};
  b.history = {-0.2, 0.3};
  for (int i = 0; i < 2; ++i) mix.history[i] = 2.0 * a.history[i] + 3.0 * b.history[i];
  CHECK(predict_sample(mix) ==
        doctest::Approx(2.0 * predict_sample(a) + 3.0 * predict_sample(b)).epsilon(1e-15));
}

TEST_CASE("push_history shifts with newest first") {
  LpFilter f({0.0, 0.0});
  f.history = {1.0, 2.0};  // [a, b]
  push_history(f, 3.0);
  CHECK(f.history == std::vector<double>{3.0, 1.0});

  for (int i = 0; i < 2; ++i) push_history(f, 0.0);
  CHECK(f.history == std::vector<double>{0.0, 0.0});

  LpFilter g({1.0, 0.0});
  push_history(g, 0.25);
  CHECK(predict_sample(g) == 0.25);
}

TEST_CASE("estimate_f0: 200 Hz sine is voiced at 200 Hz") {
  auto marks = estimate_f0(sine(200.0, 1.0), FrameConfig{});
  std::size_t voiced = 0;
  for (const auto& m : marks) {
    if (!m.voiced) continue;
    ++voiced;
    CHECK(m.f0 == doctest::Approx(200.0).epsilon(0.01));
  }
  CHECK(voiced > marks.size() / 2);
}

TEST_CASE("estimate_f0: white noise is mostly unvoiced") {
  Rng rng(5);
  AudioBuffer a;
  a.samples.resize(24000);
  for (double& v : a.samples) v = 0.3 * rng.normal();
  auto marks = estimate_f0(a, FrameConfig{});
  std::size_t unvoiced = 0;
  for (const auto& m : marks) unvoiced += !m.voiced;
  CHECK(unvoiced >= marks.size() * 9 / 10);
}

TEST_CASE("estimate_f0: silence is unvoiced with zero f0") {
  AudioBuffer a;
  a.samples.assign(24000, 0.0);
  for (const auto& m : estimate_f0(a, FrameConfig{})) {
    CHECK(!m.voiced);
    CHECK(m.f0 == 0.0);
  }
}

TEST_CASE("extract_features: row width and silence energy floor") {
  AudioBuffer a;
  a.samples.assign(24000, 0.0);
  FrameConfig cfg;
  auto track = extract_features(a, cfg);
  CHECK(track.dim() == 19);
  CHECK(track.frame_count == 200);
  CHECK(track.log_f0(5) == 0.0);
  CHECK(!track.voiced(5));
  CHECK(track.log_energy(5) == doctest::Approx(std::log(1e-10)).epsilon(1e-3));
}

TEST_CASE("extract_features: AR(2) noise recovers the generating LSFs") {
  Rng rng(23);
  const std::vector<double> alpha{1.2, -0.6};
  auto x = ar_process(alpha, 24000, rng, 0.01);
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  AudioBuffer a;
  a.samples = x;
  for (double& v : a.samples) v *= 0.5 / peak;

  FrameConfig cfg;
  cfg.lp_order = 2;
  auto track = extract_features(a, cfg);
  // extract_features reports the bandwidth-expanded filter.
  auto target = lpc_to_lsf({alpha[0] * cfg.lp_gamma, alpha[1] * cfg.lp_gamma * cfg.lp_gamma});
  // single-window estimates are noisy; average over interior frames
  double m0 = 0.0, m1 = 0.0;
  const std::size_t first = 20, last = 180;
  for (std::size_t t = first; t < last; ++t) {
    m0 += track.row(t)[3];
    m1 += track.row(t)[4];
  }
  m0 /= last - first;
  m1 /= last - first;
  CHECK(std::abs(m0 - target[0]) < 0.05);
  CHECK(std::abs(m1 - target[1]) < 0.05);
}

TEST_CASE("extract_features is deterministic") {
  auto a = sine(150.0, 0.5);
  FrameConfig cfg;
  auto t1 = extract_features(a, cfg);
  auto t2 = extract_features(a, cfg);
  CHECK(t1.rows == t2.rows);
  CHECK(t1.lpc == t2.lpc);
}

TEST_CASE("stft: zero signal, sine peak bin, and sign invariance") {
  std::vector<double> zeros(2048, 0.0);
  Tensor z = stft(zeros);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0);

  auto s = sine(750.0, 0.5);
  Tensor mag = stft(s.samples);
  REQUIRE(mag.cols() == 257);
  for (std::size_t f = 0; f < mag.rows(); ++f) {
    std::size_t best = 0;
    for (std::size_t b = 1; b < mag.cols(); ++b)
      if (mag(f, b) > mag(f, best)) best = b;
    CHECK(best == 16);  // 750 * 512 / 24000
  }

  auto flipped = s.samples;
  for (double& v : flipped) v = -v;
  Tensor mag2 = stft(flipped);
  for (std::size_t i = 0; i < mag.size(); ++i)
    CHECK(mag2[i] == doctest::Approx(mag[i]).epsilon(1e-12));
}

TEST_CASE("stft: Parseval per frame") {
  Rng rng(7);
  std::vector<double> x(512);
  for (double& v : x) v = rng.normal();
  Tensor mag = stft(x, 512, 120);
  REQUIRE(mag.rows() == 1);
  auto w = hann_window(512);
  double time_energy = 0.0;
  for (int i = 0; i < 512; ++i) time_energy += w[i] * w[i] * x[i] * x[i];
  // one-sided spectrum: interior bins appear twice
  double freq_energy = mag(0, 0) * mag(0, 0) + mag(0, 256) * mag(0, 256);
  for (int b = 1; b < 256; ++b) freq_energy += 2.0 * mag(0, b) * mag(0, b);
  CHECK(freq_energy / 512.0 == doctest::Approx(time_energy).epsilon(1e-9));
}

TEST_CASE("stft: too-short input errors") {
  std::vector<double> x(100, 0.1);
  CHECK_THROWS(stft(x));
}
