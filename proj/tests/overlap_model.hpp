#pragma once

// Sample-level conversation model for the overlap-leakage check: two harmonic
// voices with a shared stretch, and an autocorrelation embedding whose lags
// span several shuffle blocks.

#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "convo_anon/metrics.hpp"
#include "convo_anon/simulator.hpp"

namespace overlap_model {

inline constexpr double kRate = 8000.0;
inline constexpr std::size_t kFrame = 256;
inline constexpr std::size_t kFrameHop = 128;
inline constexpr std::size_t kMinLag = 16;
inline constexpr std::size_t kMaxLag = 100;

struct Voice {
  double f0 = 150.0;
  double drift_rate = 0.5;  // Hz of the slow pitch wobble
  double drift_depth = 0.03;
  double drift_phase = 0.0;
  std::vector<double> amplitudes;  // per harmonic
};

inline Voice random_voice(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Voice v;
  v.f0 = 90.0 + 170.0 * u(rng);
  v.drift_rate = 0.2 + 0.8 * u(rng);
  v.drift_depth = 0.02 + 0.04 * u(rng);
  v.drift_phase = 2 * std::numbers::pi * u(rng);
  const double decay = 0.1 + 0.3 * u(rng);
  for (int h = 1; h * v.f0 < 3600.0; ++h) v.amplitudes.push_back(std::exp(-decay * h) * (0.5 + u(rng)));
  return v;
}

// Samples of `voice` over [t0, t0 + n / rate), phase-continuous in absolute time.
inline std::vector<double> render(const Voice& voice, double t0, std::size_t n) {
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t0 + static_cast<double>(i) / kRate;
    // Integrated instantaneous frequency of the wobbling fundamental.
    const double w = 2 * std::numbers::pi * voice.drift_rate;
    const double phase = 2 * std::numbers::pi * voice.f0 *
                         (t - voice.drift_depth / w * (std::cos(w * t + voice.drift_phase) -
                                                       std::cos(voice.drift_phase)));
    for (std::size_t h = 0; h < voice.amplitudes.size(); ++h) {
      out[i] += voice.amplitudes[h] * std::sin(static_cast<double>(h + 1) * phase);
    }
  }
  return out;
}

inline std::vector<double> embed(std::span<const double> x) {
  std::vector<double> out(kMaxLag - kMinLag + 1, 0.0);
  for (std::size_t start = 0; start + kFrame <= x.size(); start += kFrameHop) {
    const double* f = x.data() + start;
    double r0 = 0.0;
    for (std::size_t i = 0; i < kFrame; ++i) r0 += f[i] * f[i];
    if (r0 <= 0.0) continue;
    for (std::size_t lag = kMinLag; lag <= kMaxLag; ++lag) {
      double r = 0.0;
      for (std::size_t i = 0; i + lag < kFrame; ++i) r += f[i] * f[i + lag];
      out[lag - kMinLag] += r / r0;
    }
  }
  return out;
}

struct Conversation {
  std::vector<double> samples;
  convo_anon::OverlapRegion overlap;
  double a_end = 0.0;    // A alone on [0, overlap.onset)
  double b_start = 0.0;  // B alone on [overlap.end(), b_end)
  double b_end = 0.0;
};

inline Conversation make_conversation(std::mt19937_64& rng, double noise) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Voice a = random_voice(rng), b = random_voice(rng);
  const double la = 3.0 + 3.0 * u(rng), lb = 3.0 + 3.0 * u(rng), o = 0.5 + 1.5 * u(rng);
  const double alpha = 0.3 + 0.4 * u(rng);
  Conversation c;
  c.overlap = {la - o, o, {"A", "B"}};
  c.a_end = la;
  c.b_start = la - o;
  c.b_end = la - o + lb;
  const auto n = static_cast<std::size_t>(std::llround(c.b_end * kRate));
  const auto na = static_cast<std::size_t>(std::llround(la * kRate));
  const auto nb0 = static_cast<std::size_t>(std::llround(c.b_start * kRate));
  const auto va = render(a, 0.0, na);
  const auto vb = render(b, c.b_start, n - nb0);
  c.samples.assign(n, 0.0);
  std::normal_distribution<double> g(0.0, noise);
  for (std::size_t i = 0; i < n; ++i) {
    const bool in_a = i < na, in_b = i >= nb0;
    const double wa = in_a && in_b ? 2 * alpha : 1.0;
    const double wb = in_a && in_b ? 2 * (1 - alpha) : 1.0;
    c.samples[i] = (in_a ? wa * va[i] : 0.0) + (in_b ? wb * vb[i - nb0] : 0.0) + g(rng);
  }
  return c;
}

inline std::span<const double> slice(const std::vector<double>& x, double lo, double hi) {
  const auto a = static_cast<std::size_t>(std::llround(lo * kRate));
  const auto b = static_cast<std::size_t>(std::llround(hi * kRate));
  return {x.data() + a, b - a};
}

struct Trials {
  std::vector<double> positives;
  std::vector<double> negatives;
};

// Negatives: overlap stretch against the single-speaker stretch before and
// after it. Positives: each single-speaker stretch split in half.
inline void add_trials(const Conversation& c, const std::vector<double>& samples, Trials& t,
                       bool with_overlap = true) {
  const double ov_lo = c.overlap.onset, ov_hi = c.overlap.end();
  const auto ea = embed(slice(samples, 0.0, ov_lo));
  const auto eb = embed(slice(samples, ov_hi, c.b_end));
  t.positives.push_back(convo_anon::cosine(embed(slice(samples, 0.0, ov_lo / 2)),
                                           embed(slice(samples, ov_lo / 2, ov_lo))));
  const double mid = (ov_hi + c.b_end) / 2;
  t.positives.push_back(convo_anon::cosine(embed(slice(samples, ov_hi, mid)),
                                           embed(slice(samples, mid, c.b_end))));
  if (with_overlap) {
    const auto eo = embed(slice(samples, ov_lo, ov_hi));
    t.negatives.push_back(convo_anon::cosine(eo, ea));
    t.negatives.push_back(convo_anon::cosine(eo, eb));
  }
}

}  // namespace overlap_model
