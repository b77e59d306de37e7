// synth.cpp

#include "spot/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "spot/common.hpp"

namespace spot {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Formant {
  double freq, bandwidth;
};

double formant_gain(double f, const Formant (&fm)[3]) {
  double g = 0.0;
  for (const auto& x : fm) {
    const double d = (f - x.freq) / x.bandwidth;
    g += 1.0 / (1.0 + d * d);
  }
  return g / std::sqrt(1.0 + f / 500.0);  // mild spectral tilt
}

void peak_normalize(Waveform& w, double peak) {
  double m = 0.0;
  for (double v : w.samples) m = std::max(m, std::abs(v));
  if (m > 0.0)
    for (auto& v : w.samples) v *= peak / m;
}

}  // namespace

Waveform speech_like(double seconds, int sample_rate, uint64_t seed) {
  if (!(seconds > 0.0) || sample_rate <= 0) throw Error("speech_like: bad duration or rate");
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  std::normal_distribution<double> gauss(0.0, 1.0);

  const auto total = static_cast<size_t>(seconds * sample_rate);
  Waveform w{std::vector<double>(total, 0.0), sample_rate};
  const double fs = sample_rate;
  const double base_f0 = uni(95.0, 230.0);

  size_t pos = static_cast<size_t>(uni(0.0, 0.15) * fs);
  while (pos < total) {
    const double kind = uni(0.0, 1.0);
    if (kind < 0.15) {
      // unvoiced burst: first-differenced noise
      const auto len = static_cast<size_t>(uni(0.04, 0.1) * fs);
      double prev = 0.0;
      const double amp = uni(0.05, 0.15);
      for (size_t t = 0; t < len && pos + t < total; ++t) {
        const double n = gauss(rng);
        const double env = std::sin(std::numbers::pi * (t + 0.5) / len);
        w.samples[pos + t] += amp * env * (n - prev);
        prev = n;
      }
      pos += len;
    } else {
      // voiced syllable
      const auto len = static_cast<size_t>(uni(0.12, 0.32) * fs);
      const Formant fm[3] = {{uni(300.0, 800.0), 80.0}, {uni(900.0, 2300.0), 110.0}, {uni(2400.0, 3200.0), 160.0}};
      const double f0_start = base_f0 * uni(0.85, 1.2);
      const double f0_end = base_f0 * uni(0.8, 1.15);
      const double amp = uni(0.5, 1.0);
      const int harmonics = static_cast<int>(std::min(40.0, 0.45 * fs / f0_start));
      std::vector<double> phase(static_cast<size_t>(harmonics), 0.0);
      for (auto& p : phase) p = uni(0.0, kTwoPi);
      for (size_t t = 0; t < len && pos + t < total; ++t) {
        const double x = static_cast<double>(t) / len;
        const double f0 = f0_start + (f0_end - f0_start) * x;
        const double env = std::pow(std::sin(std::numbers::pi * x), 0.6);
        double v = 0.0;
        for (int h = 1; h <= harmonics; ++h) {
          const double f = h * f0;
          if (f >= 0.45 * fs) break;
          auto& ph = phase[static_cast<size_t>(h - 1)];
          ph += kTwoPi * f / fs;
          v += formant_gain(f, fm) * std::sin(ph);
        }
        w.samples[pos + t] += amp * env * v;
      }
      pos += len;
    }
    // pause between events
    pos += static_cast<size_t>(uni(0.02, 0.22) * fs);
  }
  peak_normalize(w, 0.5);
  return w;
}

Waveform harmonic_tone(double f0, int harmonics, double seconds, int sample_rate,
                       double gate_seconds, uint64_t seed) {
  if (!(f0 > 0.0) || !(seconds > 0.0) || sample_rate <= 0) throw Error("harmonic_tone: bad parameters");
  const auto total = static_cast<size_t>(seconds * sample_rate);
  Waveform w{std::vector<double>(total, 0.0), sample_rate};
  std::mt19937_64 rng(seed);
  const size_t block = gate_seconds > 0.0 ? static_cast<size_t>(gate_seconds * sample_rate) : total;
  const size_t ramp = std::min<size_t>(block / 4, static_cast<size_t>(0.01 * sample_rate));
  for (size_t start = 0; start < total; start += block) {
    const bool on = gate_seconds <= 0.0 || std::bernoulli_distribution(0.6)(rng);
    if (!on) continue;
    for (size_t t = start; t < std::min(total, start + block); ++t) {
      const size_t u = t - start;
      double env = 1.0;
      if (ramp > 0 && u < ramp) env = static_cast<double>(u) / ramp;
      if (ramp > 0 && block - u <= ramp) env = std::min(env, static_cast<double>(block - u) / ramp);
      double v = 0.0;
      for (int h = 1; h <= harmonics; ++h) {
        const double f = h * f0;
        if (f >= 0.5 * sample_rate) break;
        v += std::sin(kTwoPi * f * t / sample_rate) / h;
      }
      w.samples[t] = env * v;
    }
  }
  peak_normalize(w, 0.5);
  return w;
}

}  // namespace spot
