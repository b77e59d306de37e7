// signal.cpp

#include "spot/signal.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "spot/common.hpp"
#include "spot/fft.hpp"

namespace spot {

void Waveform::validate() const {
  if (sample_rate <= 0) throw Error("waveform: sample rate must be positive");
  for (double v : samples)
    if (!std::isfinite(v)) throw Error("waveform: non-finite sample");
}

double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

int StftConfig::window_length() const {
  return static_cast<int>(std::lround(window_ms * 1e-3 * sample_rate));
}

int StftConfig::hop() const { return static_cast<int>(std::lround(hop_ms * 1e-3 * sample_rate)); }

int StftConfig::num_frames(size_t length) const {
  const auto n = static_cast<size_t>(window_length()), h = static_cast<size_t>(hop());
  return static_cast<int>((length + n - h + h - 1) / h);
}

void StftConfig::validate() const {
  if (sample_rate <= 0) throw Error("stft config: sample rate must be positive");
  const int n = window_length(), h = hop();
  if (n < 2 || n % 2 != 0) throw Error("stft config: window length must be even and >= 2");
  if (h <= 0 || n % h != 0) throw Error("stft config: hop must divide the window length");
  // Periodic Hann is COLA exactly when the hop is at most half the window.
  if (2 * h > n) throw Error("stft config: hop exceeds half the window (not COLA)");
}

std::vector<double> hann_window(int length) {
  std::vector<double> w(static_cast<size_t>(length));
  for (int n = 0; n < length; ++n)
    w[static_cast<size_t>(n)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
  return w;
}

ComplexSpectrogram stft(const Waveform& x, const StftConfig& cfg) {
  cfg.validate();
  if (x.empty()) throw Error("empty signal");
  if (x.sample_rate != cfg.sample_rate)
    throw Error("stft: waveform rate " + std::to_string(x.sample_rate) +
                " does not match config rate " + std::to_string(cfg.sample_rate));

  const int n = cfg.window_length(), hop = cfg.hop();
  const int frames = cfg.num_frames(x.size());
  const auto window = hann_window(n);
  const long head = n - hop;
  const long len = static_cast<long>(x.size());

  ComplexSpectrogram out;
  out.config = cfg;
  out.values.resize(cfg.num_bins(), frames);
  std::vector<double> frame(static_cast<size_t>(n));
  for (int j = 0; j < frames; ++j) {
    const long start = static_cast<long>(j) * hop - head;
    for (int k = 0; k < n; ++k) {
      const long idx = start + k;
      frame[static_cast<size_t>(k)] =
          (idx >= 0 && idx < len) ? x.samples[static_cast<size_t>(idx)] * window[static_cast<size_t>(k)]
                                  : 0.0;
    }
    const auto bins = fft::rfft(frame);
    for (int i = 0; i < out.bins(); ++i) out.values(i, j) = bins[static_cast<size_t>(i)];
  }
  return out;
}

Waveform istft(const ComplexSpectrogram& spec, const StftConfig& cfg, size_t length) {
  cfg.validate();
  if (!(spec.config == cfg)) throw Error("istft: spectrogram was computed with a different config");
  if (spec.bins() != cfg.num_bins()) throw Error("istft: bin count does not match window length");

  const int n = cfg.window_length(), hop = cfg.hop();
  const long head = n - hop;
  const auto window = hann_window(n);
  const long padded = static_cast<long>(spec.frames() - 1) * hop + n;

  std::vector<double> acc(static_cast<size_t>(padded), 0.0), norm(static_cast<size_t>(padded), 0.0);
  std::vector<std::complex<double>> bins(static_cast<size_t>(spec.bins()));
  for (int j = 0; j < spec.frames(); ++j) {
    for (int i = 0; i < spec.bins(); ++i) bins[static_cast<size_t>(i)] = spec.values(i, j);
    const auto frame = fft::irfft(bins, n);
    const long start = static_cast<long>(j) * hop;
    for (int k = 0; k < n; ++k) {
      const double w = window[static_cast<size_t>(k)];
      acc[static_cast<size_t>(start + k)] += w * frame[static_cast<size_t>(k)];
      norm[static_cast<size_t>(start + k)] += w * w;
    }
  }

  Waveform y;
  y.sample_rate = cfg.sample_rate;
  y.samples.assign(length, 0.0);
  for (size_t t = 0; t < length; ++t) {
    const long p = static_cast<long>(t) + head;
    if (p >= padded) break;
    const double d = norm[static_cast<size_t>(p)];
    y.samples[t] = d > 1e-12 ? acc[static_cast<size_t>(p)] / d : 0.0;
  }
  return y;
}

std::vector<Waveform> normalize_energy(const std::vector<Waveform>& sources) {
  std::vector<Waveform> out;
  out.reserve(sources.size());
  for (const auto& s : sources) {
    const double e = energy(s.samples);
    if (!(e > 0.0)) throw Error("silent source");
    Waveform w = s;
    const double g = 1.0 / std::sqrt(e);
    for (auto& v : w.samples) v *= g;
    out.push_back(std::move(w));
  }
  return out;
}

namespace {

constexpr int kResampleTaps = 64;
constexpr double kKaiserBeta = 8.0;

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

double kaiser(double t, double half_width) {
  const double r = t / half_width;
  if (std::abs(r) >= 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) /
         std::cyl_bessel_i(0.0, kKaiserBeta);
}

}  // namespace

Waveform resample(const Waveform& x, int target_rate) {
  if (target_rate <= 0) throw Error("resample: target rate must be positive");
  if (x.sample_rate <= 0) throw Error("resample: source rate must be positive");
  if (target_rate == x.sample_rate) return x;

  const long g = std::gcd(static_cast<long>(target_rate), static_cast<long>(x.sample_rate));
  const long up = target_rate / g, down = x.sample_rate / g;
  const double cutoff = std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
  constexpr int half = kResampleTaps / 2;
  const double half_width = half + 1.0;

  // table[p][k] weights input sample q + k - half + 1 for output phase p.
  std::vector<double> table(static_cast<size_t>(up * kResampleTaps));
  for (long p = 0; p < up; ++p) {
    const double frac = static_cast<double>(p) / static_cast<double>(up);
    for (int k = 0; k < kResampleTaps; ++k) {
      const double tau = frac - (k - half + 1);
      table[static_cast<size_t>(p * kResampleTaps + k)] =
          cutoff * sinc(cutoff * tau) * kaiser(tau, half_width);
    }
  }

  const long in_len = static_cast<long>(x.size());
  const long out_len = (in_len * up + down - 1) / down;
  Waveform y;
  y.sample_rate = target_rate;
  y.samples.assign(static_cast<size_t>(out_len), 0.0);
  for (long n = 0; n < out_len; ++n) {
    const long pos = n * down;
    const long q = pos / up, p = pos % up;
    const double* h = &table[static_cast<size_t>(p * kResampleTaps)];
    double acc = 0.0;
    for (int k = 0; k < kResampleTaps; ++k) {
      const long m = q + k - half + 1;
      if (m >= 0 && m < in_len) acc += h[k] * x.samples[static_cast<size_t>(m)];
    }
    y.samples[static_cast<size_t>(n)] = acc;
  }
  return y;
}

}  // namespace spot
