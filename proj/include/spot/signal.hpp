// signal.hpp
// Waveforms, STFT analysis/synthesis, energy normalization and resampling.

#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace spot {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  // Throws when the rate is not positive or a sample is not finite.
  void validate() const;
};

double energy(std::span<const double> x);

// Hann-windowed STFT parameters. Defaults: 32 ms window, 16 ms hop, 16 kHz.
struct StftConfig {
  int sample_rate = 16000;
  double window_ms = 32.0;
  double hop_ms = 16.0;

  int window_length() const;
  int hop() const;
  int num_bins() const { return window_length() / 2 + 1; }
  // Number of frames for a signal of `length` samples. Frame j covers
  // samples [j*hop - (window - hop), j*hop + hop).
  int num_frames(size_t length) const;
  // Throws unless the window is even, the hop divides it and the periodic
  // Hann window is constant-overlap-add at that hop.
  void validate() const;
  bool operator==(const StftConfig& o) const {
    return window_length() == o.window_length() && hop() == o.hop() &&
           sample_rate == o.sample_rate;
  }
};

// Periodic Hann window of the configured length.
std::vector<double> hann_window(int length);

using ComplexMatrix = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic>;

// One-sided spectrogram, values(i, j): frequency bin i, frame j.
struct ComplexSpectrogram {
  ComplexMatrix values;
  StftConfig config;

  int bins() const { return static_cast<int>(values.rows()); }
  int frames() const { return static_cast<int>(values.cols()); }
};

ComplexSpectrogram stft(const Waveform& x, const StftConfig& cfg);

// Weighted overlap-add (sum w^2 normalization) truncated or zero-padded to
// `length` samples.
Waveform istft(const ComplexSpectrogram& spec, const StftConfig& cfg, size_t length);

// Scales every source to unit l2 energy.
std::vector<Waveform> normalize_energy(const std::vector<Waveform>& sources);

// Polyphase windowed-sinc resampler, 64 taps per phase, Kaiser beta = 8.
Waveform resample(const Waveform& x, int target_rate);

}  // namespace spot
