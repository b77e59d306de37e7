// fft.hpp
// Thin FFTW wrappers. Plan creation is serialized internally, execution is
// thread safe, so every function here may be called concurrently.

#pragma once

#include <complex>
#include <span>
#include <vector>

namespace spot::fft {

// One-sided real DFT of `frame` (length n), returns n/2 + 1 bins.
std::vector<std::complex<double>> rfft(std::span<const double> frame);

// Inverse of rfft for an n-point transform, normalized so that
// irfft(rfft(x), n) == x.
std::vector<double> irfft(std::span<const std::complex<double>> bins, int n);

// Smallest size >= n that FFTW handles efficiently (2^a 3^b 5^c).
int good_size(int n);

// Full linear convolution, length a.size() + b.size() - 1.
std::vector<double> convolve(std::span<const double> a, std::span<const double> b);

// c[k] = sum_n x[n + k] * y[n] for k in [0, max_lag]. Used for the
// normal equations of least-squares FIR projection.
std::vector<double> correlate(std::span<const double> x, std::span<const double> y,
                              int max_lag);

}  // namespace spot::fft
