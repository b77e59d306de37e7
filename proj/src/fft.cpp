// fft.cpp

#include "spot/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>

#include "spot/common.hpp"

namespace spot::fft {

namespace {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

RealBuffer alloc_real(int n) { return RealBuffer(fftw_alloc_real(static_cast<size_t>(n))); }
ComplexBuffer alloc_complex(int n) {
  return ComplexBuffer(fftw_alloc_complex(static_cast<size_t>(n)));
}

// Plans are cached per size and live for the whole process. The FFTW planner
// is not reentrant, fftw_execute_dft_* on fresh aligned buffers is.
struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

const PlanPair& plans_for(int n) {
  static std::map<int, PlanPair> cache;
  std::lock_guard lock(planner_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  auto in = alloc_real(n);
  auto out = alloc_complex(n / 2 + 1);
  PlanPair p;
  p.forward = fftw_plan_dft_r2c_1d(n, in.get(), out.get(), FFTW_ESTIMATE);
  p.backward = fftw_plan_dft_c2r_1d(n, out.get(), in.get(), FFTW_ESTIMATE);
  if (!p.forward || !p.backward) throw Error("fftw planning failed for size " + std::to_string(n));
  return cache.emplace(n, p).first->second;
}

}  // namespace

std::vector<std::complex<double>> rfft(std::span<const double> frame) {
  const int n = static_cast<int>(frame.size());
  if (n == 0) throw Error("rfft: empty frame");
  const auto& plan = plans_for(n);
  auto in = alloc_real(n);
  auto out = alloc_complex(n / 2 + 1);
  std::copy(frame.begin(), frame.end(), in.get());
  fftw_execute_dft_r2c(plan.forward, in.get(), out.get());
  std::vector<std::complex<double>> bins(static_cast<size_t>(n / 2 + 1));
  for (size_t k = 0; k < bins.size(); ++k) bins[k] = {out[k][0], out[k][1]};
  return bins;
}

std::vector<double> irfft(std::span<const std::complex<double>> bins, int n) {
  if (n <= 0 || static_cast<int>(bins.size()) != n / 2 + 1)
    throw Error("irfft: bin count does not match transform size");
  const auto& plan = plans_for(n);
  auto in = alloc_complex(n / 2 + 1);
  auto out = alloc_real(n);
  for (size_t k = 0; k < bins.size(); ++k) {
    in[k][0] = bins[k].real();
    in[k][1] = bins[k].imag();
  }
  // c2r ignores the imaginary parts of DC and Nyquist, which is the
  // Hermitian projection we want.
  fftw_execute_dft_c2r(plan.backward, in.get(), out.get());
  std::vector<double> x(out.get(), out.get() + n);
  const double scale = 1.0 / n;
  for (auto& v : x) v *= scale;
  return x;
}

int good_size(int n) {
  if (n <= 1) return 1;
  int best = 1;
  while (best < n) best *= 2;
  for (int p5 = 1; p5 <= best; p5 *= 5)
    for (int p35 = p5; p35 <= best; p35 *= 3)
      for (int v = p35; v <= best; v *= 2)
        if (v >= n && v < best) best = v;
  return best;
}

std::vector<double> convolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  const int out_len = static_cast<int>(a.size() + b.size() - 1);
  // Short kernels are cheaper directly.
  if (std::min(a.size(), b.size()) <= 32) {
    std::vector<double> y(static_cast<size_t>(out_len), 0.0);
    for (size_t i = 0; i < a.size(); ++i)
      for (size_t j = 0; j < b.size(); ++j) y[i + j] += a[i] * b[j];
    return y;
  }
  const int n = good_size(out_len);
  std::vector<double> pa(static_cast<size_t>(n), 0.0), pb(static_cast<size_t>(n), 0.0);
  std::copy(a.begin(), a.end(), pa.begin());
  std::copy(b.begin(), b.end(), pb.begin());
  auto fa = rfft(pa);
  const auto fb = rfft(pb);
  for (size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  auto y = irfft(fa, n);
  y.resize(static_cast<size_t>(out_len));
  return y;
}

std::vector<double> correlate(std::span<const double> x, std::span<const double> y,
                              int max_lag) {
  if (max_lag < 0) throw Error("correlate: negative lag");
  const int lx = static_cast<int>(x.size()), ly = static_cast<int>(y.size());
  std::vector<double> c(static_cast<size_t>(max_lag + 1), 0.0);
  if (lx == 0 || ly == 0) return c;
  const int n = good_size(lx + ly);
  std::vector<double> px(static_cast<size_t>(n), 0.0), py(static_cast<size_t>(n), 0.0);
  std::copy(x.begin(), x.end(), px.begin());
  std::copy(y.begin(), y.end(), py.begin());
  auto fx = rfft(px);
  const auto fy = rfft(py);
  for (size_t k = 0; k < fx.size(); ++k) fx[k] *= std::conj(fy[k]);
  const auto r = irfft(fx, n);
  for (int k = 0; k <= max_lag && k < n; ++k) c[static_cast<size_t>(k)] = k < lx ? r[k] : 0.0;
  return c;
}

}  // namespace spot::fft
