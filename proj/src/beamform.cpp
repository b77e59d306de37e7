// beamform.cpp

#include "spot/beamform.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>

#include "spot/common.hpp"
#include "spot/fft.hpp"

namespace spot {

namespace {

// RIR spectrum at the STFT bin frequencies: fold the taps modulo the window
// length, then a length-N DFT gives the DTFT at k * fs / N exactly.
std::vector<std::complex<double>> rir_bins(const Rir& rir, int n) {
  std::vector<double> folded(static_cast<size_t>(n), 0.0);
  for (size_t t = 0; t < rir.taps.size(); ++t) folded[t % static_cast<size_t>(n)] += rir.taps[t];
  return fft::rfft(folded);
}

}  // namespace

Eigen::VectorXcd transfer_vector(const RirSet& rirs, int source, int array, int bin,
                                 const StftConfig& cfg) {
  const int M = rirs.num_mics(array);
  Eigen::VectorXcd g(M);
  for (int m = 0; m < M; ++m)
    g(m) = rir_bins(rirs.at(source, array, m), cfg.window_length()).at(static_cast<size_t>(bin));
  return g;
}

OracleQuantities oracle_quantities(const RirSet& rirs, const Scene& scene, const StftConfig& cfg,
                                   double loading) {
  cfg.validate();
  if (rirs.num_sources() != scene.num_sources() || rirs.num_arrays() != scene.num_arrays())
    throw Error("oracle quantities: RIR set does not match the scene");
  if (rirs.sample_rate() != cfg.sample_rate)
    throw Error("oracle quantities: RIR sample rate does not match the STFT config");
  const int A = scene.num_arrays(), I = cfg.num_bins(), N = cfg.window_length();
  const int target = scene.target_index();

  OracleQuantities q;
  q.steering.d.resize(static_cast<size_t>(A));
  q.noise.R.resize(static_cast<size_t>(A));
  for (int a = 0; a < A; ++a) {
    const int M = rirs.num_mics(a);
    // spectra[s][m][i]
    std::vector<std::vector<std::vector<std::complex<double>>>> spectra(static_cast<size_t>(scene.num_sources()));
    for (int s = 0; s < scene.num_sources(); ++s)
      for (int m = 0; m < M; ++m) spectra[static_cast<size_t>(s)].push_back(rir_bins(rirs.at(s, a, m), N));

    auto& d = q.steering.d[static_cast<size_t>(a)];
    auto& R = q.noise.R[static_cast<size_t>(a)];
    d.resize(static_cast<size_t>(I));
    R.resize(static_cast<size_t>(I));
    for (int i = 0; i < I; ++i) {
      Eigen::VectorXcd h(M);
      for (int m = 0; m < M; ++m) h(m) = spectra[static_cast<size_t>(target)][static_cast<size_t>(m)][static_cast<size_t>(i)];
      // Relative transfer function; fall back to unit norm if the reference
      // mic has a spectral null at this bin.
      const std::complex<double> ref = h(0);
      d[static_cast<size_t>(i)] = std::abs(ref) > 1e-12 * h.norm() && std::abs(ref) > 0.0
                                      ? Eigen::VectorXcd(h / ref)
                                      : Eigen::VectorXcd(h.normalized());

      Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(M, M);
      for (int s = 0; s < scene.num_sources(); ++s) {
        if (s == target) continue;
        Eigen::VectorXcd g(M);
        for (int m = 0; m < M; ++m) g(m) = spectra[static_cast<size_t>(s)][static_cast<size_t>(m)][static_cast<size_t>(i)];
        r.noalias() += g * g.adjoint();
      }
      const double tr = r.trace().real();
      const double diag = tr > 0.0 ? loading * tr / M : loading;
      r.diagonal().array() += diag;
      R[static_cast<size_t>(i)] = r;
    }
  }
  return q;
}

Eigen::VectorXcd mvdr_weights(const Eigen::VectorXcd& d, const Eigen::MatrixXcd& R) {
  if (R.rows() != d.size() || R.cols() != d.size()) throw Error("mvdr: dimension mismatch");
  Eigen::LLT<Eigen::MatrixXcd> llt(R);
  if (llt.info() != Eigen::Success) throw Error("ill-conditioned covariance");
  const Eigen::VectorXcd rd = llt.solve(d);
  const std::complex<double> denom = d.dot(rd);  // d^H R^-1 d
  if (!std::isfinite(denom.real()) || !(denom.real() > 0.0) || !rd.allFinite())
    throw Error("ill-conditioned covariance");
  return rd / denom;
}

BeamWeights mvdr_weights(const SteeringSet& d, const NoiseCovarianceSet& R) {
  if (d.d.size() != R.R.size()) throw Error("mvdr: steering and covariance array counts differ");
  BeamWeights w(d.d.size());
  for (size_t a = 0; a < d.d.size(); ++a) {
    if (d.d[a].size() != R.R[a].size()) throw Error("mvdr: steering and covariance bin counts differ");
    w[a].reserve(d.d[a].size());
    for (size_t i = 0; i < d.d[a].size(); ++i) w[a].push_back(mvdr_weights(d.d[a][i], R.R[a][i]));
  }
  return w;
}

BfOutputTensor apply_weights(const ObservationTensor& X, const BeamWeights& w) {
  if (static_cast<int>(w.size()) != X.num_arrays()) throw Error("mvdr: array count mismatch");
  BfOutputTensor out;
  for (int a = 0; a < X.num_arrays(); ++a) {
    const auto& xa = X.X[static_cast<size_t>(a)];
    const auto& wa = w[static_cast<size_t>(a)];
    const int M = X.num_mics(a), I = xa.front().bins(), J = xa.front().frames();
    if (static_cast<int>(wa.size()) != I) throw Error("mvdr: bin count mismatch");
    for (const auto& s : xa)
      if (s.bins() != I || s.frames() != J) throw Error("mvdr: inconsistent observation dims");
    ComplexSpectrogram y;
    y.config = xa.front().config;
    y.values = ComplexMatrix::Zero(I, J);
    for (int i = 0; i < I; ++i) {
      const auto& wi = wa[static_cast<size_t>(i)];
      if (wi.size() != M) throw Error("mvdr: mic count mismatch");
      for (int m = 0; m < M; ++m) {
        const std::complex<double> wc = std::conj(wi(m));
        y.values.row(i) += wc * xa[static_cast<size_t>(m)].values.row(i);
      }
    }
    out.Y.push_back(std::move(y));
  }
  return out;
}

BfOutputTensor mvdr(const ObservationTensor& X, const SteeringSet& d, const NoiseCovarianceSet& R) {
  return apply_weights(X, mvdr_weights(d, R));
}

void write_weights(const std::filesystem::path& path, const BeamWeights& w) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write " + path.string());
  for (const auto& wa : w)
    for (const auto& wi : wa)
      for (Eigen::Index m = 0; m < wi.size(); ++m) {
        const double re = wi(m).real(), im = wi(m).imag();
        os.write(reinterpret_cast<const char*>(&re), sizeof re);
        os.write(reinterpret_cast<const char*>(&im), sizeof im);
      }
}

int delay_and_sum_max_lag(const Scene& scene) {
  double dmax = 0.0;
  for (const auto& a : scene.arrays)
    for (const auto& b : scene.arrays) dmax = std::max(dmax, distance(a.center, b.center));
  return static_cast<int>(std::ceil(dmax / scene.sound_speed * scene.sample_rate)) + 32;
}

int best_lag(const std::vector<double>& ref, const std::vector<double>& x, int max_lag) {
  // pos[l] = sum_n x[n + l] ref[n], neg[l] = sum_n ref[n + l] x[n]
  const auto pos = fft::correlate(x, ref, max_lag);
  const auto neg = fft::correlate(ref, x, max_lag);
  int lag = 0;
  double best = pos[0];
  for (int l = 1; l <= max_lag; ++l) {
    if (pos[static_cast<size_t>(l)] > best) best = pos[static_cast<size_t>(l)], lag = l;
    if (neg[static_cast<size_t>(l)] > best) best = neg[static_cast<size_t>(l)], lag = -l;
  }
  return lag;
}

Waveform delay_and_sum(const std::vector<Waveform>& estimates, int max_lag) {
  if (estimates.empty()) throw Error("delay and sum: no estimates");
  const auto& first = estimates.front();
  for (const auto& e : estimates)
    if (e.sample_rate != first.sample_rate) throw Error("delay and sum: sample rates differ");
  if (estimates.size() == 1) return first;

  const size_t L = first.size();
  Waveform out{std::vector<double>(L, 0.0), first.sample_rate};
  const bool ref_silent = energy(first.samples) == 0.0;
  for (size_t a = 0; a < estimates.size(); ++a) {
    const auto& x = estimates[a].samples;
    if (energy(x) == 0.0) {
      spdlog::warn("delay and sum: estimate {} is all zero", a);
      continue;
    }
    const int lag = (a == 0 || ref_silent) ? 0 : best_lag(first.samples, x, max_lag);
    for (size_t n = 0; n < L; ++n) {
      const long src = static_cast<long>(n) + lag;
      if (src >= 0 && src < static_cast<long>(x.size())) out.samples[n] += x[static_cast<size_t>(src)];
    }
  }
  const double scale = 1.0 / static_cast<double>(estimates.size());
  for (auto& v : out.samples) v *= scale;
  return out;
}

}  // namespace spot
