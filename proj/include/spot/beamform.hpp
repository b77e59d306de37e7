// beamform.hpp
// Oracle MVDR beamforming per array and delay-and-sum fusion.

#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "spot/roomsim.hpp"
#include "spot/signal.hpp"

namespace spot {

inline constexpr double kDefaultLoading = 1e-3;

// d[a][i]: relative transfer function of the target to array a at bin i,
// scaled so the reference-mic (mic 0) entry equals 1.
struct SteeringSet {
  std::vector<std::vector<Eigen::VectorXcd>> d;
};

// R[a][i]: Hermitian M x M noise covariance.
struct NoiseCovarianceSet {
  std::vector<std::vector<Eigen::MatrixXcd>> R;
};

// Beamformer outputs, one spectrogram per array: y(i, j, a) = Y[a].values(i, j).
struct BfOutputTensor {
  std::vector<ComplexSpectrogram> Y;

  int num_arrays() const { return static_cast<int>(Y.size()); }
  int bins() const { return Y.front().bins(); }
  int frames() const { return Y.front().frames(); }
  const std::complex<double>& operator()(int i, int j, int a) const {
    return Y[static_cast<size_t>(a)].values(i, j);
  }
};

using BeamWeights = std::vector<std::vector<Eigen::VectorXcd>>;  // [a][i]

// Transfer vector of `source` to the mics of `array` at STFT bin `bin`,
// i.e. the RIR DTFT sampled at bin * fs / window_length.
Eigen::VectorXcd transfer_vector(const RirSet& rirs, int source, int array, int bin,
                                 const StftConfig& cfg);

struct OracleQuantities {
  SteeringSet steering;
  NoiseCovarianceSet noise;
};

// Steering from the target RIRs; covariance = sum over interferers of g g^H
// plus loading * tr(R) / M * I (loading * I when there are no interferers).
OracleQuantities oracle_quantities(const RirSet& rirs, const Scene& scene, const StftConfig& cfg,
                                   double loading = kDefaultLoading);

// w = R^-1 d / (d^H R^-1 d). Throws "ill-conditioned covariance" when R is
// not numerically positive definite.
Eigen::VectorXcd mvdr_weights(const Eigen::VectorXcd& d, const Eigen::MatrixXcd& R);
BeamWeights mvdr_weights(const SteeringSet& d, const NoiseCovarianceSet& R);

// y(i, j, a) = w(a, i)^H x(a, :, i, j).
BfOutputTensor apply_weights(const ObservationTensor& X, const BeamWeights& w);
BfOutputTensor mvdr(const ObservationTensor& X, const SteeringSet& d, const NoiseCovarianceSet& R);

// Debug dump: for a, i, m in row-major order, real then imaginary part as
// little-endian float64. No header.
void write_weights(const std::filesystem::path& path, const BeamWeights& w);

// ceil(max inter-array distance / c * fs) + 32.
int delay_and_sum_max_lag(const Scene& scene);

// Integer lag l in [-max_lag, max_lag] maximizing sum_n ref[n] x[n + l].
int best_lag(const std::vector<double>& ref, const std::vector<double>& x, int max_lag);

// Aligns every estimate to estimate 0 and averages. All-zero estimates
// contribute nothing (with a warning).
Waveform delay_and_sum(const std::vector<Waveform>& estimates, int max_lag);

}  // namespace spot
