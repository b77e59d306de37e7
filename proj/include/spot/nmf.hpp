// nmf.hpp
// Conventional common-component extraction: NMF of the concatenated
// beamformer amplitude spectrograms, frame-wise activation thresholding and
// Wiener reconstruction.

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "spot/beamform.hpp"

namespace spot {

// I x N with N = A * J and column n = a * J + j holding |Y[i, j, a]|.
Eigen::MatrixXd build_concat(const BfOutputTensor& Y);

// C ~= T * V^T. T is I x K with columns on the simplex, V is N x K.
struct NmfModel {
  Eigen::MatrixXd T;
  Eigen::MatrixXd V;

  int K() const { return static_cast<int>(T.cols()); }
};

// T and V i.i.d. uniform on (0, 1), drawn T first then V in column-major
// order, then T columns normalized to sum to one.
NmfModel init_nmf(int rows, int cols, int K, uint64_t seed);

// sum_{i,n} D(c_in | (T V^T)_in) with the reconstruction floored.
double nmf_cost(const NmfModel& model, const Eigen::MatrixXd& C);

// One multiplicative GKL iteration: T update, column normalization of T with
// the scale folded into V, then V update.
NmfModel nmf_update_step(const NmfModel& model, const Eigen::MatrixXd& C);

struct NmfFit {
  NmfModel model;
  double initial_cost = 0.0;
  std::vector<double> cost_trace;  // after each iteration
};

// Called after every iteration with its 1-based index; may throw to abort.
using IterationHook = std::function<void(int)>;

NmfFit fit_nmf(const Eigen::MatrixXd& C, int K, int iterations, uint64_t seed,
               const IterationHook& hook = {});

// J x K binary mask: 1 iff V(a * J + j, k) > tau for every array a.
Eigen::MatrixXd threshold_mask(const NmfModel& model, int num_arrays, int num_frames, double tau);

// s(i, j, a) = [sum_k (t h v)^2 / sum_k (t v)^2] y(i, j, a).
std::vector<ComplexSpectrogram> nmf_wiener(const NmfModel& model, const Eigen::MatrixXd& mask,
                                           const BfOutputTensor& Y);

// Writes T and V as text matrices with a one-line header.
void save_nmf_model(const std::filesystem::path& dir, const NmfModel& model, uint64_t seed);

}  // namespace spot
