// ntf.hpp
// Attractor-regularized nonnegative tensor factorization of the beamformer
// amplitude tensor C(a, i, j) ~= sum_k z(a, k) t(i, k) v(j, k).
//
// Allocation vectors z_k (columns of Z) are pulled toward the nearest of
// B = A + 1 attractors: the uniform vector (basis shared by every array,
// i.e. the target) or one one-hot vector per array (basis private to that
// array's beamformer output, i.e. residual interference). Bases whose
// nearest attractor is the uniform one are used to rebuild the target.

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "spot/beamform.hpp"
#include "spot/nmf.hpp"

namespace spot {

// Nonnegative A x I x J tensor stored as A slices of I x J.
struct PropTensor {
  std::vector<Eigen::MatrixXd> slices;

  int num_arrays() const { return static_cast<int>(slices.size()); }
  int bins() const { return static_cast<int>(slices.front().rows()); }
  int frames() const { return static_cast<int>(slices.front().cols()); }
  double sum() const;
};

// c(a, i, j) = |y(i, j, a)|.
PropTensor build_prop_tensor(const BfOutputTensor& Y);

// Z: A x K, T: I x K (both column-stochastic), V: J x K.
struct NtfModel {
  Eigen::MatrixXd Z;
  Eigen::MatrixXd T;
  Eigen::MatrixXd V;

  int K() const { return static_cast<int>(T.cols()); }
  int num_arrays() const { return static_cast<int>(Z.rows()); }
};

// A x (A + 1) matrix whose column b is attractor p_b: column 0 uniform 1/A,
// column b >= 1 one-hot at array b - 1.
struct AttractorSet {
  Eigen::MatrixXd P;

  int num_classes() const { return static_cast<int>(P.cols()); }
};

AttractorSet make_attractors(int num_arrays);

// b[k]: index of the nearest attractor; h[k] = 1 iff b[k] == 0.
struct Assignment {
  std::vector<int> b;
  std::vector<int> h;

  int num_target() const;
};

// sum_a D(p_a | z_a) under the GKL zero conventions.
double attractor_divergence(const Eigen::Ref<const Eigen::VectorXd>& p,
                            const Eigen::Ref<const Eigen::VectorXd>& z);

// argmin_b sum_a D(p_ab | z_ak), ties to the smallest b. If every class is
// at infinite divergence the basis is assigned to class 0.
Assignment assign_attractors(const Eigen::MatrixXd& Z, const AttractorSet& P);

struct RegularizationSchedule {
  double mu = 100.0;
  int warmup_iterations = 50;  // iterations run with mu = 0
  int total_iterations = 100;

  void validate() const;
  double mu_at(int iteration) const { return iteration <= warmup_iterations ? 0.0 : mu; }
};

// Z = 1/A, T and V uniform on (0, 1) (T first, then V, column-major), T
// columns normalized. The draw order matches init_nmf so that A = 1 runs
// start from the same point as the matrix baseline.
NtfModel init_ntf(int num_arrays, int bins, int frames, int K, uint64_t seed);

// sum_{a,i,j} D(c | model) with the reconstruction floored.
double data_divergence(const NtfModel& model, const PropTensor& C);

// Data term plus mu * sum_k min_b R(p_b | z_k).
double evaluate_cost(const NtfModel& model, const PropTensor& C, const AttractorSet& P, double mu);

// One full iteration: assign attractors, update Z and renormalize it, update
// T and renormalize it, update V. Normalization scales are folded into V.
// With a single array Z is pinned to 1 and its update is skipped.
NtfModel update_step(const NtfModel& model, const PropTensor& C, const AttractorSet& P, double mu);

struct NtfFit {
  NtfModel model;
  Assignment assignment;
  double initial_cost = 0.0;
  // Cost after each iteration, evaluated with that iteration's mu. Only
  // comparable within a constant-mu segment.
  std::vector<double> cost_trace;
};

NtfFit fit_ntf(const PropTensor& C, int K, const RegularizationSchedule& schedule, uint64_t seed,
               const IterationHook& hook = {});

// s(i, j, a) = [sum_k (h z t v)^2 / sum_k (z t v)^2] y(i, j, a).
std::vector<ComplexSpectrogram> ntf_wiener(const NtfModel& model, const Assignment& assignment,
                                           const BfOutputTensor& Y);

// Z, T, V, b, h and the cost trace as text matrices plus run.json.
void save_ntf_fit(const std::filesystem::path& dir, const NtfFit& fit,
                  const RegularizationSchedule& schedule, uint64_t seed);

}  // namespace spot
