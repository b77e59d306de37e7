// nmf.cpp

#include "spot/nmf.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "spot/common.hpp"
#include "spot/gkl.hpp"
#include "spot/matrix_io.hpp"
#include "spot/random.hpp"

namespace spot {

Eigen::MatrixXd build_concat(const BfOutputTensor& Y) {
  const int A = Y.num_arrays(), I = Y.bins(), J = Y.frames();
  Eigen::MatrixXd C(I, A * J);
  for (int a = 0; a < A; ++a) C.middleCols(a * J, J) = Y.Y[static_cast<size_t>(a)].values.cwiseAbs();
  return C;
}

NmfModel init_nmf(int rows, int cols, int K, uint64_t seed) {
  if (K < 1) throw Error("nmf: K must be >= 1");
  OpenUniform rng(seed);
  NmfModel m;
  m.T.resize(rows, K);
  m.V.resize(cols, K);
  for (Eigen::Index k = 0; k < m.T.cols(); ++k)
    for (Eigen::Index i = 0; i < m.T.rows(); ++i) m.T(i, k) = rng();
  for (Eigen::Index k = 0; k < m.V.cols(); ++k)
    for (Eigen::Index n = 0; n < m.V.rows(); ++n) m.V(n, k) = rng();
  m.T.array().rowwise() /= m.T.colwise().sum().array();
  return m;
}

double nmf_cost(const NmfModel& model, const Eigen::MatrixXd& C) {
  const Eigen::MatrixXd X = (model.T * model.V.transpose()).cwiseMax(kModelFloor);
  double cost = 0.0;
  for (Eigen::Index n = 0; n < C.cols(); ++n)
    for (Eigen::Index i = 0; i < C.rows(); ++i) cost += gkl(C(i, n), X(i, n));
  return cost;
}

NmfModel nmf_update_step(const NmfModel& model, const Eigen::MatrixXd& C) {
  NmfModel m = model;
  // T update
  Eigen::MatrixXd X = (m.T * m.V.transpose()).cwiseMax(kModelFloor);
  Eigen::MatrixXd R = C.cwiseQuotient(X);
  Eigen::RowVectorXd vsum = m.V.colwise().sum();
  m.T = m.T.cwiseProduct(R * m.V).array().rowwise() / vsum.array().max(kModelFloor);
  m.T = m.T.cwiseMax(kModelFloor);

  const Eigen::RowVectorXd tsum = m.T.colwise().sum();
  m.T.array().rowwise() /= tsum.array();
  m.V.array().rowwise() *= tsum.array();

  // V update
  X = (m.T * m.V.transpose()).cwiseMax(kModelFloor);
  R = C.cwiseQuotient(X);
  const Eigen::RowVectorXd tsum2 = m.T.colwise().sum();
  m.V = m.V.cwiseProduct(R.transpose() * m.T).array().rowwise() / tsum2.array().max(kModelFloor);
  m.V = m.V.cwiseMax(kModelFloor);
  if (!m.T.allFinite() || !m.V.allFinite()) throw Error("numerical divergence");
  return m;
}

NmfFit fit_nmf(const Eigen::MatrixXd& C, int K, int iterations, uint64_t seed,
               const IterationHook& hook) {
  if (K < 1) throw Error("nmf: K must be >= 1");
  if (iterations < 1) throw Error("nmf: iterations must be >= 1");
  if ((C.array() < 0.0).any() || !C.allFinite()) throw Error("nmf: input must be finite and nonnegative");
  if (K > std::min(C.rows(), C.cols()))
    spdlog::warn("nmf: K = {} exceeds min(I, N) = {}", K, std::min(C.rows(), C.cols()));

  NmfFit fit;
  fit.model = init_nmf(static_cast<int>(C.rows()), static_cast<int>(C.cols()), K, seed);
  fit.initial_cost = nmf_cost(fit.model, C);
  fit.cost_trace.reserve(static_cast<size_t>(iterations));
  for (int it = 1; it <= iterations; ++it) {
    try {
      fit.model = nmf_update_step(fit.model, C);
    } catch (const Error&) {
      throw Error("numerical divergence at iteration " + std::to_string(it));
    }
    fit.cost_trace.push_back(nmf_cost(fit.model, C));
    if (hook) hook(it);
  }
  return fit;
}

Eigen::MatrixXd threshold_mask(const NmfModel& model, int num_arrays, int num_frames, double tau) {
  if (tau < 0.0) throw Error("threshold mask: tau must be >= 0");
  if (model.V.rows() != static_cast<Eigen::Index>(num_arrays) * num_frames)
    throw Error("threshold mask: activation rows do not equal A * J");
  const int K = model.K();
  Eigen::MatrixXd H = Eigen::MatrixXd::Ones(num_frames, K);
  for (int a = 0; a < num_arrays; ++a)
    for (int k = 0; k < K; ++k)
      for (int j = 0; j < num_frames; ++j)
        if (!(model.V(a * num_frames + j, k) > tau)) H(j, k) = 0.0;
  return H;
}

std::vector<ComplexSpectrogram> nmf_wiener(const NmfModel& model, const Eigen::MatrixXd& mask,
                                           const BfOutputTensor& Y) {
  const int A = Y.num_arrays(), I = Y.bins(), J = Y.frames(), K = model.K();
  if (model.T.rows() != I || model.V.rows() != static_cast<Eigen::Index>(A) * J || mask.rows() != J ||
      mask.cols() != K)
    throw Error("nmf wiener: dimension mismatch");
  const Eigen::MatrixXd T2 = model.T.cwiseAbs2();
  std::vector<ComplexSpectrogram> out;
  for (int a = 0; a < A; ++a) {
    const Eigen::MatrixXd Va = model.V.middleRows(a * J, J);
    const Eigen::MatrixXd num = T2 * mask.cwiseProduct(Va).cwiseAbs2().transpose();
    const Eigen::MatrixXd den = T2 * Va.cwiseAbs2().transpose();
    ComplexSpectrogram s = Y.Y[static_cast<size_t>(a)];
    for (int j = 0; j < J; ++j)
      for (int i = 0; i < I; ++i) {
        const double d = den(i, j);
        const double g = d > 0.0 ? std::clamp(num(i, j) / std::max(d, kGainFloor), 0.0, 1.0) : 0.0;
        s.values(i, j) *= g;
      }
    out.push_back(std::move(s));
  }
  return out;
}

void save_nmf_model(const std::filesystem::path& dir, const NmfModel& model, uint64_t seed) {
  std::filesystem::create_directories(dir);
  const std::string header = "K=" + std::to_string(model.K()) + " seed=" + std::to_string(seed);
  write_text_matrix(dir / "T.txt", "T " + header, model.T);
  write_text_matrix(dir / "V_tilde.txt", "V_tilde " + header, model.V);
}

}  // namespace spot
