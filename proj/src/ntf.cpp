// ntf.cpp

#include "spot/ntf.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "spot/common.hpp"
#include "spot/gkl.hpp"
#include "spot/matrix_io.hpp"
#include "spot/random.hpp"

namespace spot {

double PropTensor::sum() const {
  double s = 0.0;
  for (const auto& m : slices) s += m.sum();
  return s;
}

PropTensor build_prop_tensor(const BfOutputTensor& Y) {
  PropTensor C;
  for (const auto& y : Y.Y) C.slices.push_back(y.values.cwiseAbs());
  return C;
}

AttractorSet make_attractors(int num_arrays) {
  if (num_arrays < 1) throw Error("attractors: need at least one array");
  AttractorSet set;
  set.P = Eigen::MatrixXd::Zero(num_arrays, num_arrays + 1);
  set.P.col(0).setConstant(1.0 / num_arrays);
  for (int a = 0; a < num_arrays; ++a) set.P(a, a + 1) = 1.0;
  return set;
}

int Assignment::num_target() const { return static_cast<int>(std::count(h.begin(), h.end(), 1)); }

double attractor_divergence(const Eigen::Ref<const Eigen::VectorXd>& p,
                            const Eigen::Ref<const Eigen::VectorXd>& z) {
  double d = 0.0;
  for (Eigen::Index a = 0; a < p.size(); ++a) d += gkl(p(a), z(a));
  return d;
}

Assignment assign_attractors(const Eigen::MatrixXd& Z, const AttractorSet& P) {
  if (Z.rows() != P.P.rows()) throw Error("assign attractors: array count mismatch");
  Assignment out;
  out.b.resize(static_cast<size_t>(Z.cols()));
  out.h.resize(static_cast<size_t>(Z.cols()));
  for (Eigen::Index k = 0; k < Z.cols(); ++k) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int b = 0; b < P.num_classes(); ++b) {
      const double d = attractor_divergence(P.P.col(b), Z.col(k));
      if (d < best_d) best_d = d, best = b;
    }
    out.b[static_cast<size_t>(k)] = best;
    out.h[static_cast<size_t>(k)] = best == 0 ? 1 : 0;
  }
  return out;
}

void RegularizationSchedule::validate() const {
  if (mu < 0.0) throw Error("schedule: mu must be >= 0");
  if (total_iterations < 1) throw Error("schedule: total iterations must be >= 1");
  if (warmup_iterations < 0 || warmup_iterations > total_iterations)
    throw Error("schedule: warmup must lie in [0, total]");
}

NtfModel init_ntf(int num_arrays, int bins, int frames, int K, uint64_t seed) {
  if (K < 1) throw Error("ntf: K must be >= 1");
  const NmfModel base = init_nmf(bins, frames, K, seed);
  NtfModel m;
  m.Z = Eigen::MatrixXd::Constant(num_arrays, K, 1.0 / num_arrays);
  m.T = base.T;
  m.V = base.V;
  return m;
}

namespace {

void check_dims(const NtfModel& m, const PropTensor& C) {
  if (C.slices.empty()) throw Error("ntf: empty tensor");
  if (m.Z.rows() != C.num_arrays() || m.T.rows() != C.bins() || m.V.rows() != C.frames() ||
      m.Z.cols() != m.T.cols() || m.V.cols() != m.T.cols())
    throw Error("ntf: model and tensor dimensions disagree");
}

Eigen::MatrixXd reconstruct(const NtfModel& m, int a) {
  return ((m.T * m.Z.row(a).asDiagonal()) * m.V.transpose()).cwiseMax(kModelFloor);
}

}  // namespace

double data_divergence(const NtfModel& model, const PropTensor& C) {
  check_dims(model, C);
  double cost = 0.0;
  for (int a = 0; a < C.num_arrays(); ++a) {
    const Eigen::MatrixXd X = reconstruct(model, a);
    const auto& c = C.slices[static_cast<size_t>(a)];
    for (Eigen::Index j = 0; j < c.cols(); ++j)
      for (Eigen::Index i = 0; i < c.rows(); ++i) cost += gkl(c(i, j), X(i, j));
  }
  return cost;
}

double evaluate_cost(const NtfModel& model, const PropTensor& C, const AttractorSet& P, double mu) {
  double cost = data_divergence(model, C);
  if (mu > 0.0) {
    const Assignment asg = assign_attractors(model.Z, P);
    double reg = 0.0;
    for (int k = 0; k < model.K(); ++k)
      reg += attractor_divergence(P.P.col(asg.b[static_cast<size_t>(k)]), model.Z.col(k));
    cost += mu * reg;
  }
  return cost;
}

NtfModel update_step(const NtfModel& model, const PropTensor& C, const AttractorSet& P, double mu) {
  check_dims(model, C);
  if (mu < 0.0) throw Error("ntf: mu must be >= 0");
  const int A = C.num_arrays(), K = model.K();
  NtfModel m = model;

  if (A > 1) {
    // b must be refreshed before every Z update.
    const Assignment asg = assign_attractors(m.Z, P);
    const Eigen::RowVectorXd tsum = m.T.colwise().sum();
    const Eigen::RowVectorXd vsum = m.V.colwise().sum();
    Eigen::MatrixXd Znew(A, K);
    for (int a = 0; a < A; ++a) {
      const Eigen::MatrixXd R = C.slices[static_cast<size_t>(a)].cwiseQuotient(reconstruct(m, a));
      // sum_ij R_ij t_ik v_jk = diag(T^T R V)_k
      const Eigen::RowVectorXd num = m.T.cwiseProduct(R * m.V).colwise().sum();
      for (int k = 0; k < K; ++k) {
        const double p = P.P(a, asg.b[static_cast<size_t>(k)]);
        Znew(a, k) = (m.Z(a, k) * num(k) + mu * p) / (tsum(k) * vsum(k) + mu);
      }
    }
    m.Z = Znew.cwiseMax(kModelFloor);
    const Eigen::RowVectorXd zsum = m.Z.colwise().sum();
    m.Z.array().rowwise() /= zsum.array();
    m.V.array().rowwise() *= zsum.array();
  }

  // T update
  {
    const Eigen::RowVectorXd zsum = m.Z.colwise().sum();
    const Eigen::RowVectorXd vsum = m.V.colwise().sum();
    Eigen::MatrixXd num = Eigen::MatrixXd::Zero(m.T.rows(), K);
    for (int a = 0; a < A; ++a) {
      const Eigen::MatrixXd R = C.slices[static_cast<size_t>(a)].cwiseQuotient(reconstruct(m, a));
      num.noalias() += (R * m.V) * m.Z.row(a).asDiagonal();
    }
    const Eigen::RowVectorXd den = zsum.cwiseProduct(vsum).cwiseMax(kModelFloor);
    m.T = m.T.cwiseProduct(num).array().rowwise() / den.array();
    m.T = m.T.cwiseMax(kModelFloor);
    const Eigen::RowVectorXd tsum = m.T.colwise().sum();
    m.T.array().rowwise() /= tsum.array();
    m.V.array().rowwise() *= tsum.array();
  }

  // V update
  {
    const Eigen::RowVectorXd zsum = m.Z.colwise().sum();
    const Eigen::RowVectorXd tsum = m.T.colwise().sum();
    Eigen::MatrixXd num = Eigen::MatrixXd::Zero(m.V.rows(), K);
    for (int a = 0; a < A; ++a) {
      const Eigen::MatrixXd R = C.slices[static_cast<size_t>(a)].cwiseQuotient(reconstruct(m, a));
      num.noalias() += (R.transpose() * m.T) * m.Z.row(a).asDiagonal();
    }
    const Eigen::RowVectorXd den = zsum.cwiseProduct(tsum).cwiseMax(kModelFloor);
    m.V = m.V.cwiseProduct(num).array().rowwise() / den.array();
    m.V = m.V.cwiseMax(kModelFloor);
  }

  if (!m.Z.allFinite() || !m.T.allFinite() || !m.V.allFinite()) throw Error("numerical divergence");
  return m;
}

NtfFit fit_ntf(const PropTensor& C, int K, const RegularizationSchedule& schedule, uint64_t seed,
               const IterationHook& hook) {
  if (K < 1) throw Error("ntf: K must be >= 1");
  schedule.validate();
  if (C.slices.empty()) throw Error("ntf: empty tensor");
  for (const auto& s : C.slices)
    if ((s.array() < 0.0).any() || !s.allFinite()) throw Error("ntf: input must be finite and nonnegative");

  const AttractorSet P = make_attractors(C.num_arrays());
  NtfFit fit;
  fit.model = init_ntf(C.num_arrays(), C.bins(), C.frames(), K, seed);
  fit.initial_cost = evaluate_cost(fit.model, C, P, schedule.mu_at(1));
  fit.cost_trace.reserve(static_cast<size_t>(schedule.total_iterations));
  for (int it = 1; it <= schedule.total_iterations; ++it) {
    const double mu = schedule.mu_at(it);
    try {
      fit.model = update_step(fit.model, C, P, mu);
    } catch (const Error&) {
      throw Error("numerical divergence at iteration " + std::to_string(it));
    }
    fit.cost_trace.push_back(evaluate_cost(fit.model, C, P, mu));
    if (hook) hook(it);
  }
  fit.assignment = assign_attractors(fit.model.Z, P);
  return fit;
}

std::vector<ComplexSpectrogram> ntf_wiener(const NtfModel& model, const Assignment& assignment,
                                           const BfOutputTensor& Y) {
  const int A = Y.num_arrays(), K = model.K();
  if (model.Z.rows() != A || model.T.rows() != Y.bins() || model.V.rows() != Y.frames() ||
      static_cast<int>(assignment.h.size()) != K)
    throw Error("ntf wiener: dimension mismatch");

  const int targets = assignment.num_target();
  if (targets == K) return Y.Y;
  std::vector<ComplexSpectrogram> out;
  if (targets == 0) {
    spdlog::warn("ntf wiener: no basis assigned to the target class, output is silent");
    for (const auto& y : Y.Y) {
      ComplexSpectrogram s = y;
      s.values.setZero();
      out.push_back(std::move(s));
    }
    return out;
  }

  Eigen::VectorXd h(K);
  for (int k = 0; k < K; ++k) h(k) = assignment.h[static_cast<size_t>(k)];
  const Eigen::MatrixXd T2 = model.T.cwiseAbs2();
  const Eigen::MatrixXd V2t = model.V.cwiseAbs2().transpose();
  for (int a = 0; a < A; ++a) {
    const Eigen::VectorXd z2 = model.Z.row(a).transpose().cwiseAbs2();
    const Eigen::MatrixXd den = T2 * z2.asDiagonal() * V2t;
    const Eigen::MatrixXd num = T2 * z2.cwiseProduct(h).asDiagonal() * V2t;
    ComplexSpectrogram s = Y.Y[static_cast<size_t>(a)];
    for (Eigen::Index j = 0; j < s.values.cols(); ++j)
      for (Eigen::Index i = 0; i < s.values.rows(); ++i) {
        const double d = den(i, j);
        const double g = d > 0.0 ? std::clamp(num(i, j) / std::max(d, kGainFloor), 0.0, 1.0) : 0.0;
        s.values(i, j) *= g;
      }
    out.push_back(std::move(s));
  }
  return out;
}

void save_ntf_fit(const std::filesystem::path& dir, const NtfFit& fit,
                  const RegularizationSchedule& schedule, uint64_t seed) {
  std::filesystem::create_directories(dir);
  const std::string tag = "K=" + std::to_string(fit.model.K()) + " seed=" + std::to_string(seed);
  write_text_matrix(dir / "Z.txt", "Z " + tag, fit.model.Z);
  write_text_matrix(dir / "T.txt", "T " + tag, fit.model.T);
  write_text_matrix(dir / "V.txt", "V " + tag, fit.model.V);
  const int K = fit.model.K();
  Eigen::MatrixXd bh(K, 2);
  for (int k = 0; k < K; ++k) {
    bh(k, 0) = fit.assignment.b[static_cast<size_t>(k)];
    bh(k, 1) = fit.assignment.h[static_cast<size_t>(k)];
  }
  write_text_matrix(dir / "assignment.txt", "columns: b h " + tag, bh);
  Eigen::MatrixXd trace(static_cast<Eigen::Index>(fit.cost_trace.size()), 2);
  for (Eigen::Index t = 0; t < trace.rows(); ++t) {
    trace(t, 0) = schedule.mu_at(static_cast<int>(t) + 1);
    trace(t, 1) = fit.cost_trace[static_cast<size_t>(t)];
  }
  write_text_matrix(dir / "cost_trace.txt", "columns: mu cost (row t = iteration t+1) " + tag, trace);

  nlohmann::json run;
  run["K"] = K;
  run["mu"] = schedule.mu;
  run["warmup_iterations"] = schedule.warmup_iterations;
  run["total_iterations"] = schedule.total_iterations;
  run["seed"] = seed;
  run["initial_cost"] = fit.initial_cost;
  std::ofstream os(dir / "run.json");
  os << run.dump(2) << '\n';
}

}  // namespace spot
