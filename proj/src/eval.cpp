// eval.cpp

#include "spot/eval.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "spot/common.hpp"
#include "spot/fft.hpp"

namespace spot {

namespace {

// residual/signal below this is rounding noise of an exact match
constexpr double kExactMatchRatio = 1e-27;

double ratio_db(double signal, double residual) {
  if (!(signal > 0.0)) return -kSdrCapDb;
  if (!(residual > kExactMatchRatio * signal)) return kSdrCapDb;
  return std::clamp(10.0 * std::log10(signal / residual), -kSdrCapDb, kSdrCapDb);
}

size_t common_length(const Waveform& e, const Waveform& s) {
  if (e.sample_rate != s.sample_rate) throw Error("sdr: sample rates differ");
  const size_t n = std::min(e.size(), s.size());
  if (n == 0) throw Error("sdr: empty signal");
  double es = 0.0;
  for (size_t t = 0; t < n; ++t) es += s.samples[t] * s.samples[t];
  if (!(es > 0.0)) throw Error("sdr: silent reference");
  return n;
}

}  // namespace

double si_sdr(const Waveform& estimate, const Waveform& reference) {
  const size_t n = common_length(estimate, reference);
  const auto& e = estimate.samples;
  const auto& s = reference.samples;
  double es = 0.0, ss = 0.0;
  for (size_t t = 0; t < n; ++t) es += e[t] * s[t], ss += s[t] * s[t];
  const double alpha = es / ss;
  double sig = 0.0, res = 0.0;
  for (size_t t = 0; t < n; ++t) {
    const double p = alpha * s[t];
    sig += p * p;
    res += (p - e[t]) * (p - e[t]);
  }
  return ratio_db(sig, res);
}

double filtered_sdr(const Waveform& estimate, const Waveform& reference, int filter_taps) {
  if (filter_taps < 1) throw Error("filtered sdr: filter_taps must be >= 1");
  const size_t n = common_length(estimate, reference);
  const std::vector<double> e(estimate.samples.begin(), estimate.samples.begin() + static_cast<long>(n));
  const std::vector<double> s(reference.samples.begin(), reference.samples.begin() + static_cast<long>(n));
  const int taps = static_cast<int>(std::min<size_t>(static_cast<size_t>(filter_taps), n));

  // Normal equations of min_h |e - h * s|^2 over causal h, truncated to n
  // samples: G(k, l) = sum_t s[t - k] s[t - l], b(k) = sum_t e[t] s[t - k].
  const auto r = fft::correlate(s, s, taps - 1);
  const auto b = fft::correlate(e, s, taps - 1);
  // G(0, l) = r[l]; sliding both shifts by one drops the last product:
  // G(k + 1, l + 1) = G(k, l) - s[n - 1 - k] s[n - 1 - l].
  Eigen::MatrixXd G(taps, taps);
  for (int l = 0; l < taps; ++l) G(0, l) = G(l, 0) = r[static_cast<size_t>(l)];
  for (int k = 1; k < taps; ++k)
    for (int l = k; l < taps; ++l) {
      G(k, l) = G(k - 1, l - 1) - s[n - static_cast<size_t>(k)] * s[n - static_cast<size_t>(l)];
      G(l, k) = G(k, l);
    }
  Eigen::VectorXd rhs(taps);
  for (int k = 0; k < taps; ++k) rhs(k) = b[static_cast<size_t>(k)];

  Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
  Eigen::VectorXd h;
  bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
  if (ok) {
    const Eigen::VectorXd d = ldlt.vectorD();
    ok = d.minCoeff() > 1e-12 * d.maxCoeff();
  }
  if (ok) {
    h = ldlt.solve(rhs);
  } else {
    spdlog::warn("filtered sdr: ill-conditioned normal equations, adding ridge");
    const double ridge = 1e-10 * G.trace();
    G.diagonal().array() += ridge;
    h = Eigen::LDLT<Eigen::MatrixXd>(G).solve(rhs);
  }

  std::vector<double> hv(h.data(), h.data() + h.size());
  auto proj = fft::convolve(s, hv);
  proj.resize(n);
  double sig = 0.0, res = 0.0;
  for (size_t t = 0; t < n; ++t) {
    sig += proj[t] * proj[t];
    res += (e[t] - proj[t]) * (e[t] - proj[t]);
  }
  return ratio_db(sig, res);
}

AggregateStats summarize(const std::vector<double>& values) {
  if (values.empty()) throw Error("aggregate: no values");
  AggregateStats st;
  st.count = static_cast<int>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  st.mean_db = sum / st.count;
  if (st.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - st.mean_db) * (v - st.mean_db);
    st.std_db = std::sqrt(ss / (st.count - 1));
  }
  return st;
}

std::map<ReportKey, AggregateStats> aggregate(const std::vector<SdrReport>& reports) {
  if (reports.empty()) throw Error("aggregate: no reports");
  std::map<ReportKey, std::vector<double>> groups;
  for (const auto& r : reports) groups[{r.method, r.K, r.hyper, r.variant}].push_back(r.sdr_db);
  std::map<ReportKey, AggregateStats> out;
  for (const auto& [key, vals] : groups) out[key] = summarize(vals);
  return out;
}

}  // namespace spot
