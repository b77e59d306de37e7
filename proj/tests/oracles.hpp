// oracles.hpp
// Brute-force reference implementations for the tests. Written from the
// formulas with plain loops, sharing no code with the library.

#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline double gkl(double b, double a) {
  if (b == 0.0) return a;
  if (a == 0.0) return std::numeric_limits<double>::infinity();
  return b * std::log(b / a) + a - b;
}

inline std::vector<double> random_signal(size_t n, unsigned seed, double scale = 1.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

inline Eigen::MatrixXd random_positive(int rows, int cols, unsigned seed, double lo = 0.05, double hi = 1.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = u(rng);
  return m;
}

// Direct O(n^2) DFT bin k of x.
inline std::complex<double> dft_bin(const std::vector<double>& x, int k) {
  std::complex<double> s = 0.0;
  const double n = static_cast<double>(x.size());
  for (size_t t = 0; t < x.size(); ++t)
    s += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * k * static_cast<double>(t) / n);
  return s;
}

inline std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> y(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) y[i + j] += a[i] * b[j];
  return y;
}

// One multiplicative GKL iteration of C ~ T V^T with T column-normalized
// after its update (scale moved into V).
inline void nmf_step(const Eigen::MatrixXd& C, Eigen::MatrixXd& T, Eigen::MatrixXd& V) {
  const int I = static_cast<int>(C.rows()), N = static_cast<int>(C.cols()), K = static_cast<int>(T.cols());
  auto model = [&](int i, int n) {
    double x = 0.0;
    for (int k = 0; k < K; ++k) x += T(i, k) * V(n, k);
    return std::max(x, 1e-12);
  };
  Eigen::MatrixXd Tn(I, K);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < I; ++i) {
      double num = 0.0, den = 0.0;
      for (int n = 0; n < N; ++n) {
        num += C(i, n) * V(n, k) / model(i, n);
        den += V(n, k);
      }
      Tn(i, k) = std::max(T(i, k) * num / den, 1e-12);
    }
  T = Tn;
  for (int k = 0; k < K; ++k) {
    const double s = T.col(k).sum();
    T.col(k) /= s;
    V.col(k) *= s;
  }
  Eigen::MatrixXd Vn(N, K);
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n) {
      double num = 0.0, den = 0.0;
      for (int i = 0; i < I; ++i) {
        num += C(i, n) * T(i, k) / model(i, n);
        den += T(i, k);
      }
      Vn(n, k) = std::max(V(n, k) * num / den, 1e-12);
    }
  V = Vn;
}

inline double ntf_model(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& T, const Eigen::MatrixXd& V, int a, int i,
                        int j) {
  double x = 0.0;
  for (int k = 0; k < T.cols(); ++k) x += Z(a, k) * T(i, k) * V(j, k);
  return std::max(x, 1e-12);
}

// Attractor p_b for A arrays: b = 0 uniform, b >= 1 one-hot at b - 1.
inline double attractor(int A, int b, int a) {
  if (b == 0) return 1.0 / A;
  return a == b - 1 ? 1.0 : 0.0;
}

inline int nearest_attractor(const Eigen::MatrixXd& Z, int k) {
  const int A = static_cast<int>(Z.rows());
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int b = 0; b <= A; ++b) {
    double d = 0.0;
    for (int a = 0; a < A; ++a) d += gkl(attractor(A, b, a), Z(a, k));
    if (d < best_d) best_d = d, best = b;
  }
  return best;
}

inline double ntf_cost(const std::vector<Eigen::MatrixXd>& C, const Eigen::MatrixXd& Z, const Eigen::MatrixXd& T,
                       const Eigen::MatrixXd& V, double mu) {
  double cost = 0.0;
  const int A = static_cast<int>(C.size());
  for (int a = 0; a < A; ++a)
    for (int j = 0; j < C[0].cols(); ++j)
      for (int i = 0; i < C[0].rows(); ++i) cost += gkl(C[a](i, j), ntf_model(Z, T, V, a, i, j));
  if (mu > 0.0)
    for (int k = 0; k < Z.cols(); ++k) {
      const int b = nearest_attractor(Z, k);
      for (int a = 0; a < A; ++a) cost += mu * gkl(attractor(A, b, a), Z(a, k));
    }
  return cost;
}

// One composite iteration: assign, Z update + normalize, T update +
// normalize, V update. Scales fold into V.
inline void ntf_step(const std::vector<Eigen::MatrixXd>& C, Eigen::MatrixXd& Z, Eigen::MatrixXd& T,
                     Eigen::MatrixXd& V, double mu) {
  const int A = static_cast<int>(C.size()), I = static_cast<int>(T.rows()), J = static_cast<int>(V.rows()),
            K = static_cast<int>(T.cols());
  if (A > 1) {
    Eigen::MatrixXd Zn(A, K);
    for (int k = 0; k < K; ++k) {
      const int b = nearest_attractor(Z, k);
      for (int a = 0; a < A; ++a) {
        double num = 0.0, den = 0.0;
        for (int i = 0; i < I; ++i)
          for (int j = 0; j < J; ++j) {
            num += C[a](i, j) * T(i, k) * V(j, k) / ntf_model(Z, T, V, a, i, j);
            den += T(i, k) * V(j, k);
          }
        Zn(a, k) = std::max((Z(a, k) * num + mu * attractor(A, b, a)) / (den + mu), 1e-12);
      }
    }
    Z = Zn;
    for (int k = 0; k < K; ++k) {
      const double s = Z.col(k).sum();
      Z.col(k) /= s;
      V.col(k) *= s;
    }
  }
  Eigen::MatrixXd Tn(I, K);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < I; ++i) {
      double num = 0.0, den = 0.0;
      for (int a = 0; a < A; ++a)
        for (int j = 0; j < J; ++j) {
          num += C[a](i, j) * Z(a, k) * V(j, k) / ntf_model(Z, T, V, a, i, j);
          den += Z(a, k) * V(j, k);
        }
      Tn(i, k) = std::max(T(i, k) * num / den, 1e-12);
    }
  T = Tn;
  for (int k = 0; k < K; ++k) {
    const double s = T.col(k).sum();
    T.col(k) /= s;
    V.col(k) *= s;
  }
  Eigen::MatrixXd Vn(J, K);
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < J; ++j) {
      double num = 0.0, den = 0.0;
      for (int a = 0; a < A; ++a)
        for (int i = 0; i < I; ++i) {
          num += C[a](i, j) * Z(a, k) * T(i, k) / ntf_model(Z, T, V, a, i, j);
          den += Z(a, k) * T(i, k);
        }
      Vn(j, k) = std::max(V(j, k) * num / den, 1e-12);
    }
  V = Vn;
}

// Schroeder backward integral, least-squares slope over [-5, -25] dB,
// extrapolated to -60 dB.
inline double schroeder_t60(const std::vector<double>& h, int fs) {
  std::vector<double> edc(h.size());
  double acc = 0.0;
  for (size_t n = h.size(); n-- > 0;) {
    acc += h[n] * h[n];
    edc[n] = acc;
  }
  std::vector<double> t, y;
  for (size_t n = 0; n < h.size(); ++n) {
    const double db = 10.0 * std::log10(edc[n] / edc[0]);
    if (db <= -5.0 && db >= -25.0) {
      t.push_back(static_cast<double>(n) / fs);
      y.push_back(db);
    }
  }
  double mt = 0, my = 0;
  for (size_t n = 0; n < t.size(); ++n) mt += t[n], my += y[n];
  mt /= static_cast<double>(t.size());
  my /= static_cast<double>(t.size());
  double sxy = 0, sxx = 0;
  for (size_t n = 0; n < t.size(); ++n) sxy += (t[n] - mt) * (y[n] - my), sxx += (t[n] - mt) * (t[n] - mt);
  return -60.0 / (sxy / sxx);
}

inline void two_pass(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

}  // namespace oracle
