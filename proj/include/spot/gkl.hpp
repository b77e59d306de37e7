// gkl.hpp
// Generalized Kullback-Leibler divergence D(b | a) = b log(b / a) + a - b.

#pragma once

#include <cmath>
#include <limits>

namespace spot {

// Conventions: D(0 | a) = a, D(b | 0) = +inf for b > 0.
inline double gkl(double b, double a) {
  if (b == 0.0) return a;
  if (a == 0.0) return std::numeric_limits<double>::infinity();
  return b * std::log(b / a) + a - b;
}

}  // namespace spot
