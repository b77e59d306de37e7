// common.hpp
// Shared error type and numeric constants.

#pragma once

#include <stdexcept>
#include <string>

namespace spot {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Floor applied to factor entries and model reconstructions before any
// division or logarithm. The multiplicative rules are undefined at exact 0.
inline constexpr double kModelFloor = 1e-12;

// Floor for Wiener-gain denominators.
inline constexpr double kGainFloor = 1e-300;

// Sentinel cap for SDR values (perfect / zero projection).
inline constexpr double kSdrCapDb = 300.0;

}  // namespace spot
