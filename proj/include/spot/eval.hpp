// eval.hpp
// Source-to-distortion ratios and seed-aggregated statistics.

#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "spot/signal.hpp"

namespace spot {

// Scale-invariant SDR: 10 log10(|a s|^2 / |a s - e|^2), a = <e, s> / |s|^2.
// Signals are truncated to the shorter length. Results are capped to
// [-300, 300] dB; -300 marks a zero projection, +300 a perfect match.
double si_sdr(const Waveform& estimate, const Waveform& reference);

// SDR where the allowed distortion is the least-squares causal FIR filter
// (filter_taps taps) mapping the reference to the estimate.
double filtered_sdr(const Waveform& estimate, const Waveform& reference, int filter_taps = 512);

enum class SdrVariant { kFiltered, kScaleInvariant };

struct SdrReport {
  std::string method;
  int K = 0;
  double hyper = 0.0;  // tau or mu
  int seed = 0;
  double sdr_db = 0.0;
  SdrVariant variant = SdrVariant::kFiltered;
};

struct AggregateStats {
  int count = 0;
  double mean_db = 0.0;
  double std_db = 0.0;  // unbiased; 0 for a single report
};

// Mean and unbiased standard deviation of a nonempty sample.
AggregateStats summarize(const std::vector<double>& values);

using ReportKey = std::tuple<std::string, int, double, SdrVariant>;

// Groups reports by (method, K, hyper, variant).
std::map<ReportKey, AggregateStats> aggregate(const std::vector<SdrReport>& reports);

}  // namespace spot
