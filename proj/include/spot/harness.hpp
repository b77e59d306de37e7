// harness.hpp
// Experiment configuration, pipeline wiring and result emission.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spot/beamform.hpp"
#include "spot/eval.hpp"
#include "spot/roomsim.hpp"
#include "spot/signal.hpp"

namespace spot {

inline constexpr int kCsvSchemaVersion = 1;

enum class Method { kNmf, kNtf, kBfOnly };

std::string method_name(Method m);
Method parse_method(std::string_view name);

struct DrySource {
  std::filesystem::path path;
  SourceRole role = SourceRole::kInterferer;
};

std::vector<double> default_tau_grid();

struct ExperimentConfig {
  Scene scene;
  std::optional<std::filesystem::path> rir_manifest;  // replaces simulation
  std::vector<DrySource> sources;                      // same order as scene.sources
  StftConfig stft;
  std::vector<Method> methods = {Method::kNmf, Method::kNtf, Method::kBfOnly};
  std::vector<int> K = {10, 20, 30, 40, 50};
  std::vector<double> tau = default_tau_grid();
  std::vector<double> mu = {1.0, 10.0, 100.0, 1000.0};
  int seeds = 10;
  int iterations = 100;
  int warmup = 50;
  uint64_t master_seed = 0;
  int workers = 1;
  double timeout_s = 600.0;
  int filter_taps = 512;
  double duration_s = 0.0;  // > 0: truncate sources to this length
  bool save_wavs = false;   // per-run estimates under out/wav
  std::filesystem::path output_dir = "out";

  bool has(Method m) const;
  // One target source, seeds >= 1, grids nonempty for the selected methods.
  void validate() const;
};

// Paths inside the config are resolved against base_dir.
ExperimentConfig parse_experiment(std::string_view json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment(const std::filesystem::path& path);
std::string experiment_to_json(const ExperimentConfig& cfg);

// Everything upstream of the factorization, shared by all runs.
struct FrontEnd {
  Scene scene;
  StftConfig stft;
  RirSet rirs;
  std::vector<Waveform> dry;  // resampled, equal length, unit energy
  Rendered rendered;
  OracleQuantities oracle;
  BfOutputTensor Y;
  int max_lag = 0;
  size_t samples = 0;  // common signal length

  size_t length() const { return samples; }
};

// Front end holding only BF outputs (for spotforming recorded outputs).
FrontEnd bf_front_end(const std::vector<Waveform>& bf_outputs, const StftConfig& stft, int max_lag);

FrontEnd build_front_end(const ExperimentConfig& cfg);
// Same, with already loaded dry sources (roles taken from the scene).
FrontEnd build_front_end(const Scene& scene, const StftConfig& stft, std::vector<Waveform> dry,
                         const std::optional<RirSet>& rirs = std::nullopt);

struct ResultRow {
  Method method = Method::kBfOnly;
  std::string output = "fused";  // "fused" or "array<a>"
  int A = 0;
  double t60 = 0.0;
  int K = 0;
  double hyper = 0.0;  // tau for nmf, mu for ntf, 0 for bf-only
  int seed = 0;
  double sdr_filtered_db = 0.0;
  double sdr_si_db = 0.0;
  double runtime_ms = 0.0;
  bool failed = false;
  std::string reason;
};

// Rows sort by (method, output, K, hyper, seed).
bool row_less(const ResultRow& a, const ResultRow& b);

uint64_t run_seed(uint64_t master, Method method, int K, double hyper, int seed_index);

struct RunOutput {
  std::vector<Waveform> per_array;  // time-domain estimates, one per array
  Waveform fused;
};

// Wiener-filtered (or raw, for bf-only) estimates for one combination.
RunOutput spotform(const FrontEnd& fe, Method method, int K, double hyper, uint64_t stream_seed,
                   int iterations, int warmup, const std::optional<double>& timeout_s = std::nullopt);

// One combination end to end: a single fused row for nmf and ntf, one row
// per array for bf-only. Writes array<a>.wav and fused.wav under out_dir
// when it is nonempty.
std::vector<ResultRow> run_single(const ExperimentConfig& cfg, const FrontEnd& fe, Method method, int K,
                     double hyper, int seed_index, const std::filesystem::path& out_dir = {});

struct GroupKey {
  Method method;
  std::string output;
  int K;
  double hyper;
  SdrVariant variant;
  auto operator<=>(const GroupKey&) const = default;
};

using Summary = std::map<GroupKey, AggregateStats>;

struct ExperimentResult {
  std::vector<ResultRow> rows;
  Summary summary;
  int expected_rows = 0;
};

// Runs every combination, writes results.csv, summary.csv, top_tau.csv,
// plots/ and manifest.json into cfg.output_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);
// Same, on a prebuilt front end; nothing is written when write is false.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const FrontEnd& fe, bool write = true);

Summary summarize_rows(const std::vector<ResultRow>& rows);

// The three best tau values per K by mean filtered SDR of the fused output.
std::map<int, std::vector<std::pair<double, AggregateStats>>> top_tau(const Summary& summary,
                                                                      int count = 3);

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
void write_summary_csv(const std::filesystem::path& path, const Summary& summary, int A, double t60);

// One CSV per (A, T60) under dir holding (method, hyper, variant, K, mean,
// std) series, plus missing.json listing grid points without successful rows.
void emit_plots(const std::filesystem::path& dir, const ExperimentConfig& cfg, const Summary& summary);

std::string format_number(double v);

}  // namespace spot
