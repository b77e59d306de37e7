// harness.cpp

#include "spot/harness.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "spot/common.hpp"
#include "spot/nmf.hpp"
#include "spot/ntf.hpp"
#include "spot/random.hpp"
#include "spot/wav.hpp"

namespace spot {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string method_name(Method m) {
  switch (m) {
    case Method::kNmf: return "nmf";
    case Method::kNtf: return "ntf";
    case Method::kBfOnly: return "bf-only";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "nmf") return Method::kNmf;
  if (name == "ntf") return Method::kNtf;
  if (name == "bf-only") return Method::kBfOnly;
  throw Error("unknown method '" + std::string(name) + "'");
}

std::vector<double> default_tau_grid() {
  // 12 points, 1e-3 .. 1 geometrically spaced
  std::vector<double> g;
  for (int n = 0; n < 12; ++n) g.push_back(1e-3 * std::pow(10.0, 3.0 * n / 11.0));
  return g;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

bool ExperimentConfig::has(Method m) const {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

void ExperimentConfig::validate() const {
  scene.validate();
  stft.validate();
  if (sources.size() != static_cast<size_t>(scene.num_sources()))
    throw Error("config: " + std::to_string(sources.size()) + " dry sources for " +
                std::to_string(scene.num_sources()) + " scene sources");
  int targets = 0;
  for (size_t s = 0; s < sources.size(); ++s) {
    if (sources[s].role == SourceRole::kTarget) ++targets;
    if (sources[s].role != scene.sources[s].role)
      throw Error("config: role of source " + std::to_string(s) + " differs from the scene");
  }
  if (targets != 1) throw Error("config: exactly one target source required");
  if (methods.empty()) throw Error("config: no methods");
  if (seeds < 1) throw Error("config: seeds must be >= 1");
  if (has(Method::kNmf) || has(Method::kNtf)) {
    if (K.empty()) throw Error("config: empty K grid");
    for (int k : K)
      if (k < 1) throw Error("config: K must be >= 1");
    if (iterations < 1) throw Error("config: iterations must be >= 1");
  }
  if (has(Method::kNmf) && tau.empty()) throw Error("config: empty tau grid");
  if (has(Method::kNtf)) {
    if (mu.empty()) throw Error("config: empty mu grid");
    for (double m : mu)
      if (!(m >= 0.0)) throw Error("config: mu must be >= 0");
    if (warmup < 0 || warmup > iterations) throw Error("config: warmup outside [0, iterations]");
  }
  if (workers < 1) throw Error("config: workers must be >= 1");
  if (filter_taps < 1) throw Error("config: filter_taps must be >= 1");
  if (!(timeout_s > 0.0)) throw Error("config: timeout must be positive");
}

namespace {

SourceRole parse_role(const std::string& r) {
  if (r == "target") return SourceRole::kTarget;
  if (r == "interferer") return SourceRole::kInterferer;
  throw Error("config: unknown role '" + r + "'");
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const std::set<std::string> kConfigKeys = {
    "scene", "rir_manifest", "sources", "stft", "methods", "K", "tau", "mu", "seeds", "iterations",
    "warmup", "master_seed", "workers", "timeout_s", "filter_taps", "duration_s", "save_wavs",
    "output_dir"};

}  // namespace

ExperimentConfig parse_experiment(std::string_view json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error("config: top level must be an object");
  for (const auto& [key, value] : j.items())
    if (!kConfigKeys.count(key)) throw Error("config: unknown key '" + key + "'");

  ExperimentConfig cfg;
  try {
    const auto& js = j.at("scene");
    cfg.scene = js.is_string() ? load_scene(resolve(base_dir, js.get<std::string>())) : parse_scene(js.dump());
    if (j.contains("rir_manifest")) cfg.rir_manifest = resolve(base_dir, j["rir_manifest"].get<std::string>());
    for (const auto& s : j.at("sources"))
      cfg.sources.push_back({resolve(base_dir, s.at("path").get<std::string>()),
                             parse_role(s.at("role").get<std::string>())});
    if (j.contains("stft")) {
      const auto& st = j["stft"];
      cfg.stft.sample_rate = st.value("sample_rate", cfg.stft.sample_rate);
      cfg.stft.window_ms = st.value("window_ms", cfg.stft.window_ms);
      cfg.stft.hop_ms = st.value("hop_ms", cfg.stft.hop_ms);
    } else {
      cfg.stft.sample_rate = cfg.scene.sample_rate;
    }
    if (j.contains("methods")) {
      cfg.methods.clear();
      for (const auto& m : j["methods"]) cfg.methods.push_back(parse_method(m.get<std::string>()));
    }
    if (j.contains("K")) cfg.K = j["K"].get<std::vector<int>>();
    if (j.contains("tau")) cfg.tau = j["tau"].get<std::vector<double>>();
    if (j.contains("mu")) cfg.mu = j["mu"].get<std::vector<double>>();
    cfg.seeds = j.value("seeds", cfg.seeds);
    cfg.iterations = j.value("iterations", cfg.iterations);
    cfg.warmup = j.value("warmup", cfg.warmup);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    cfg.workers = j.value("workers", cfg.workers);
    cfg.timeout_s = j.value("timeout_s", cfg.timeout_s);
    cfg.filter_taps = j.value("filter_taps", cfg.filter_taps);
    cfg.duration_s = j.value("duration_s", cfg.duration_s);
    cfg.save_wavs = j.value("save_wavs", cfg.save_wavs);
    if (j.contains("output_dir")) cfg.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
  } catch (const json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  if (cfg.scene.sample_rate != cfg.stft.sample_rate) {
    spdlog::warn("config: scene sample rate {} replaced by the STFT rate {}", cfg.scene.sample_rate,
                 cfg.stft.sample_rate);
    cfg.scene.sample_rate = cfg.stft.sample_rate;
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment(const fs::path& path) {
  return parse_experiment(read_file(path), path.parent_path());
}

std::string experiment_to_json(const ExperimentConfig& cfg) {
  json j;
  j["scene"] = json::parse(scene_to_json(cfg.scene));
  if (cfg.rir_manifest) j["rir_manifest"] = cfg.rir_manifest->string();
  j["sources"] = json::array();
  for (const auto& s : cfg.sources)
    j["sources"].push_back({{"path", s.path.string()},
                            {"role", s.role == SourceRole::kTarget ? "target" : "interferer"}});
  j["stft"] = {{"sample_rate", cfg.stft.sample_rate},
               {"window_ms", cfg.stft.window_ms},
               {"hop_ms", cfg.stft.hop_ms}};
  j["methods"] = json::array();
  for (auto m : cfg.methods) j["methods"].push_back(method_name(m));
  j["K"] = cfg.K;
  j["tau"] = cfg.tau;
  j["mu"] = cfg.mu;
  j["seeds"] = cfg.seeds;
  j["iterations"] = cfg.iterations;
  j["warmup"] = cfg.warmup;
  j["master_seed"] = cfg.master_seed;
  j["workers"] = cfg.workers;
  j["timeout_s"] = cfg.timeout_s;
  j["filter_taps"] = cfg.filter_taps;
  j["duration_s"] = cfg.duration_s;
  j["save_wavs"] = cfg.save_wavs;
  j["output_dir"] = cfg.output_dir.string();
  return j.dump(2);
}

FrontEnd build_front_end(const Scene& scene, const StftConfig& stft, std::vector<Waveform> dry,
                         const std::optional<RirSet>& rirs) {
  scene.validate();
  stft.validate();
  if (dry.size() != static_cast<size_t>(scene.num_sources()))
    throw Error("front end: number of dry sources does not match the scene");
  if (scene.sample_rate != stft.sample_rate) throw Error("front end: scene and STFT sample rates differ");

  size_t L = SIZE_MAX;
  for (auto& d : dry) {
    d = resample(d, stft.sample_rate);
    L = std::min(L, d.size());
  }
  if (L == 0) throw Error("front end: empty source");
  for (auto& d : dry) d.samples.resize(L);

  FrontEnd fe;
  fe.scene = scene;
  fe.stft = stft;
  fe.dry = normalize_energy(dry);
  fe.rirs = rirs ? *rirs : simulate_rirs(scene);
  fe.rendered = render_observations(scene, fe.rirs, fe.dry, stft);
  fe.oracle = oracle_quantities(fe.rirs, scene, stft);
  fe.Y = mvdr(fe.rendered.observations, fe.oracle.steering, fe.oracle.noise);
  fe.max_lag = delay_and_sum_max_lag(scene);
  fe.samples = L;
  return fe;
}

FrontEnd bf_front_end(const std::vector<Waveform>& bf_outputs, const StftConfig& stft, int max_lag) {
  if (bf_outputs.empty()) throw Error("front end: no BF outputs");
  FrontEnd fe;
  fe.stft = stft;
  fe.max_lag = max_lag;
  fe.samples = SIZE_MAX;
  for (const auto& w : bf_outputs) {
    if (w.sample_rate != stft.sample_rate) throw Error("front end: BF output sample rate differs from the STFT rate");
    fe.samples = std::min(fe.samples, w.size());
  }
  for (const auto& w : bf_outputs) {
    Waveform t = w;
    t.samples.resize(fe.samples);
    fe.Y.Y.push_back(spot::stft(t, stft));
  }
  return fe;
}

FrontEnd build_front_end(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<Waveform> dry;
  for (const auto& s : cfg.sources) {
    Waveform w = read_wav(s.path);
    if (cfg.duration_s > 0.0) {
      const auto n = static_cast<size_t>(cfg.duration_s * w.sample_rate);
      if (w.samples.size() > n) w.samples.resize(n);
    }
    dry.push_back(std::move(w));
  }
  std::optional<RirSet> rirs;
  if (cfg.rir_manifest) rirs = load_rirs(*cfg.rir_manifest);
  return build_front_end(cfg.scene, cfg.stft, std::move(dry), rirs);
}

bool row_less(const ResultRow& a, const ResultRow& b) {
  return std::tie(a.method, a.output, a.K, a.hyper, a.seed) <
         std::tie(b.method, b.output, b.K, b.hyper, b.seed);
}

uint64_t run_seed(uint64_t master, Method method, int K, double hyper, int seed_index) {
  // nmf fits do not depend on tau, so one fit serves the whole tau sweep
  const double h = method == Method::kNtf ? hyper : 0.0;
  return hash_seed({master, static_cast<uint64_t>(method), static_cast<uint64_t>(K),
                    std::bit_cast<uint64_t>(h), static_cast<uint64_t>(seed_index)});
}

namespace {

using Clock = std::chrono::steady_clock;

IterationHook deadline_hook(const std::optional<double>& timeout_s) {
  if (!timeout_s) return {};
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                           std::chrono::duration<double>(*timeout_s));
  const double limit = *timeout_s;
  return [deadline, limit](int) {
    if (Clock::now() > deadline) throw Error("timeout after " + format_number(limit) + " s");
  };
}

RunOutput reconstruct(const FrontEnd& fe, const std::vector<ComplexSpectrogram>& S) {
  RunOutput out;
  for (const auto& s : S) out.per_array.push_back(istft(s, fe.stft, fe.length()));
  out.fused = delay_and_sum(out.per_array, fe.max_lag);
  return out;
}

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void score(ResultRow& row, const Waveform& est, const Waveform& ref, int taps) {
  row.sdr_filtered_db = filtered_sdr(est, ref, taps);
  row.sdr_si_db = si_sdr(est, ref);
}

std::string run_dir_name(Method m, int K, double hyper, int seed) {
  return method_name(m) + "_K" + std::to_string(K) + "_h" + format_number(hyper) + "_s" + std::to_string(seed);
}

void write_run_wavs(const fs::path& dir, const RunOutput& out) {
  fs::create_directories(dir);
  for (size_t a = 0; a < out.per_array.size(); ++a)
    write_wav(dir / ("array" + std::to_string(a) + ".wav"), out.per_array[a]);
  write_wav(dir / "fused.wav", out.fused);
}

ResultRow base_row(const FrontEnd& fe, Method m, int K, double hyper, int seed) {
  ResultRow r;
  r.method = m;
  r.A = fe.scene.num_arrays();
  r.t60 = fe.scene.t60;
  r.K = K;
  r.hyper = hyper;
  r.seed = seed;
  return r;
}

std::vector<ResultRow> bf_rows(const ExperimentConfig& cfg, const FrontEnd& fe, int seed,
                               const fs::path& out_dir) {
  const auto t0 = Clock::now();
  std::vector<ResultRow> rows;
  for (int a = 0; a < fe.scene.num_arrays(); ++a) {
    ResultRow r = base_row(fe, Method::kBfOnly, 0, 0.0, seed);
    r.output = "array" + std::to_string(a);
    rows.push_back(std::move(r));
  }
  try {
    const RunOutput out = spotform(fe, Method::kBfOnly, 0, 0.0, 0, cfg.iterations, cfg.warmup);
    for (size_t a = 0; a < rows.size(); ++a)
      score(rows[a], out.per_array[a], fe.rendered.references[a], cfg.filter_taps);
    if (!out_dir.empty()) write_run_wavs(out_dir, out);
  } catch (const std::exception& e) {
    for (auto& r : rows) r.failed = true, r.reason = e.what();
  }
  const double ms = elapsed_ms(t0);
  for (auto& r : rows) r.runtime_ms = ms;
  return rows;
}

// One nmf fit scored at every tau of the grid.
std::vector<ResultRow> nmf_rows(const ExperimentConfig& cfg, const FrontEnd& fe, int K, int seed,
                                const fs::path& wav_root) {
  std::vector<ResultRow> rows;
  for (double tau : cfg.tau) rows.push_back(base_row(fe, Method::kNmf, K, tau, seed));
  const auto t0 = Clock::now();
  try {
    const Eigen::MatrixXd C = build_concat(fe.Y);
    const NmfFit fit = fit_nmf(C, K, cfg.iterations, run_seed(cfg.master_seed, Method::kNmf, K, 0.0, seed),
                               deadline_hook(cfg.timeout_s));
    const double fit_ms = elapsed_ms(t0);
    for (auto& r : rows) {
      const auto t1 = Clock::now();
      try {
        const auto mask = threshold_mask(fit.model, fe.Y.num_arrays(), fe.Y.frames(), r.hyper);
        const RunOutput out = reconstruct(fe, nmf_wiener(fit.model, mask, fe.Y));
        score(r, out.fused, fe.rendered.references[0], cfg.filter_taps);
        if (!wav_root.empty()) write_run_wavs(wav_root / run_dir_name(Method::kNmf, K, r.hyper, seed), out);
      } catch (const std::exception& e) {
        r.failed = true;
        r.reason = e.what();
      }
      r.runtime_ms = fit_ms + elapsed_ms(t1);
    }
  } catch (const std::exception& e) {
    for (auto& r : rows) r.failed = true, r.reason = e.what(), r.runtime_ms = elapsed_ms(t0);
  }
  return rows;
}

std::vector<ResultRow> ntf_rows(const ExperimentConfig& cfg, const FrontEnd& fe, int K, double mu, int seed,
                                const fs::path& wav_root) {
  ResultRow r = base_row(fe, Method::kNtf, K, mu, seed);
  const auto t0 = Clock::now();
  try {
    const RunOutput out = spotform(fe, Method::kNtf, K, mu, run_seed(cfg.master_seed, Method::kNtf, K, mu, seed),
                                   cfg.iterations, cfg.warmup, cfg.timeout_s);
    score(r, out.fused, fe.rendered.references[0], cfg.filter_taps);
    if (!wav_root.empty()) write_run_wavs(wav_root / run_dir_name(Method::kNtf, K, mu, seed), out);
  } catch (const std::exception& e) {
    r.failed = true;
    r.reason = e.what();
  }
  r.runtime_ms = elapsed_ms(t0);
  return {r};
}

void run_parallel(std::vector<std::function<void()>>& jobs, int workers) {
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < jobs.size(); i = next++) jobs[i]();
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  if (n == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

std::string variant_name(SdrVariant v) { return v == SdrVariant::kFiltered ? "filtered" : "si"; }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << text;
}

}  // namespace

RunOutput spotform(const FrontEnd& fe, Method method, int K, double hyper, uint64_t stream_seed,
                   int iterations, int warmup, const std::optional<double>& timeout_s) {
  switch (method) {
    case Method::kBfOnly:
      return reconstruct(fe, fe.Y.Y);
    case Method::kNmf: {
      const Eigen::MatrixXd C = build_concat(fe.Y);
      const NmfFit fit = fit_nmf(C, K, iterations, stream_seed, deadline_hook(timeout_s));
      const auto mask = threshold_mask(fit.model, fe.Y.num_arrays(), fe.Y.frames(), hyper);
      return reconstruct(fe, nmf_wiener(fit.model, mask, fe.Y));
    }
    case Method::kNtf: {
      RegularizationSchedule sched;
      sched.mu = hyper;
      sched.warmup_iterations = warmup;
      sched.total_iterations = iterations;
      const NtfFit fit = fit_ntf(build_prop_tensor(fe.Y), K, sched, stream_seed, deadline_hook(timeout_s));
      return reconstruct(fe, ntf_wiener(fit.model, fit.assignment, fe.Y));
    }
  }
  throw Error("spotform: unknown method");
}

std::vector<ResultRow> run_single(const ExperimentConfig& cfg, const FrontEnd& fe, Method method, int K,
                                  double hyper, int seed_index, const fs::path& out_dir) {
  switch (method) {
    case Method::kBfOnly:
      return bf_rows(cfg, fe, seed_index, out_dir);
    case Method::kNtf: {
      auto rows = ntf_rows(cfg, fe, K, hyper, seed_index, {});
      if (!out_dir.empty() && !rows.front().failed)
        write_run_wavs(out_dir, spotform(fe, method, K, hyper, run_seed(cfg.master_seed, method, K, hyper, seed_index),
                                         cfg.iterations, cfg.warmup, cfg.timeout_s));
      return rows;
    }
    case Method::kNmf: {
      ExperimentConfig one = cfg;
      one.tau = {hyper};
      auto rows = nmf_rows(one, fe, K, seed_index, {});
      if (!out_dir.empty() && !rows.front().failed)
        write_run_wavs(out_dir, spotform(fe, method, K, hyper, run_seed(cfg.master_seed, method, K, hyper, seed_index),
                                         cfg.iterations, cfg.warmup, cfg.timeout_s));
      return rows;
    }
  }
  throw Error("run_single: unknown method");
}

Summary summarize_rows(const std::vector<ResultRow>& rows) {
  std::map<GroupKey, std::vector<double>> groups;
  for (const auto& r : rows) {
    if (r.failed) continue;
    groups[{r.method, r.output, r.K, r.hyper, SdrVariant::kFiltered}].push_back(r.sdr_filtered_db);
    groups[{r.method, r.output, r.K, r.hyper, SdrVariant::kScaleInvariant}].push_back(r.sdr_si_db);
  }
  Summary out;
  for (const auto& [key, vals] : groups) out[key] = summarize(vals);
  return out;
}

std::map<int, std::vector<std::pair<double, AggregateStats>>> top_tau(const Summary& summary, int count) {
  std::map<int, std::vector<std::pair<double, AggregateStats>>> out;
  for (const auto& [key, st] : summary)
    if (key.method == Method::kNmf && key.variant == SdrVariant::kFiltered && key.output == "fused")
      out[key.K].push_back({key.hyper, st});
  for (auto& [K, list] : out) {
    std::stable_sort(list.begin(), list.end(),
                     [](const auto& a, const auto& b) { return a.second.mean_db > b.second.mean_db; });
    if (static_cast<int>(list.size()) > count) list.resize(static_cast<size_t>(count));
  }
  return out;
}

void write_results_csv(const fs::path& path, const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  os << "# schema_version=" << kCsvSchemaVersion << "\n";
  os << "method,output,A,T60,K,tau_or_mu,seed,sdr_filtered_db,sdr_si_db,runtime_ms,status,reason\n";
  for (const auto& r : rows) {
    std::string reason = r.reason;
    std::replace(reason.begin(), reason.end(), ',', ';');
    std::replace(reason.begin(), reason.end(), '\n', ' ');
    os << method_name(r.method) << ',' << r.output << ',' << r.A << ',' << format_number(r.t60) << ',' << r.K
       << ',' << format_number(r.hyper) << ',' << r.seed << ','
       << (r.failed ? "" : format_number(r.sdr_filtered_db)) << ','
       << (r.failed ? "" : format_number(r.sdr_si_db)) << ',' << format_number(std::round(r.runtime_ms))
       << ',' << (r.failed ? "failed" : "ok") << ',' << reason << "\n";
  }
  write_text(path, os.str());
}

void write_summary_csv(const fs::path& path, const Summary& summary, int A, double t60) {
  std::ostringstream os;
  os << "# schema_version=" << kCsvSchemaVersion << "\n";
  os << "method,output,A,T60,K,tau_or_mu,variant,count,mean_db,std_db\n";
  for (const auto& [k, st] : summary)
    os << method_name(k.method) << ',' << k.output << ',' << A << ',' << format_number(t60) << ',' << k.K << ','
       << format_number(k.hyper) << ',' << variant_name(k.variant) << ',' << st.count << ','
       << format_number(st.mean_db) << ',' << format_number(st.std_db) << "\n";
  write_text(path, os.str());
}

void emit_plots(const fs::path& dir, const ExperimentConfig& cfg, const Summary& summary) {
  const int A = cfg.scene.num_arrays();
  const std::string cond = "A" + std::to_string(A) + "_T60_" + format_number(cfg.scene.t60);

  std::ostringstream os;
  os << "# schema_version=" << kCsvSchemaVersion << "\n";
  os << "method,output,tau_or_mu,variant,K,mean_db,std_db\n";
  // series ordered by (method, output, hyper, variant), then K
  std::vector<std::pair<GroupKey, AggregateStats>> entries(summary.begin(), summary.end());
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first.method, a.first.output, a.first.hyper, a.first.variant, a.first.K) <
           std::tie(b.first.method, b.first.output, b.first.hyper, b.first.variant, b.first.K);
  });
  for (const auto& [k, st] : entries)
    os << method_name(k.method) << ',' << k.output << ',' << format_number(k.hyper) << ','
       << variant_name(k.variant) << ',' << k.K << ',' << format_number(st.mean_db) << ','
       << format_number(st.std_db) << "\n";
  write_text(dir / (cond + ".csv"), os.str());

  json missing = json::array();
  auto check = [&](Method m, const std::string& output, int K, double hyper) {
    if (!summary.count({m, output, K, hyper, SdrVariant::kFiltered}))
      missing.push_back({{"method", method_name(m)}, {"output", output}, {"K", K}, {"tau_or_mu", hyper}});
  };
  for (Method m : cfg.methods) {
    if (m == Method::kBfOnly) {
      for (int a = 0; a < A; ++a) check(m, "array" + std::to_string(a), 0, 0.0);
      continue;
    }
    for (int K : cfg.K)
      for (double h : (m == Method::kNmf ? cfg.tau : cfg.mu)) check(m, "fused", K, h);
  }
  json manifest = {{"condition", cond}, {"file", cond + ".csv"}, {"missing", missing}};
  write_text(dir / "missing.json", manifest.dump(2) + "\n");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const FrontEnd& fe, bool write) {
  cfg.validate();
  const fs::path wav_root = (write && cfg.save_wavs) ? cfg.output_dir / "wav" : fs::path{};

  std::vector<std::vector<ResultRow>> slots;
  std::vector<std::function<void()>> jobs;
  auto add = [&](std::function<std::vector<ResultRow>()> f) {
    slots.emplace_back();
    const size_t idx = slots.size() - 1;
    jobs.push_back([&slots, idx, f = std::move(f)] { slots[idx] = f(); });
  };

  ExperimentResult res;
  const int A = fe.scene.num_arrays();
  for (Method m : cfg.methods) {
    switch (m) {
      case Method::kBfOnly:
        res.expected_rows += A * cfg.seeds;
        // no randomness on this path: one evaluation replicated over seeds
        add([&, wav_root] {
          const auto once = bf_rows(cfg, fe, 0, wav_root.empty() ? fs::path{} : wav_root / "bf-only");
          std::vector<ResultRow> rows;
          for (int s = 0; s < cfg.seeds; ++s)
            for (auto r : once) {
              r.seed = s;
              rows.push_back(std::move(r));
            }
          return rows;
        });
        break;
      case Method::kNmf:
        res.expected_rows += static_cast<int>(cfg.K.size() * cfg.tau.size()) * cfg.seeds;
        for (int K : cfg.K)
          for (int s = 0; s < cfg.seeds; ++s) add([&, K, s, wav_root] { return nmf_rows(cfg, fe, K, s, wav_root); });
        break;
      case Method::kNtf:
        res.expected_rows += static_cast<int>(cfg.K.size() * cfg.mu.size()) * cfg.seeds;
        for (int K : cfg.K)
          for (double mu : cfg.mu)
            for (int s = 0; s < cfg.seeds; ++s)
              add([&, K, mu, s, wav_root] { return ntf_rows(cfg, fe, K, mu, s, wav_root); });
        break;
    }
  }

  spdlog::info("running {} jobs on {} worker(s)", jobs.size(), cfg.workers);
  run_parallel(jobs, cfg.workers);
  for (auto& s : slots)
    for (auto& r : s) res.rows.push_back(std::move(r));
  std::sort(res.rows.begin(), res.rows.end(), row_less);
  res.summary = summarize_rows(res.rows);

  const auto failed = std::count_if(res.rows.begin(), res.rows.end(), [](const auto& r) { return r.failed; });
  if (failed > 0) spdlog::warn("{} of {} runs failed", failed, res.rows.size());
  if (static_cast<int>(res.rows.size()) != res.expected_rows)
    spdlog::error("row count {} differs from the expected {}", res.rows.size(), res.expected_rows);

  if (!write) return res;
  const auto& out = cfg.output_dir;
  fs::create_directories(out);
  write_results_csv(out / "results.csv", res.rows);
  write_summary_csv(out / "summary.csv", res.summary, A, fe.scene.t60);
  emit_plots(out / "plots", cfg, res.summary);

  std::ostringstream tt;
  tt << "# schema_version=" << kCsvSchemaVersion << "\n";
  tt << "K,rank,tau,count,mean_db,std_db\n";
  for (const auto& [K, list] : top_tau(res.summary))
    for (size_t r = 0; r < list.size(); ++r)
      tt << K << ',' << r + 1 << ',' << format_number(list[r].first) << ',' << list[r].second.count << ','
         << format_number(list[r].second.mean_db) << ',' << format_number(list[r].second.std_db) << "\n";
  write_text(out / "top_tau.csv", tt.str());

  json manifest;
  manifest["schema_version"] = kCsvSchemaVersion;
  manifest["config"] = json::parse(experiment_to_json(cfg));
  manifest["seeding"] = "stream seed = hash(master_seed, method, K, hyper, seed_index); hyper is 0 for nmf";
  manifest["expected_rows"] = res.expected_rows;
  manifest["rows"] = res.rows.size();
  manifest["failed_rows"] = failed;
  manifest["signal_length"] = fe.length();
  manifest["files"] = {"results.csv", "summary.csv", "top_tau.csv", "plots/"};
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  return res;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const FrontEnd fe = build_front_end(cfg);
  return run_experiment(cfg, fe, true);
}

}  // namespace spot
