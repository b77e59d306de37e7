// spotform: simulate scenes, run sweeps, spotform recorded BF outputs, score WAVs.

#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "spot/common.hpp"
#include "spot/eval.hpp"
#include "spot/harness.hpp"
#include "spot/synth.hpp"
#include "spot/wav.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw spot::Error("cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw spot::Error(path.string() + ": " + e.what());
  }
}

std::string tag(const std::string& stem, int a, int m = -1) {
  std::string s = stem + "_a" + std::to_string(a);
  if (m >= 0) s += "_m" + std::to_string(m);
  return s + ".wav";
}

int cmd_simulate(const fs::path& config, const fs::path& out) {
  const json j = read_json(config);
  fs::create_directories(out);
  if (!j.contains("sources")) {
    // bare scene: RIRs only
    const spot::Scene scene = spot::load_scene(config);
    spot::save_rirs(out / "rirs", spot::simulate_rirs(scene));
    std::ofstream(out / "scene.json") << spot::scene_to_json(scene) << "\n";
    spdlog::info("wrote RIRs for {} sources x {} arrays to {}", scene.num_sources(), scene.num_arrays(),
                 (out / "rirs").string());
    return 0;
  }
  const spot::ExperimentConfig cfg = spot::load_experiment(config);
  const spot::FrontEnd fe = spot::build_front_end(cfg);
  spot::save_rirs(out / "rirs", fe.rirs);
  std::ofstream(out / "scene.json") << spot::scene_to_json(fe.scene) << "\n";
  for (int a = 0; a < fe.scene.num_arrays(); ++a) {
    const auto ua = static_cast<size_t>(a);
    for (size_t m = 0; m < fe.rendered.mic_signals[ua].size(); ++m)
      spot::write_wav(out / tag("mic", a, static_cast<int>(m)), fe.rendered.mic_signals[ua][m]);
    spot::write_wav(out / tag("reference", a), fe.rendered.references[ua]);
    spot::write_wav(out / tag("bf", a), spot::istft(fe.Y.Y[ua], fe.stft, fe.length()));
  }
  spot::write_weights(out / "mvdr_weights.bin", spot::mvdr_weights(fe.oracle.steering, fe.oracle.noise));
  spdlog::info("wrote RIRs, mic signals, references and BF outputs to {}", out.string());
  return 0;
}

int cmd_run(const fs::path& config, std::optional<uint64_t> seed, std::optional<int> workers,
            std::optional<fs::path> out) {
  spot::ExperimentConfig cfg = spot::load_experiment(config);
  if (seed) cfg.master_seed = *seed;
  if (workers) cfg.workers = *workers;
  if (out) cfg.output_dir = *out;
  cfg.validate();
  const auto res = spot::run_experiment(cfg);
  for (const auto& [key, st] : res.summary) {
    if (key.variant != spot::SdrVariant::kFiltered) continue;
    std::printf("%-8s %-7s K=%-3d h=%-10s  %8.3f +- %.3f dB  (n=%d)\n", spot::method_name(key.method).c_str(),
                key.output.c_str(), key.K, spot::format_number(key.hyper).c_str(), st.mean_db, st.std_db,
                st.count);
  }
  const auto failed = std::count_if(res.rows.begin(), res.rows.end(), [](const auto& r) { return r.failed; });
  std::printf("%zu rows (%d expected), %ld failed; results in %s\n", res.rows.size(), res.expected_rows,
              static_cast<long>(failed), cfg.output_dir.string().c_str());
  return failed == 0 ? 0 : 2;
}

struct SpotformArgs {
  std::vector<std::string> bf;
  std::string method = "ntf";
  int K = 30;
  double hyper = 100.0;
  int seed = 0;
  int iterations = 100;
  int warmup = 50;
  int max_lag = 256;
  std::string reference;
  fs::path out = "spotform_out";
};

int cmd_spotform(const SpotformArgs& args) {
  std::vector<spot::Waveform> bf;
  for (const auto& p : args.bf) bf.push_back(spot::read_wav(p));
  spot::StftConfig stft;
  stft.sample_rate = bf.front().sample_rate;
  const spot::FrontEnd fe = spot::bf_front_end(bf, stft, args.max_lag);
  const spot::Method method = spot::parse_method(args.method);
  const auto out = spot::spotform(fe, method, args.K, args.hyper,
                                  spot::run_seed(0, method, args.K, args.hyper, args.seed), args.iterations,
                                  args.warmup);
  fs::create_directories(args.out);
  for (size_t a = 0; a < out.per_array.size(); ++a)
    spot::write_wav(args.out / ("array" + std::to_string(a) + ".wav"), out.per_array[a]);
  spot::write_wav(args.out / "fused.wav", out.fused);
  if (!args.reference.empty()) {
    const auto ref = spot::read_wav(args.reference);
    std::printf("fused: filtered %.3f dB, si %.3f dB\n", spot::filtered_sdr(out.fused, ref),
                spot::si_sdr(out.fused, ref));
  }
  return 0;
}

int cmd_eval(const std::vector<std::string>& est, const std::vector<std::string>& ref, int taps) {
  if (est.size() != ref.size()) throw spot::Error("eval: need one reference per estimate");
  std::printf("estimate,reference,sdr_filtered_db,sdr_si_db\n");
  for (size_t n = 0; n < est.size(); ++n) {
    const auto e = spot::read_wav(est[n]);
    const auto r = spot::read_wav(ref[n]);
    std::printf("%s,%s,%s,%s\n", est[n].c_str(), ref[n].c_str(),
                spot::format_number(spot::filtered_sdr(e, r, taps)).c_str(),
                spot::format_number(spot::si_sdr(e, r)).c_str());
  }
  return 0;
}

int cmd_synth(const fs::path& out, int count, double seconds, int rate, uint64_t seed) {
  fs::create_directories(out);
  for (int s = 0; s < count; ++s) {
    const fs::path p = out / (s == 0 ? std::string("target.wav") : "interferer" + std::to_string(s - 1) + ".wav");
    spot::write_wav(p, spot::speech_like(seconds, rate, seed + static_cast<uint64_t>(s)));
    std::printf("%s\n", p.string().c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-array target extraction: beamforming plus common-component factorization"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  fs::path sim_config, sim_out = "sim_out";
  auto* sim = app.add_subcommand("simulate", "scene -> RIRs (and mic signals / BF outputs for an experiment config)");
  sim->add_option("--config", sim_config, "scene or experiment JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", sim_out, "output directory");

  fs::path run_config;
  std::optional<uint64_t> run_seed;
  std::optional<int> run_workers;
  std::optional<fs::path> run_out;
  auto* run = app.add_subcommand("run", "full experiment sweep");
  run->add_option("--config", run_config, "experiment JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", run_seed, "master seed (overrides the config)");
  run->add_option("--workers", run_workers, "concurrent runs")->check(CLI::PositiveNumber);
  run->add_option("--out", run_out, "output directory (overrides the config)");

  SpotformArgs sf;
  auto* spotform = app.add_subcommand("spotform", "one method on recorded per-array BF outputs");
  spotform->add_option("--bf", sf.bf, "BF output WAV per array, in array order")->required()->expected(1, -1);
  spotform->add_option("--method", sf.method, "nmf | ntf | bf-only")->check(CLI::IsMember({"nmf", "ntf", "bf-only"}));
  spotform->add_option("--K", sf.K, "number of bases")->check(CLI::PositiveNumber);
  spotform->add_option("--hyper", sf.hyper, "tau (nmf) or mu (ntf)");
  spotform->add_option("--seed", sf.seed, "seed index");
  spotform->add_option("--iterations", sf.iterations);
  spotform->add_option("--warmup", sf.warmup);
  spotform->add_option("--max-lag", sf.max_lag, "delay-and-sum search range in samples");
  spotform->add_option("--reference", sf.reference, "score the fused output against this WAV");
  spotform->add_option("--out", sf.out, "output directory");

  std::vector<std::string> est, ref;
  int taps = 512;
  auto* eval = app.add_subcommand("eval", "score estimate/reference WAV pairs");
  eval->add_option("--estimate", est, "estimate WAV (repeatable)")->required();
  eval->add_option("--reference", ref, "reference WAV (repeatable, same order)")->required();
  eval->add_option("--taps", taps, "filter length of the filtered SDR")->check(CLI::PositiveNumber);

  fs::path syn_out = "sources";
  int syn_count = 3, syn_rate = 16000;
  double syn_seconds = 4.0;
  uint64_t syn_seed = 1000;
  auto* syn = app.add_subcommand("synth", "write synthetic speech-like source WAVs");
  syn->add_option("--out", syn_out, "output directory");
  syn->add_option("--count", syn_count, "target plus interferers")->check(CLI::PositiveNumber);
  syn->add_option("--seconds", syn_seconds)->check(CLI::PositiveNumber);
  syn->add_option("--rate", syn_rate)->check(CLI::PositiveNumber);
  syn->add_option("--seed", syn_seed);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*sim) return cmd_simulate(sim_config, sim_out);
    if (*run) return cmd_run(run_config, run_seed, run_workers, run_out);
    if (*spotform) return cmd_spotform(sf);
    if (*eval) return cmd_eval(est, ref, taps);
    if (*syn) return cmd_synth(syn_out, syn_count, syn_seconds, syn_rate, syn_seed);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
