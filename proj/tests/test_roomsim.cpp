#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "spot/common.hpp"
#include "spot/roomsim.hpp"
#include "spot/wav.hpp"

using namespace spot;
namespace fs = std::filesystem;

namespace {

size_t argmax_abs(const std::vector<double>& x) {
  size_t best = 0;
  for (size_t n = 1; n < x.size(); ++n)
    if (std::abs(x[n]) > std::abs(x[best])) best = n;
  return best;
}

double energy_of(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

fs::path temp_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Roomsim, DirectPathDelay) {
  Scene sc = default_scene(2, 0.0);
  const Rir r = image_source_rir(sc, {1.0, 3.0}, {4.43, 3.0}, {});
  EXPECT_NEAR(static_cast<double>(argmax_abs(r.taps)), 160.0, 1.0);
}

TEST(Roomsim, AnechoicSingleTap) {
  Scene sc = default_scene(2, 0.0);
  const Rir r = image_source_rir(sc, {1.0, 3.0}, {4.43, 3.0}, {});
  const size_t p = argmax_abs(r.taps);
  double outside = 0.0;
  for (size_t n = 0; n < r.taps.size(); ++n)
    if (n + 1 < p || n > p + 1) outside += r.taps[n] * r.taps[n];
  EXPECT_LT(outside, 1e-6 * energy_of(r.taps));
}

TEST(Roomsim, AnechoicEnergyIsInverseDistance) {
  Scene sc = default_scene(2, 0.0);
  for (double d : {0.731, 1.5, 2.2217, 4.05}) {
    const Rir r = image_source_rir(sc, {1.0, 2.0}, {1.0 + d, 2.0}, {});
    EXPECT_NEAR(energy_of(r.taps) * d, 1.0, 1e-6) << d;
  }
}

TEST(Roomsim, DegenerateGeometry) {
  Scene sc = default_scene(2, 0.0);
  EXPECT_THROW(image_source_rir(sc, {1.0, 1.0}, {1.0, 1.0}, {}), Error);
}

TEST(Roomsim, DefaultScene) {
  const Scene sc = default_scene(2, 0.0);
  EXPECT_EQ(sc.num_arrays(), 2);
  EXPECT_EQ(sc.num_sources(), 3);
  EXPECT_EQ(sc.target_index(), 0);
  const Point target = sc.sources[0].position;
  for (int a = 0; a < 2; ++a) {
    const auto& arr = sc.arrays[static_cast<size_t>(a)];
    const auto mics = arr.mic_positions();
    ASSERT_EQ(mics.size(), 3u);
    EXPECT_NEAR(distance(mics[0], mics[1]), 0.0283, 1e-12);
    EXPECT_NEAR(distance(mics[1], mics[2]), 0.0283, 1e-12);
    // interferer in the look direction, behind the target
    const Point q = sc.sources[static_cast<size_t>(a + 1)].position;
    const double bearing_t = std::atan2(target.y - arr.center.y, target.x - arr.center.x);
    const double bearing_q = std::atan2(q.y - arr.center.y, q.x - arr.center.x);
    EXPECT_NEAR(std::remainder(bearing_t - bearing_q, 2 * std::numbers::pi), 0.0, 1e-9);
    EXPECT_GT(distance(q, arr.center), distance(target, arr.center));
  }
  EXPECT_EQ(default_scene(3, 0.0).num_arrays(), 3);
}

TEST(Roomsim, SceneValidation) {
  Scene sc = default_scene(2, 0.0);
  sc.sources[1].position = {7.0, 1.0};
  EXPECT_THROW(sc.validate(), Error);
  sc = default_scene(2, 0.0);
  sc.sources[1].role = SourceRole::kTarget;
  EXPECT_THROW(sc.validate(), Error);
  sc = default_scene(2, 0.0);
  sc.arrays.pop_back();
  EXPECT_THROW(sc.validate(), Error);
}

TEST(Roomsim, SceneJsonRoundtrip) {
  const Scene sc = default_scene(3, 0.256);
  const Scene back = parse_scene(scene_to_json(sc));
  ASSERT_EQ(back.num_arrays(), 3);
  ASSERT_EQ(back.num_sources(), 4);
  EXPECT_DOUBLE_EQ(back.t60, 0.256);
  for (int a = 0; a < 3; ++a) {
    EXPECT_DOUBLE_EQ(back.arrays[static_cast<size_t>(a)].center.x, sc.arrays[static_cast<size_t>(a)].center.x);
    EXPECT_DOUBLE_EQ(back.arrays[static_cast<size_t>(a)].look_direction,
                     sc.arrays[static_cast<size_t>(a)].look_direction);
  }
  const Scene preset = parse_scene(R"({"preset": "default", "num_arrays": 2, "t60": 0.0})");
  EXPECT_EQ(preset.num_arrays(), 2);
  EXPECT_THROW(parse_scene("{"), Error);
  EXPECT_THROW(parse_scene(R"({"preset": "other"})"), Error);
}

TEST(Roomsim, ReverberantT60Calibrated) {
  const Scene sc = default_scene(2, 0.256);
  const RirSet rirs = simulate_rirs(sc);
  // every target RIR, estimated by the independent decay-curve oracle
  for (int a = 0; a < 2; ++a)
    for (int m = 0; m < 3; ++m) {
      const double t = oracle::schroeder_t60(rirs.at(0, a, m).taps, 16000);
      EXPECT_NEAR(t, 0.256, 0.2 * 0.256) << a << "," << m;
    }
  EXPECT_NEAR(schroeder_t60(rirs.at(0, 0, 0).taps, 16000), oracle::schroeder_t60(rirs.at(0, 0, 0).taps, 16000),
              1e-9);
}

TEST(Roomsim, DirectPathDelaysMatchGeometry) {
  for (double t60 : {0.0, 0.256}) {
    const Scene sc = default_scene(2, t60);
    const RirSet rirs = simulate_rirs(sc);
    for (int s = 0; s < sc.num_sources(); ++s)
      for (int a = 0; a < 2; ++a) {
        const auto mics = sc.arrays[static_cast<size_t>(a)].mic_positions();
        for (int m = 0; m < 3; ++m) {
          const double r = distance(sc.sources[static_cast<size_t>(s)].position, mics[static_cast<size_t>(m)]);
          const auto& taps = rirs.at(s, a, m).taps;
          // first tap above half the direct-path peak amplitude
          const double amp = 1.0 / std::sqrt(r);
          size_t first = 0;
          while (first < taps.size() && std::abs(taps[first]) < 0.5 * amp) ++first;
          EXPECT_NEAR(static_cast<double>(first), r / 343.0 * 16000.0, 1.0);
        }
      }
  }
}

TEST(Roomsim, Deterministic) {
  const Scene sc = default_scene(2, 0.256);
  const RirSet a = simulate_rirs(sc), b = simulate_rirs(sc);
  EXPECT_EQ(a.at(1, 1, 2).taps, b.at(1, 1, 2).taps);
}

TEST(Render, ImpulseGivesRirSpectrogram) {
  Scene sc = default_scene(2, 0.0);
  sc.sources.resize(1);
  const RirSet rirs = simulate_rirs(sc);
  std::vector<double> d(4000, 0.0);
  d[0] = 1.0;
  StftConfig cfg;
  const Rendered out = render_observations(sc, rirs, {Waveform{d, 16000}}, cfg);
  for (int a = 0; a < 2; ++a)
    for (int m = 0; m < 3; ++m) {
      auto taps = rirs.at(0, a, m).taps;
      taps.resize(4000, 0.0);
      const auto S = stft(Waveform{taps, 16000}, cfg);
      EXPECT_LT((S.values - out.observations.X[static_cast<size_t>(a)][static_cast<size_t>(m)].values).norm(),
                1e-12 * S.values.norm());
    }
}

TEST(Render, SuperpositionAndShape) {
  const Scene sc = default_scene(2, 0.256);
  const RirSet rirs = simulate_rirs(sc);
  StftConfig cfg;
  std::vector<Waveform> dry;
  for (unsigned s = 0; s < 3; ++s) dry.push_back({oracle::random_signal(8000, 20 + s), 16000});
  const Rendered joint = render_observations(sc, rirs, dry, cfg);
  EXPECT_EQ(joint.observations.num_arrays(), 2);
  EXPECT_EQ(joint.observations.num_mics(0), 3);
  EXPECT_EQ(joint.observations.bins(), 257);
  EXPECT_EQ(joint.observations.frames(), cfg.num_frames(8000));
  ASSERT_EQ(joint.references.size(), 2u);

  std::vector<std::vector<double>> sum(3, std::vector<double>(8000, 0.0));
  for (int s = 0; s < 3; ++s) {
    std::vector<Waveform> one;
    for (int q = 0; q < 3; ++q)
      one.push_back(q == s ? dry[static_cast<size_t>(q)] : Waveform{std::vector<double>(8000, 0.0), 16000});
    const Rendered part = render_observations(sc, rirs, one, cfg);
    for (int m = 0; m < 3; ++m)
      for (size_t t = 0; t < 8000; ++t) sum[static_cast<size_t>(m)][t] += part.mic_signals[1][static_cast<size_t>(m)].samples[t];
  }
  for (int m = 0; m < 3; ++m) {
    double num = 0.0, den = 0.0;
    for (size_t t = 0; t < 8000; ++t) {
      const double x = joint.mic_signals[1][static_cast<size_t>(m)].samples[t];
      num += (x - sum[static_cast<size_t>(m)][t]) * (x - sum[static_cast<size_t>(m)][t]);
      den += x * x;
    }
    EXPECT_LT(std::sqrt(num / den), 1e-12);
  }
  // reference = target through the (a, mic 0) RIR
  const auto ref = oracle::convolve(dry[0].samples, rirs.at(0, 1, 0).taps);
  for (size_t t = 0; t < 8000; t += 97) EXPECT_NEAR(joint.references[1].samples[t], ref[t], 1e-10);
}

TEST(Render, Errors) {
  const Scene sc = default_scene(2, 0.0);
  StftConfig cfg;
  const Waveform w{std::vector<double>(100, 1.0), 16000};
  EXPECT_THROW(render_observations(sc, {w, w}, cfg), Error);
  EXPECT_THROW(render_observations(sc, {w, w, Waveform{std::vector<double>(50, 1.0), 16000}}, cfg), Error);
}

TEST(RirIo, RoundtripBitIdentical) {
  const Scene sc = default_scene(2, 0.256);
  const RirSet rirs = simulate_rirs(sc);
  const auto dir = temp_dir("spot_rirs");
  save_rirs(dir, rirs);
  const RirSet back = load_rirs(dir);
  ASSERT_EQ(back.num_sources(), 3);
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 2; ++a)
      for (int m = 0; m < 3; ++m) EXPECT_EQ(back.at(s, a, m).taps, rirs.at(s, a, m).taps);
}

TEST(RirIo, ManifestCountAndErrors) {
  const auto dir = temp_dir("spot_rir_manifest");
  Waveform w{{1.0, 0.5, 0.25}, 16000};
  std::string entries;
  for (int a = 0; a < 2; ++a)
    for (int m = 0; m < 3; ++m) {
      const std::string name = "h" + std::to_string(a) + std::to_string(m) + ".wav";
      write_wav(dir / name, w, WavFormat::kFloat32);
      if (!entries.empty()) entries += ",";
      entries += R"({"source": 0, "array": )" + std::to_string(a) + R"(, "mic": )" + std::to_string(m) +
                 R"(, "path": ")" + name + "\"}";
    }
  std::ofstream(dir / "manifest.json") << R"({"num_sources": 1, "mics_per_array": [3, 3], "entries": [)" << entries
                                       << "]}";
  const RirSet set = load_rirs(dir);
  int count = 0;
  for (int a = 0; a < set.num_arrays(); ++a) count += set.num_mics(a);
  EXPECT_EQ(count * set.num_sources(), 6);

  // missing triple
  std::ofstream(dir / "short.json") << R"({"num_sources": 1, "mics_per_array": [1, 1], "entries": [)"
                                    << R"({"source": 0, "array": 0, "mic": 0, "path": "h00.wav"}]})";
  try {
    load_rirs(dir / "short.json");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("source 0, array 1, mic 0"), std::string::npos) << e.what();
  }

  // rate mismatch
  write_wav(dir / "h8k.wav", Waveform{{1.0}, 8000});
  std::ofstream(dir / "mixed.json") << R"({"num_sources": 1, "mics_per_array": [1, 1], "entries": [)"
                                    << R"({"source": 0, "array": 0, "mic": 0, "path": "h00.wav"},)"
                                    << R"({"source": 0, "array": 1, "mic": 0, "path": "h8k.wav"}]})";
  EXPECT_THROW(load_rirs(dir / "mixed.json"), Error);
}
