// roomsim.cpp

#include "spot/roomsim.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "spot/common.hpp"
#include "spot/fft.hpp"
#include "spot/wav.hpp"

namespace spot {

using nlohmann::json;

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::vector<Point> MicArray::mic_positions() const {
  std::vector<Point> pos;
  pos.reserve(static_cast<size_t>(mic_count));
  const double ux = std::cos(orientation), uy = std::sin(orientation);
  for (int m = 0; m < mic_count; ++m) {
    const double off = (m - 0.5 * (mic_count - 1)) * spacing;
    pos.push_back({center.x + off * ux, center.y + off * uy});
  }
  return pos;
}

int Scene::target_index() const {
  for (int s = 0; s < num_sources(); ++s)
    if (sources[static_cast<size_t>(s)].role == SourceRole::kTarget) return s;
  throw Error("scene: no target source");
}

void Scene::validate() const {
  if (!(width > 0.0) || !(depth > 0.0)) throw Error("scene: room dimensions must be positive");
  if (t60 < 0.0) throw Error("scene: t60 must be >= 0");
  if (sample_rate <= 0) throw Error("scene: sample rate must be positive");
  if (!(sound_speed > 0.0)) throw Error("scene: sound speed must be positive");
  if (arrays.size() < 2) throw Error("scene: at least two microphone arrays are required");
  auto inside = [&](Point p) { return p.x > 0.0 && p.x < width && p.y > 0.0 && p.y < depth; };
  int targets = 0;
  for (const auto& s : sources) {
    if (!inside(s.position)) throw Error("scene: source outside the room");
    targets += s.role == SourceRole::kTarget;
  }
  if (targets != 1) throw Error("scene: exactly one target source is required");
  for (const auto& a : arrays) {
    if (a.mic_count < 2) throw Error("scene: arrays need at least two microphones");
    if (!(a.spacing > 0.0)) throw Error("scene: microphone spacing must be positive");
    for (const auto& p : a.mic_positions())
      if (!inside(p)) throw Error("scene: microphone outside the room");
  }
}

Scene default_scene(int num_arrays, double t60, int mic_count) {
  if (num_arrays < 2) throw Error("default scene: need at least two arrays");
  Scene scene;
  scene.t60 = t60;
  const Point target{3.0, 3.0};
  constexpr double kArrayRadius = 2.5, kInterfererBehind = 1.5;
  const double pi = std::numbers::pi;

  // Angle of each array as seen from the target.
  std::vector<double> angles;
  if (num_arrays == 2) {
    angles = {1.5 * pi, pi};
  } else {
    for (int a = 0; a < num_arrays; ++a) angles.push_back(1.5 * pi + 2.0 * pi * a / num_arrays);
  }

  scene.sources.push_back({target, SourceRole::kTarget});
  for (double phi : angles) {
    MicArray arr;
    arr.center = {target.x + kArrayRadius * std::cos(phi), target.y + kArrayRadius * std::sin(phi)};
    arr.mic_count = mic_count;
    arr.look_direction = phi + pi;
    arr.orientation = arr.look_direction + 0.5 * pi;
    scene.arrays.push_back(arr);
    const Point behind{target.x + kInterfererBehind * std::cos(arr.look_direction),
                       target.y + kInterfererBehind * std::sin(arr.look_direction)};
    scene.sources.push_back({behind, SourceRole::kInterferer});
  }
  scene.validate();
  return scene;
}

namespace {

Point point_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw Error("scene: positions are [x, y] pairs");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

Scene parse_scene(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("scene: invalid JSON: ") + e.what());
  }
  try {
    if (j.contains("preset")) {
      if (j["preset"].get<std::string>() != "default") throw Error("scene: unknown preset");
      Scene s = default_scene(j.value("num_arrays", 2), j.value("t60", 0.0), j.value("mic_count", 3));
      s.sample_rate = j.value("sample_rate", s.sample_rate);
      s.sound_speed = j.value("sound_speed", s.sound_speed);
      s.validate();
      return s;
    }
    Scene s;
    s.width = j.at("room").at("width").get<double>();
    s.depth = j.at("room").at("depth").get<double>();
    s.t60 = j.value("t60", 0.0);
    s.sample_rate = j.value("sample_rate", 16000);
    s.sound_speed = j.value("sound_speed", 343.0);
    for (const auto& ja : j.at("arrays")) {
      MicArray a;
      a.center = point_from(ja.at("center"));
      a.mic_count = ja.value("mic_count", 3);
      a.spacing = ja.value("spacing", 0.0283);
      a.look_direction = ja.at("look_direction").get<double>();
      a.orientation = ja.value("orientation", a.look_direction + 0.5 * std::numbers::pi);
      s.arrays.push_back(a);
    }
    for (const auto& js : j.at("sources")) {
      const auto role = js.at("role").get<std::string>();
      if (role != "target" && role != "interferer") throw Error("scene: unknown source role " + role);
      s.sources.push_back({point_from(js.at("position")),
                           role == "target" ? SourceRole::kTarget : SourceRole::kInterferer});
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw Error(std::string("scene: ") + e.what());
  }
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("scene: cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_scene(ss.str());
}

std::string scene_to_json(const Scene& scene) {
  json j;
  j["room"] = {{"width", scene.width}, {"depth", scene.depth}};
  j["t60"] = scene.t60;
  j["sample_rate"] = scene.sample_rate;
  j["sound_speed"] = scene.sound_speed;
  j["arrays"] = json::array();
  for (const auto& a : scene.arrays)
    j["arrays"].push_back({{"center", {a.center.x, a.center.y}},
                           {"mic_count", a.mic_count},
                           {"spacing", a.spacing},
                           {"orientation", a.orientation},
                           {"look_direction", a.look_direction}});
  j["sources"] = json::array();
  for (const auto& s : scene.sources)
    j["sources"].push_back({{"position", {s.position.x, s.position.y}},
                            {"role", s.role == SourceRole::kTarget ? "target" : "interferer"}});
  return j.dump(2);
}

RirSet::RirSet(int num_sources, std::vector<int> mics_per_array, int sample_rate)
    : num_sources_(num_sources), mics_per_array_(std::move(mics_per_array)), sample_rate_(sample_rate) {
  size_t total = 0;
  for (int m : mics_per_array_) {
    array_offset_.push_back(total);
    total += static_cast<size_t>(m);
  }
  rirs_.resize(static_cast<size_t>(num_sources_) * total);
  for (auto& r : rirs_) r.sample_rate = sample_rate_;
}

size_t RirSet::index(int source, int array, int mic) const {
  if (source < 0 || source >= num_sources_ || array < 0 || array >= num_arrays() || mic < 0 ||
      mic >= num_mics(array))
    throw Error("rir index out of range");
  const size_t per_source = rirs_.size() / static_cast<size_t>(num_sources_);
  return static_cast<size_t>(source) * per_source + array_offset_[static_cast<size_t>(array)] +
         static_cast<size_t>(mic);
}

Rir& RirSet::at(int source, int array, int mic) { return rirs_[index(source, array, mic)]; }
const Rir& RirSet::at(int source, int array, int mic) const {
  return rirs_[index(source, array, mic)];
}

namespace {

constexpr int kFracDelayHalf = 40;  // 81-tap kernel

// Unit-energy Hann-windowed sinc centred on `delay` (samples), added into
// `taps` with the given gain. Taps before time 0 are dropped.
void add_fractional_impulse(std::vector<double>& taps, double delay, double gain) {
  const long centre = std::lround(delay);
  double k[2 * kFracDelayHalf + 1];
  double e = 0.0;
  for (int q = -kFracDelayHalf; q <= kFracDelayHalf; ++q) {
    const double t = static_cast<double>(centre + q) - delay;
    const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * t / (kFracDelayHalf + 1)));
    const double s = std::abs(t) < 1e-12 ? 1.0 : std::sin(std::numbers::pi * t) / (std::numbers::pi * t);
    k[q + kFracDelayHalf] = s * w;
    e += s * s * w * w;
  }
  const double norm = gain / std::sqrt(e);
  for (int q = -kFracDelayHalf; q <= kFracDelayHalf; ++q) {
    const long n = centre + q;
    if (n < 0) continue;
    if (static_cast<size_t>(n) >= taps.size()) taps.resize(static_cast<size_t>(n) + 1, 0.0);
    taps[static_cast<size_t>(n)] += norm * k[q + kFracDelayHalf];
  }
}

}  // namespace

int image_order_cap(const Scene& scene) {
  if (scene.t60 <= 0.0) return 0;
  return static_cast<int>(std::ceil(scene.sound_speed * scene.t60 / std::min(scene.width, scene.depth))) + 3;
}

Rir image_source_rir(const Scene& scene, Point source, Point mic, const ReflectionModel& model) {
  if (distance(source, mic) < 1e-9) throw Error("degenerate geometry");
  const double fs = scene.sample_rate, c = scene.sound_speed;
  Rir rir;
  rir.sample_rate = scene.sample_rate;
  const int order = model.max_order;
  for (int lx = -order; lx <= order; ++lx) {
    for (int qx = 0; qx <= 1; ++qx) {
      const int nx = std::abs(2 * lx - qx);
      if (nx > order) continue;
      const double x = (1 - 2 * qx) * source.x + 2.0 * lx * scene.width;
      for (int ly = -order; ly <= order; ++ly) {
        for (int qy = 0; qy <= 1; ++qy) {
          const int ny = std::abs(2 * ly - qy);
          if (nx + ny > order) continue;
          const double y = (1 - 2 * qy) * source.y + 2.0 * ly * scene.depth;
          const double r = std::hypot(x - mic.x, y - mic.y);
          const double gain = std::pow(model.reflection, nx + ny) / std::sqrt(r);
          if (gain == 0.0) continue;
          add_fractional_impulse(rir.taps, r / c * fs, gain);
        }
      }
    }
  }
  return rir;
}

double schroeder_t60(const std::vector<double>& taps, int sample_rate) {
  const size_t n = taps.size();
  if (n == 0) return 0.0;
  std::vector<double> edc(n);
  double acc = 0.0;
  for (size_t t = n; t-- > 0;) {
    acc += taps[t] * taps[t];
    edc[t] = acc;
  }
  if (!(acc > 0.0)) return 0.0;
  // Least-squares line through the decay curve between -5 and -25 dB.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  size_t count = 0;
  bool reached = false;
  for (size_t t = 0; t < n; ++t) {
    const double db = 10.0 * std::log10(edc[t] / acc);
    if (db <= -25.0) {
      reached = true;
      break;
    }
    if (db > -5.0) continue;
    const double x = static_cast<double>(t) / sample_rate;
    sx += x, sy += db, sxx += x * x, sxy += x * db;
    ++count;
  }
  if (!reached || count < 2) return 0.0;
  const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  if (!(slope < 0.0)) return 0.0;
  return -60.0 / slope;
}

ReflectionModel calibrate_reflection(const Scene& scene) {
  ReflectionModel model;
  if (scene.t60 <= 0.0) return model;
  model.max_order = image_order_cap(scene);
  const Point probe_src = scene.sources.at(static_cast<size_t>(scene.target_index())).position;
  const Point probe_mic = scene.arrays.front().mic_positions().front();
  auto t60_of = [&](double rho) {
    ReflectionModel m{rho, model.max_order};
    return schroeder_t60(image_source_rir(scene, probe_src, probe_mic, m).taps, scene.sample_rate);
  };
  double lo = 0.0, hi = 0.9999;
  double best = hi, best_err = std::abs(t60_of(hi) - scene.t60);
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double t = t60_of(mid);
    const double err = std::abs(t - scene.t60);
    if (err < best_err) best = mid, best_err = err;
    if (err < 1e-3 * scene.t60) break;
    (t < scene.t60 ? lo : hi) = mid;
  }
  model.reflection = best;
  if (best_err > 0.05 * scene.t60)
    spdlog::warn("room calibration: T60 {:.3f} s not reached within 5% (error {:.3f} s)", scene.t60,
                 best_err);
  return model;
}

RirSet simulate_rirs(const Scene& scene) {
  scene.validate();
  const ReflectionModel model = calibrate_reflection(scene);
  std::vector<int> mics;
  for (const auto& a : scene.arrays) mics.push_back(a.mic_count);
  RirSet set(scene.num_sources(), mics, scene.sample_rate);
  for (int s = 0; s < scene.num_sources(); ++s) {
    const Point src = scene.sources[static_cast<size_t>(s)].position;
    for (int a = 0; a < scene.num_arrays(); ++a) {
      const auto pos = scene.arrays[static_cast<size_t>(a)].mic_positions();
      for (int m = 0; m < static_cast<int>(pos.size()); ++m)
        set.at(s, a, m) = image_source_rir(scene, src, pos[static_cast<size_t>(m)], model);
    }
  }
  return set;
}

namespace {

Waveform convolve_truncated(const Waveform& dry, const Rir& rir, size_t length) {
  Waveform out;
  out.sample_rate = dry.sample_rate;
  out.samples = fft::convolve(dry.samples, rir.taps);
  out.samples.resize(length, 0.0);
  return out;
}

}  // namespace

Rendered render_observations(const Scene& scene, const RirSet& rirs,
                             const std::vector<Waveform>& dry, const StftConfig& cfg) {
  scene.validate();
  if (static_cast<int>(dry.size()) != scene.num_sources())
    throw Error("render: got " + std::to_string(dry.size()) + " dry sources for " +
                std::to_string(scene.num_sources()) + " scene sources");
  if (rirs.num_sources() != scene.num_sources() || rirs.num_arrays() != scene.num_arrays())
    throw Error("render: RIR set does not match the scene");
  if (dry.empty() || dry.front().empty()) throw Error("render: empty dry source");
  const size_t length = dry.front().size();
  for (const auto& d : dry) {
    if (d.size() != length) throw Error("render: dry sources must share one length");
    if (d.sample_rate != rirs.sample_rate() || d.sample_rate != cfg.sample_rate)
      throw Error("render: sample rate mismatch between dry sources, RIRs and STFT config");
  }

  Rendered out;
  const int A = scene.num_arrays();
  out.mic_signals.resize(static_cast<size_t>(A));
  out.observations.X.resize(static_cast<size_t>(A));
  for (int a = 0; a < A; ++a) {
    const int M = rirs.num_mics(a);
    auto& mics = out.mic_signals[static_cast<size_t>(a)];
    mics.assign(static_cast<size_t>(M), Waveform{std::vector<double>(length, 0.0), cfg.sample_rate});
    for (int s = 0; s < scene.num_sources(); ++s) {
      for (int m = 0; m < M; ++m) {
        const auto img = convolve_truncated(dry[static_cast<size_t>(s)], rirs.at(s, a, m), length);
        auto& acc = mics[static_cast<size_t>(m)].samples;
        for (size_t t = 0; t < length; ++t) acc[t] += img.samples[t];
      }
    }
    for (int m = 0; m < M; ++m)
      out.observations.X[static_cast<size_t>(a)].push_back(stft(mics[static_cast<size_t>(m)], cfg));
  }
  const int target = scene.target_index();
  for (int a = 0; a < A; ++a)
    out.references.push_back(convolve_truncated(dry[static_cast<size_t>(target)], rirs.at(target, a, 0), length));
  return out;
}

Rendered render_observations(const Scene& scene, const std::vector<Waveform>& dry,
                             const StftConfig& cfg) {
  return render_observations(scene, simulate_rirs(scene), dry, cfg);
}

void save_rirs(const std::filesystem::path& dir, const RirSet& rirs) {
  std::filesystem::create_directories(dir);
  json j;
  j["sample_rate"] = rirs.sample_rate();
  j["num_sources"] = rirs.num_sources();
  j["mics_per_array"] = rirs.mics_per_array();
  j["entries"] = json::array();
  for (int s = 0; s < rirs.num_sources(); ++s)
    for (int a = 0; a < rirs.num_arrays(); ++a)
      for (int m = 0; m < rirs.num_mics(a); ++m) {
        const std::string name =
            "rir_s" + std::to_string(s) + "_a" + std::to_string(a) + "_m" + std::to_string(m) + ".wav";
        const auto& r = rirs.at(s, a, m);
        write_wav(dir / name, Waveform{r.taps, r.sample_rate}, WavFormat::kFloat64);
        j["entries"].push_back({{"source", s}, {"array", a}, {"mic", m}, {"path", name}});
      }
  std::ofstream os(dir / "manifest.json");
  os << j.dump(2) << '\n';
  if (!os) throw Error("rir manifest: write failed in " + dir.string());
}

RirSet load_rirs(const std::filesystem::path& path) {
  const auto manifest = std::filesystem::is_directory(path) ? path / "manifest.json" : path;
  std::ifstream is(manifest);
  if (!is) throw Error("rir manifest: cannot open " + manifest.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw Error(std::string("rir manifest: invalid JSON: ") + e.what());
  }
  const auto base = manifest.parent_path();
  try {
    const int num_sources = j.at("num_sources").get<int>();
    const auto mics = j.at("mics_per_array").get<std::vector<int>>();
    int rate = j.value("sample_rate", 0);
    std::map<std::tuple<int, int, int>, std::string> paths;
    for (const auto& e : j.at("entries"))
      paths[{e.at("source").get<int>(), e.at("array").get<int>(), e.at("mic").get<int>()}] =
          e.at("path").get<std::string>();

    RirSet set;
    bool first = true;
    for (int s = 0; s < num_sources; ++s)
      for (int a = 0; a < static_cast<int>(mics.size()); ++a)
        for (int m = 0; m < mics[static_cast<size_t>(a)]; ++m) {
          auto it = paths.find({s, a, m});
          if (it == paths.end())
            throw Error("rir manifest: missing entry for (source " + std::to_string(s) + ", array " +
                        std::to_string(a) + ", mic " + std::to_string(m) + ")");
          const std::filesystem::path p = it->second;
          const Waveform w = read_wav(p.is_absolute() ? p : base / p);
          if (first) {
            if (rate == 0) rate = w.sample_rate;
            set = RirSet(num_sources, mics, rate);
            first = false;
          }
          if (w.sample_rate != rate)
            throw Error("rir manifest: sample rate mismatch in " + it->second + " (" +
                        std::to_string(w.sample_rate) + " vs " + std::to_string(rate) + ")");
          set.at(s, a, m) = Rir{w.samples, w.sample_rate};
        }
    return set;
  } catch (const json::exception& e) {
    throw Error(std::string("rir manifest: ") + e.what());
  }
}

}  // namespace spot
