// roomsim.hpp
// Two-dimensional image-source room simulation and multi-array rendering.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "spot/signal.hpp"

namespace spot {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(Point a, Point b);

enum class SourceRole { kTarget, kInterferer };

struct SourcePlacement {
  Point position;
  SourceRole role = SourceRole::kInterferer;
};

// Uniform linear array. Mic m sits at
//   center + (m - (M-1)/2) * spacing * (cos orientation, sin orientation),
// so mic 0 is the reference mic.
struct MicArray {
  Point center;
  int mic_count = 3;
  double spacing = 0.0283;
  double orientation = 0.0;     // radians, direction of the mic line
  double look_direction = 0.0;  // radians, toward the target spot

  std::vector<Point> mic_positions() const;
};

struct Scene {
  double width = 6.0;  // x extent, meters
  double depth = 6.0;  // y extent, meters
  std::vector<MicArray> arrays;
  std::vector<SourcePlacement> sources;
  double t60 = 0.0;  // seconds, 0 = anechoic
  int sample_rate = 16000;
  double sound_speed = 343.0;

  int num_arrays() const { return static_cast<int>(arrays.size()); }
  int num_sources() const { return static_cast<int>(sources.size()); }
  int target_index() const;
  // Positions inside the room, one target, at least two arrays, M >= 2.
  void validate() const;
};

// 6 m x 6 m room, target at the center, arrays 2.5 m from the target facing
// it (A = 2: from below and from the left; A = 3: 120 degrees apart), one
// interferer per array 1.5 m behind the target along that array's look
// direction. Mic lines are broadside to the look direction.
Scene default_scene(int num_arrays, double t60, int mic_count = 3);

Scene parse_scene(std::string_view json_text);
Scene load_scene(const std::filesystem::path& path);
std::string scene_to_json(const Scene& scene);

struct Rir {
  std::vector<double> taps;
  int sample_rate = 16000;
};

// RIRs indexed (source, array, mic).
class RirSet {
 public:
  RirSet() = default;
  RirSet(int num_sources, std::vector<int> mics_per_array, int sample_rate);

  int num_sources() const { return num_sources_; }
  int num_arrays() const { return static_cast<int>(mics_per_array_.size()); }
  int num_mics(int array) const { return mics_per_array_.at(static_cast<size_t>(array)); }
  const std::vector<int>& mics_per_array() const { return mics_per_array_; }
  int sample_rate() const { return sample_rate_; }

  Rir& at(int source, int array, int mic);
  const Rir& at(int source, int array, int mic) const;

 private:
  size_t index(int source, int array, int mic) const;

  int num_sources_ = 0;
  std::vector<int> mics_per_array_;
  std::vector<size_t> array_offset_;
  int sample_rate_ = 16000;
  std::vector<Rir> rirs_;
};

struct ReflectionModel {
  double reflection = 0.0;  // uniform pressure reflection coefficient
  int max_order = 0;        // total wall reflections per image
};

// Image order cap: ceil(c * t60 / min(side)) + 3, 0 when anechoic.
int image_order_cap(const Scene& scene);

// Single RIR from `source` to `mic` using the given reflection model.
Rir image_source_rir(const Scene& scene, Point source, Point mic, const ReflectionModel& model);

// Schroeder backward-integration T60 from a linear fit of the decay curve
// between -5 dB and -25 dB. Returns 0 if the curve never reaches -25 dB.
double schroeder_t60(const std::vector<double>& taps, int sample_rate);

// Bisection on the reflection coefficient so the Schroeder T60 of the
// target -> (array 0, mic 0) probe RIR matches scene.t60.
ReflectionModel calibrate_reflection(const Scene& scene);

RirSet simulate_rirs(const Scene& scene);

// Per-array multichannel STFTs, X[a][m].
struct ObservationTensor {
  std::vector<std::vector<ComplexSpectrogram>> X;

  int num_arrays() const { return static_cast<int>(X.size()); }
  int num_mics(int a) const { return static_cast<int>(X.at(static_cast<size_t>(a)).size()); }
  int bins() const { return X.front().front().bins(); }
  int frames() const { return X.front().front().frames(); }
};

struct Rendered {
  ObservationTensor observations;
  std::vector<std::vector<Waveform>> mic_signals;  // [a][m]
  // Target dry source through the target -> (array a, mic 0) RIR.
  std::vector<Waveform> references;
};

// `dry[s]` plays from scene source s. Every signal is truncated to the dry
// length (all dry sources must share it).
Rendered render_observations(const Scene& scene, const RirSet& rirs,
                             const std::vector<Waveform>& dry, const StftConfig& cfg);
Rendered render_observations(const Scene& scene, const std::vector<Waveform>& dry,
                             const StftConfig& cfg);

// Manifest (manifest.json) + one float64 WAV per (source, array, mic).
void save_rirs(const std::filesystem::path& dir, const RirSet& rirs);
// `path` is either the manifest file or the directory holding manifest.json.
RirSet load_rirs(const std::filesystem::path& path);

}  // namespace spot
