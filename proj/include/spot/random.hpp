// random.hpp

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace spot {

// Uniform draws on the open interval (0, 1).
class OpenUniform {
 public:
  explicit OpenUniform(uint64_t seed) : engine_(seed) {}

  double operator()() {
    double v;
    do v = dist_(engine_);
    while (v == 0.0);
    return v;
  }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> dist_{0.0, 1.0};
};

// splitmix64 finalizer.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-sensitive combination of seed components.
inline uint64_t hash_seed(std::initializer_list<uint64_t> parts) {
  uint64_t h = 0x243f6a8885a308d3ULL;
  for (uint64_t p : parts) h = mix64(h ^ mix64(p));
  return h;
}

}  // namespace spot
