// wav.hpp
// Mono RIFF/WAVE reader and writer. Reads PCM16, float32 and float64;
// multichannel files are rejected.

#pragma once

#include <filesystem>

#include "spot/signal.hpp"

namespace spot {

enum class WavFormat { kPcm16, kFloat32, kFloat64 };

Waveform read_wav(const std::filesystem::path& path);

void write_wav(const std::filesystem::path& path, const Waveform& x,
               WavFormat format = WavFormat::kFloat32);

}  // namespace spot
