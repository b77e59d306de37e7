// synth.hpp
// Deterministic test sources: speech-like babble and gated harmonic tones.

#pragma once

#include <cstdint>

#include "spot/signal.hpp"

namespace spot {

// Formant-shaped harmonic "syllables" (random pitch contour, formants and
// durations) alternating with short unvoiced bursts and pauses. Each seed
// gives a different talker. Peak-normalized to 0.5.
Waveform speech_like(double seconds, int sample_rate, uint64_t seed);

// Harmonic tone with fundamental f0 (harmonics up to the Nyquist or
// `harmonics`, whichever is lower), switched on and off in blocks of
// `gate_seconds` following a random pattern seeded by `seed`
// (gate_seconds <= 0: always on).
Waveform harmonic_tone(double f0, int harmonics, double seconds, int sample_rate,
                       double gate_seconds = 0.0, uint64_t seed = 0);

}  // namespace spot
