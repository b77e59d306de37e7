// wav.cpp

#include "spot/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "spot/common.hpp"

namespace spot {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::vector<char>& buf, size_t off) {
  if (off + sizeof(T) > buf.size()) throw Error("wav: truncated header");
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  return v;
}

template <typename T>
void put_le(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("wav: cannot open " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw Error("wav: " + name + " is not a RIFF/WAVE file");

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  size_t data_off = 0, data_len = 0;
  size_t off = 12;
  while (off + 8 <= buf.size()) {
    const std::string id(buf.data() + off, 4);
    const auto len = static_cast<size_t>(read_le<uint32_t>(buf, off + 4));
    const size_t body = off + 8;
    if (id == "fmt ") {
      format = read_le<uint16_t>(buf, body);
      channels = read_le<uint16_t>(buf, body + 2);
      rate = read_le<uint32_t>(buf, body + 4);
      bits = read_le<uint16_t>(buf, body + 14);
      if (format == kFormatExtensible) format = read_le<uint16_t>(buf, body + 24);
      have_fmt = true;
    } else if (id == "data") {
      data_off = body;
      data_len = std::min(len, buf.size() - body);
      break;
    }
    off = body + len + (len & 1);
  }
  if (!have_fmt) throw Error("wav: " + name + " has no fmt chunk");
  if (data_off == 0) throw Error("wav: " + name + " has no data chunk");
  if (channels != 1)
    throw Error("wav: " + name + " has " + std::to_string(channels) + " channels, only mono is supported");
  if (rate == 0) throw Error("wav: " + name + " has a zero sample rate");

  Waveform x;
  x.sample_rate = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    const size_t n = data_len / 2;
    x.samples.resize(n);
    for (size_t t = 0; t < n; ++t)
      x.samples[t] = read_le<int16_t>(buf, data_off + 2 * t) / 32768.0;
  } else if (format == kFormatFloat && bits == 32) {
    const size_t n = data_len / 4;
    x.samples.resize(n);
    for (size_t t = 0; t < n; ++t) x.samples[t] = read_le<float>(buf, data_off + 4 * t);
  } else if (format == kFormatFloat && bits == 64) {
    const size_t n = data_len / 8;
    x.samples.resize(n);
    for (size_t t = 0; t < n; ++t) x.samples[t] = read_le<double>(buf, data_off + 8 * t);
  } else {
    throw Error("wav: " + name + " has unsupported encoding (format " + std::to_string(format) +
                ", " + std::to_string(bits) + " bits)");
  }
  x.validate();
  return x;
}

void write_wav(const std::filesystem::path& path, const Waveform& x, WavFormat format) {
  x.validate();
  uint16_t tag = kFormatFloat, bits = 32;
  if (format == WavFormat::kPcm16) tag = kFormatPcm, bits = 16;
  if (format == WavFormat::kFloat64) bits = 64;
  const uint32_t block = bits / 8;
  const auto data_len = static_cast<uint32_t>(x.size() * block);

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("wav: cannot write " + path.string());
  os.write("RIFF", 4);
  put_le<uint32_t>(os, 36 + data_len);
  os.write("WAVEfmt ", 8);
  put_le<uint32_t>(os, 16);
  put_le<uint16_t>(os, tag);
  put_le<uint16_t>(os, 1);
  put_le<uint32_t>(os, static_cast<uint32_t>(x.sample_rate));
  put_le<uint32_t>(os, static_cast<uint32_t>(x.sample_rate) * block);
  put_le<uint16_t>(os, static_cast<uint16_t>(block));
  put_le<uint16_t>(os, bits);
  os.write("data", 4);
  put_le<uint32_t>(os, data_len);
  for (double v : x.samples) {
    switch (format) {
      case WavFormat::kPcm16: {
        const double s = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
        put_le<int16_t>(os, static_cast<int16_t>(s));
        break;
      }
      case WavFormat::kFloat32:
        put_le<float>(os, static_cast<float>(v));
        break;
      case WavFormat::kFloat64:
        put_le<double>(os, v);
        break;
    }
  }
  if (!os) throw Error("wav: write failed for " + path.string());
}

}  // namespace spot
