#pragma once

// RIFF/WAVE reading (PCM16, float32, WAVE_FORMAT_EXTENSIBLE wrappers of
// either) and writing (float32 default, PCM16 on request).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "bwe/errors.hpp"
#include "bwe/signal.hpp"

namespace bwe {

static_assert(std::endian::native == std::endian::little,
              "WAV byte handling assumes a little-endian host");

enum class WavEncoding { float32, pcm16 };

namespace wav_detail {

inline constexpr std::uint16_t kFormatPcm = 0x0001;
inline constexpr std::uint16_t kFormatFloat = 0x0003;
inline constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T load(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void store(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.insert(out.end(), b, b + sizeof(T));
}

inline void store_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

struct Format {
  std::uint16_t tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

}  // namespace wav_detail

/// Decodes an in-memory WAV image. Multi-channel data keeps channel 0.
inline Signal decode_wav(std::span<const std::uint8_t> bytes, const std::string& name = "<memory>") {
  using namespace wav_detail;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(name + ": not a RIFF/WAVE file");
  }

  Format fmt;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const auto size = load<std::uint32_t>(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      throw FormatError(name + ": chunk '" + std::string(reinterpret_cast<const char*>(chunk), 4) +
                        "' runs past end of file");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError(name + ": fmt chunk too short");
      const std::uint8_t* f = bytes.data() + body;
      fmt.tag = load<std::uint16_t>(f);
      fmt.channels = load<std::uint16_t>(f + 2);
      fmt.rate = load<std::uint32_t>(f + 4);
      fmt.block_align = load<std::uint16_t>(f + 12);
      fmt.bits = load<std::uint16_t>(f + 14);
      if (fmt.tag == kFormatExtensible) {
        if (size < 40) throw FormatError(name + ": extensible fmt chunk too short");
        // First two bytes of the SubFormat GUID carry the actual format tag.
        fmt.tag = load<std::uint16_t>(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1u);
  }

  if (!have_fmt) throw FormatError(name + ": missing fmt chunk");
  if (data == nullptr) throw FormatError(name + ": missing data chunk");
  if (fmt.channels == 0 || fmt.rate == 0) throw FormatError(name + ": zero channels or sample rate");

  const bool pcm16 = fmt.tag == kFormatPcm && fmt.bits == 16;
  const bool f32 = fmt.tag == kFormatFloat && fmt.bits == 32;
  if (!pcm16 && !f32) {
    throw UnsupportedError(name + ": unsupported encoding (format tag " + std::to_string(fmt.tag) +
                           ", " + std::to_string(fmt.bits) + " bits)");
  }
  const std::size_t sample_bytes = fmt.bits / 8;
  const std::size_t frame_bytes = sample_bytes * fmt.channels;
  if (fmt.block_align != frame_bytes) throw FormatError(name + ": inconsistent block alignment");
  if (fmt.channels > 1) {
    std::cerr << "warning: " << name << ": " << fmt.channels
              << " channels, using channel 0 only\n";
  }

  Signal out;
  out.sample_rate = static_cast<int>(fmt.rate);
  const std::size_t frames = data_size / frame_bytes;
  out.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const std::uint8_t* p = data + i * frame_bytes;
    if (pcm16) {
      out.samples[i] = static_cast<double>(load<std::int16_t>(p)) / 32768.0;
    } else {
      out.samples[i] = static_cast<double>(load<float>(p));
    }
  }
  if (!all_finite(out.samples)) throw FormatError(name + ": non-finite sample values");
  return out;
}

inline std::vector<std::uint8_t> encode_wav(const Signal& signal,
                                            WavEncoding encoding = WavEncoding::float32) {
  using namespace wav_detail;
  require_valid(signal);
  const bool pcm16 = encoding == WavEncoding::pcm16;
  const std::uint16_t bits = pcm16 ? 16 : 32;
  const std::uint16_t block = bits / 8;
  const auto data_size = static_cast<std::uint32_t>(signal.size() * block);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size + 1);
  store_tag(out, "RIFF");
  store<std::uint32_t>(out, 36 + data_size + (data_size & 1u));
  store_tag(out, "WAVE");
  store_tag(out, "fmt ");
  store<std::uint32_t>(out, 16);
  store<std::uint16_t>(out, pcm16 ? kFormatPcm : kFormatFloat);
  store<std::uint16_t>(out, 1);
  store<std::uint32_t>(out, static_cast<std::uint32_t>(signal.sample_rate));
  store<std::uint32_t>(out, static_cast<std::uint32_t>(signal.sample_rate) * block);
  store<std::uint16_t>(out, block);
  store<std::uint16_t>(out, bits);
  store_tag(out, "data");
  store<std::uint32_t>(out, data_size);
  for (double s : signal.samples) {
    if (pcm16) {
      const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
      store<std::int16_t>(out, static_cast<std::int16_t>(q));
    } else {
      store<float>(out, static_cast<float>(s));
    }
  }
  if (data_size & 1u) out.push_back(0);
  return out;
}

inline Signal read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes, path.string());
}

inline void write_wav(const Signal& signal, const std::filesystem::path& path,
                      WavEncoding encoding = WavEncoding::float32) {
  const auto bytes = encode_wav(signal, encoding);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace bwe
