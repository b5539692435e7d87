#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "bwe/errors.hpp"
#include "bwe/fft.hpp"
#include "bwe/signal.hpp"

namespace bwe {

/// STFT geometry. The defaults are the only configuration the pipeline uses:
/// 2048-point frames every 512 samples at 48 kHz (93.75 frames per second).
struct StftConfig {
  std::size_t fft_size = 2048;
  std::size_t hop = 512;
  int sample_rate = kWidebandRate;

  std::size_t bins() const { return fft_size / 2 + 1; }
  double frame_rate() const { return static_cast<double>(sample_rate) / static_cast<double>(hop); }
  double bin_hz() const { return static_cast<double>(sample_rate) / static_cast<double>(fft_size); }

  /// Center-aligned framing: frame t is centred on sample t * hop.
  std::size_t frame_count(std::size_t signal_length) const {
    if (signal_length == 0) return 0;
    return (signal_length + fft_size + hop - 1) / hop;
  }

  void validate() const {
    require(is_power_of_two(fft_size), "fft_size must be a power of two");
    require(hop > 0 && fft_size % hop == 0 && fft_size / hop == 4, "hop must give 75% overlap");
    require(sample_rate > 0, "sample rate must be positive");
  }

  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

/// Row-major frames x bins matrix.
template <typename T>
struct FrameMatrix {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<T> data;

  FrameMatrix() = default;
  FrameMatrix(std::size_t t, std::size_t b, T fill = T{}) : frames(t), bins(b), data(t * b, fill) {}

  T& operator()(std::size_t t, std::size_t b) { return data[t * bins + b]; }
  const T& operator()(std::size_t t, std::size_t b) const { return data[t * bins + b]; }
  T* row(std::size_t t) { return data.data() + t * bins; }
  const T* row(std::size_t t) const { return data.data() + t * bins; }

  friend bool operator==(const FrameMatrix&, const FrameMatrix&) = default;
};

struct ComplexSpectrogram {
  FrameMatrix<std::complex<double>> values;
  StftConfig config;
  std::size_t signal_length = 0;

  std::size_t frames() const { return values.frames; }
  std::size_t bins() const { return values.bins; }
};

struct MagnitudeSpectrogram {
  FrameMatrix<double> values;
  StftConfig config;

  std::size_t frames() const { return values.frames; }
  std::size_t bins() const { return values.bins; }
};

/// Periodic Hann, w[n] = w[N - n]: even about the frame centre and exactly
/// constant-overlap-add in w^2 at 75% overlap (sum = 1.5).
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

namespace stft_detail {

struct Kernel {
  StftConfig config;
  std::vector<double> window;
  FftPlan plan;

  explicit Kernel(const StftConfig& c) : config(c), window(hann_window(c.fft_size)), plan(c.fft_size) {}
};

inline const Kernel& kernel(const StftConfig& config) {
  static const Kernel canonical{StftConfig{}};
  if (config == canonical.config) return canonical;
  thread_local std::vector<std::unique_ptr<Kernel>> cache;
  for (const auto& k : cache) {
    if (k->config == config) return *k;
  }
  cache.push_back(std::make_unique<Kernel>(config));
  return *cache.back();
}

}  // namespace stft_detail

inline ComplexSpectrogram stft(const Signal& signal, const StftConfig& config = {}) {
  config.validate();
  require_rate(signal, config.sample_rate, "stft");
  const auto& k = stft_detail::kernel(config);
  const std::size_t n = config.fft_size;
  const std::size_t frames = config.frame_count(signal.size());
  const auto len = static_cast<std::ptrdiff_t>(signal.size());

  ComplexSpectrogram spec;
  spec.config = config;
  spec.signal_length = signal.size();
  spec.values = FrameMatrix<std::complex<double>>(frames, config.bins());
  std::vector<std::complex<double>> buf(n);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t * config.hop) - static_cast<std::ptrdiff_t>(n / 2);
    for (std::size_t i = 0; i < n; ++i) {
      const std::ptrdiff_t s = start + static_cast<std::ptrdiff_t>(i);
      const double v = (s >= 0 && s < len) ? signal.samples[static_cast<std::size_t>(s)] : 0.0;
      buf[i] = {v * k.window[i], 0.0};
    }
    k.plan.forward(buf);
    std::copy_n(buf.begin(), config.bins(), spec.values.row(t));
  }
  return spec;
}

/// Weighted overlap-add with the analysis window, divided by the accumulated
/// squared-window envelope.
inline Signal istft(const ComplexSpectrogram& spec) {
  const StftConfig& config = spec.config;
  config.validate();
  require(spec.bins() == config.bins(), "istft: frame width does not match fft_size");
  require(spec.frames() == config.frame_count(spec.signal_length),
          "istft: frame count inconsistent with signal length");
  const auto& k = stft_detail::kernel(config);
  const std::size_t n = config.fft_size;
  const auto len = static_cast<std::ptrdiff_t>(spec.signal_length);

  std::vector<double> acc(spec.signal_length, 0.0);
  std::vector<double> env(spec.signal_length, 0.0);
  std::vector<std::complex<double>> buf(n);
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    const auto* row = spec.values.row(t);
    for (std::size_t b = 0; b < config.bins(); ++b) buf[b] = row[b];
    buf[0] = {row[0].real(), 0.0};
    buf[n / 2] = {row[n / 2].real(), 0.0};
    for (std::size_t b = 1; b < n / 2; ++b) buf[n - b] = std::conj(row[b]);
    k.plan.inverse(buf);
    const auto start = static_cast<std::ptrdiff_t>(t * config.hop) - static_cast<std::ptrdiff_t>(n / 2);
    for (std::size_t i = 0; i < n; ++i) {
      const std::ptrdiff_t s = start + static_cast<std::ptrdiff_t>(i);
      if (s < 0 || s >= len) continue;
      acc[static_cast<std::size_t>(s)] += buf[i].real() * k.window[i];
      env[static_cast<std::size_t>(s)] += k.window[i] * k.window[i];
    }
  }

  Signal out;
  out.sample_rate = config.sample_rate;
  out.samples.resize(spec.signal_length);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.samples[i] = env[i] > 1e-12 ? acc[i] / env[i] : 0.0;
  }
  return out;
}

inline MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec) {
  MagnitudeSpectrogram mag;
  mag.config = spec.config;
  mag.values = FrameMatrix<double>(spec.frames(), spec.bins());
  for (std::size_t i = 0; i < spec.values.data.size(); ++i) mag.values.data[i] = std::abs(spec.values.data[i]);
  return mag;
}

namespace dump_detail {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& name) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError(name + ": truncated matrix dump");
  return v;
}

/// Shared layout of spectrogram and feature dumps: 8-byte magic, u32 rows,
/// u32 cols, f64 row-major values, little-endian.
inline void write_matrix(const std::filesystem::path& path, const char (&magic)[9],
                         const FrameMatrix<double>& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(magic, 8);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.frames));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.bins));
  out.write(reinterpret_cast<const char*>(m.data.data()), static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  if (!out) throw IoError("short write to " + path.string());
}

inline FrameMatrix<double> read_matrix(const std::filesystem::path& path, const char (&magic)[9]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char head[8];
  if (!in.read(head, 8) || std::string(head, 8) != std::string(magic, 8)) {
    throw FormatError(path.string() + ": bad magic, expected " + std::string(magic, 8));
  }
  const auto rows = get<std::uint32_t>(in, path.string());
  const auto cols = get<std::uint32_t>(in, path.string());
  FrameMatrix<double> m(rows, cols);
  if (!in.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(m.data.size() * sizeof(double)))) {
    throw FormatError(path.string() + ": truncated matrix dump");
  }
  return m;
}

}  // namespace dump_detail

inline constexpr char kSpectrogramMagic[9] = "BWESPEC1";

inline void write_spectrogram(const std::filesystem::path& path, const MagnitudeSpectrogram& mag) {
  dump_detail::write_matrix(path, kSpectrogramMagic, mag.values);
}

inline MagnitudeSpectrogram read_spectrogram(const std::filesystem::path& path, const StftConfig& config = {}) {
  MagnitudeSpectrogram mag;
  mag.config = config;
  mag.values = dump_detail::read_matrix(path, kSpectrogramMagic);
  return mag;
}

}  // namespace bwe
