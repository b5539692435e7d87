#pragma once

// Shared helpers for the test suites: synthetic speech-like signals, a naive
// DFT oracle and small numeric utilities.

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "bwe/random.hpp"
#include "bwe/signal.hpp"

namespace bwe::support {

inline std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc;
    for (std::size_t j = 0; j < n; ++j) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>((k * j) % n) / static_cast<double>(n);
      acc += x[j] * std::complex<double>(std::cos(a), std::sin(a));
    }
    out[k] = acc;
  }
  return out;
}

inline double l2(const std::vector<double>& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

/// ||a - b|| / ||a|| over [begin, end).
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, std::size_t begin = 0,
                             std::size_t end = static_cast<std::size_t>(-1)) {
  end = std::min({end, a.size(), b.size()});
  double num = 0.0, den = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += a[i] * a[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

inline Signal white_noise(std::size_t n, std::uint64_t seed, double scale = 0.1, int rate = kWidebandRate) {
  Rng rng(seed);
  Signal s;
  s.sample_rate = rate;
  s.samples.resize(n);
  for (auto& v : s.samples) v = scale * rng.normal();
  return s;
}

inline Signal sine(std::size_t n, double hz, double amplitude = 0.5, int rate = kWidebandRate, double phase = 0.0) {
  Signal s;
  s.sample_rate = rate;
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.samples[i] = amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate + phase);
  }
  return s;
}

/// Voiced speech-like test signal at 48 kHz: a gliding harmonic source with
/// four formants, spectral tilt, a random high-band "brightness" that is
/// partly independent of the low band, syllabic amplitude modulation, a small
/// noise floor and 20 ms fades.
inline Signal synthetic_speech(std::uint64_t seed, double seconds = 2.0) {
  Rng rng(seed);
  const int fs = kWidebandRate;
  const auto n = static_cast<std::size_t>(seconds * fs);
  const double vib_phase = rng.uniform(0.0, 6.0);
  const double f0_offset = rng.uniform(-20.0, 40.0);
  const double am_phase = rng.uniform(0.0, 6.0);
  const double tilt = rng.uniform(-9.0, -5.0);
  const double bright = rng.uniform(-10.0, 10.0);
  const double formants[4] = {rng.uniform(400, 800), rng.uniform(1000, 2000), rng.uniform(2200, 3000),
                              rng.uniform(3300, 4000)};

  std::vector<double> f0(n), phase(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    f0[i] = 130.0 + 30.0 * std::sin(2.0 * std::numbers::pi * 0.7 * t + vib_phase) + f0_offset;
    acc += 2.0 * std::numbers::pi * f0[i] / fs;
    phase[i] = acc;
  }

  // Harmonic amplitudes change slowly, so they are evaluated every 5 ms and
  // interpolated linearly in between.
  constexpr std::size_t block = 240;
  auto amplitude = [&](double f) {
    if (f >= 23500.0) return 0.0;
    double e = tilt * std::log2(std::max(f, 100.0) / 100.0);
    for (double fm : formants) e += 12.0 * std::exp(-0.5 * ((f - fm) / 150.0) * ((f - fm) / 150.0));
    if (f > 4000.0) e += bright * std::min((f - 4000.0) / 4000.0, 1.0);
    return std::pow(10.0, e / 20.0);
  };
  Signal s;
  s.samples.assign(n, 0.0);
  for (std::size_t b0 = 0; b0 < n; b0 += block) {
    const std::size_t b1 = std::min(n, b0 + block);
    const double fa = f0[b0], fb = f0[std::min(b1, n - 1)];
    for (int h = 1; h * std::min(fa, fb) < 23500.0; ++h) {
      const double a0 = amplitude(h * fa), a1 = amplitude(h * fb);
      for (std::size_t i = b0; i < b1; ++i) {
        const double u = static_cast<double>(i - b0) / block;
        s.samples[i] += (a0 + (a1 - a0) * u) * std::sin(h * phase[i]);
      }
    }
  }
  double peak = 0.0;
  for (double v : s.samples) peak = std::max(peak, std::abs(v));
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double am = 0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * 4.0 * t + am_phase);
    const double fade = std::min(1.0, std::min(t, static_cast<double>(n - 1 - i) / fs) / 0.02);
    s.samples[i] = (s.samples[i] / peak * 0.3 * am + 1e-3 * rng.normal()) * fade;
  }
  return s;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("bwe_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string utterance_name(std::size_t i) {
  std::string s = std::to_string(i);
  return "utt" + std::string(3 - std::min<std::size_t>(3, s.size()), '0') + s;
}

}  // namespace bwe::support
