#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <vector>

#include "bwe/errors.hpp"
#include "bwe/signal.hpp"

namespace bwe {

/// Kaiser window beta for a stopband attenuation in dB.
inline double kaiser_beta(double attenuation_db) {
  if (attenuation_db > 50.0) return 0.1102 * (attenuation_db - 8.7);
  if (attenuation_db >= 21.0) {
    return 0.5842 * std::pow(attenuation_db - 21.0, 0.4) + 0.07886 * (attenuation_db - 21.0);
  }
  return 0.0;
}

/// Linear-phase lowpass with odd length, stored centred: taps[half + n] = h(n).
struct LowpassFir {
  std::vector<double> taps;
  std::size_t half = 0;

  double at(std::ptrdiff_t n) const {
    const auto idx = n + static_cast<std::ptrdiff_t>(half);
    if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(taps.size())) return 0.0;
    return taps[static_cast<std::size_t>(idx)];
  }
};

/// Kaiser-windowed sinc lowpass at sample rate `rate` with the -6 dB point at
/// `cutoff_hz` and the given transition width. Unit DC gain up to ripple.
inline LowpassFir design_kaiser_lowpass(double rate, double cutoff_hz, double transition_hz,
                                        double attenuation_db) {
  require(cutoff_hz > 0 && cutoff_hz < rate / 2, "lowpass cutoff must lie in (0, Nyquist)");
  require(transition_hz > 0, "lowpass transition width must be positive");
  const double delta_omega = 2.0 * std::numbers::pi * transition_hz / rate;
  auto length = static_cast<std::size_t>(std::ceil((attenuation_db - 7.95) / (2.285 * delta_omega))) + 1;
  if (length % 2 == 0) ++length;

  LowpassFir fir;
  fir.half = length / 2;
  fir.taps.resize(length);
  const double beta = kaiser_beta(attenuation_db);
  const double norm = std::cyl_bessel_i(0.0, beta);
  const double fc = cutoff_hz / rate;
  const double half = static_cast<double>(fir.half);
  for (std::size_t i = 0; i < length; ++i) {
    const double n = static_cast<double>(i) - half;
    const double r = n / half;
    const double window = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / norm;
    const double x = 2.0 * fc * n;
    const double sinc = (n == 0.0) ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
    fir.taps[i] = 2.0 * fc * sinc * window;
  }
  return fir;
}

inline constexpr int kUpsampleFactor = 6;

/// The 8 kHz -> 48 kHz interpolation filter: cutoff 4 kHz, transition
/// 3.8-4.2 kHz, 90 dB design attenuation. Because the cutoff sits exactly at
/// the input Nyquist, h(6j) = 0 for j != 0 and the filter interpolates.
inline const LowpassFir& interpolation_filter() {
  static const LowpassFir fir = design_kaiser_lowpass(kWidebandRate, 4000.0, 400.0, 90.0);
  return fir;
}

/// Zero-stuffs by 6 and lowpass filters with group delay removed, so output
/// sample 6m coincides with input sample m.
inline Signal upsample_6x(const Signal& input) {
  require_rate(input, kNarrowbandRate, "upsample_6x");
  require_valid(input);
  const LowpassFir& h = interpolation_filter();
  const auto n_in = static_cast<std::ptrdiff_t>(input.size());
  const auto half = static_cast<std::ptrdiff_t>(h.half);
  constexpr std::ptrdiff_t L = kUpsampleFactor;

  Signal out;
  out.sample_rate = kWidebandRate;
  out.samples.assign(input.size() * kUpsampleFactor, 0.0);
  for (std::ptrdiff_t n = 0; n < n_in * L; ++n) {
    // y[n] = sum_m x[m] * L * h(n - L m), restricted to |n - L m| <= half.
    const std::ptrdiff_t m_lo = std::max<std::ptrdiff_t>(0, (n - half + L - 1) / L);
    const std::ptrdiff_t m_hi = std::min<std::ptrdiff_t>(n_in - 1, (n + half) / L);
    double acc = 0.0;
    for (std::ptrdiff_t m = m_lo; m <= m_hi; ++m) {
      acc += input.samples[static_cast<std::size_t>(m)] * h.at(n - L * m);
    }
    out.samples[static_cast<std::size_t>(n)] = acc * static_cast<double>(L);
  }
  return out;
}

/// Anti-alias lowpass (the interpolation filter at unit gain) then keep every
/// 6th sample. Output length ceil(N / 6).
inline Signal decimate_6x(const Signal& input) {
  require_rate(input, kWidebandRate, "decimate_6x");
  const LowpassFir& h = interpolation_filter();
  const auto n_in = static_cast<std::ptrdiff_t>(input.size());
  const auto half = static_cast<std::ptrdiff_t>(h.half);
  constexpr std::ptrdiff_t L = kUpsampleFactor;

  Signal out;
  out.sample_rate = kNarrowbandRate;
  out.samples.resize((input.size() + L - 1) / L);
  for (std::size_t m = 0; m < out.size(); ++m) {
    const auto center = static_cast<std::ptrdiff_t>(m) * L;
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, center - half);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n_in - 1, center + half);
    double acc = 0.0;
    for (std::ptrdiff_t i = lo; i <= hi; ++i) acc += input.samples[static_cast<std::size_t>(i)] * h.at(center - i);
    out.samples[m] = acc;
  }
  return out;
}

/// Polyphase rational resampler by up/down with a Kaiser lowpass, delay
/// compensated. Used for internal analysis rates only.
inline std::vector<double> resample_rational(const std::vector<double>& x, int up, int down,
                                             double input_rate, double attenuation_db = 60.0) {
  require(up > 0 && down > 0, "resample ratio terms must be positive");
  const int g = std::gcd(up, down);
  up /= g;
  down /= g;
  const double high_rate = input_rate * up;
  const double nyquist = std::min(input_rate, input_rate * up / down) / 2.0;
  const LowpassFir h = design_kaiser_lowpass(high_rate, 0.95 * nyquist, 0.1 * nyquist, attenuation_db);
  const auto half = static_cast<std::ptrdiff_t>(h.half);
  const auto n_in = static_cast<std::ptrdiff_t>(x.size());
  const std::size_t n_out = (x.size() * static_cast<std::size_t>(up) + down - 1) / down;

  std::vector<double> y(n_out);
  for (std::size_t j = 0; j < n_out; ++j) {
    // Position of output sample j on the upsampled grid.
    const auto n = static_cast<std::ptrdiff_t>(j) * down;
    const std::ptrdiff_t m_lo = std::max<std::ptrdiff_t>(0, (n - half + up - 1) / up);
    const std::ptrdiff_t m_hi = std::min<std::ptrdiff_t>(n_in - 1, (n + half) / up);
    double acc = 0.0;
    for (std::ptrdiff_t m = m_lo; m <= m_hi; ++m) acc += x[static_cast<std::size_t>(m)] * h.at(n - up * m);
    y[j] = acc * up;
  }
  return y;
}

}  // namespace bwe
