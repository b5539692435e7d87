#pragma once

// Ideal frequency-domain band selection over the whole signal. A single DFT
// of the full length is masked and inverted, so the operators are exact
// orthogonal projections: idempotent, and complementary masks sum to identity.

#include <complex>
#include <vector>

#include "bwe/fft.hpp"
#include "bwe/signal.hpp"

namespace bwe {

/// Keeps DFT bins whose frequency f satisfies keep(f); zeroes the rest.
template <typename Predicate>
Signal mask_spectrum(const Signal& signal, Predicate keep) {
  Signal out;
  out.sample_rate = signal.sample_rate;
  if (signal.empty()) return out;
  const std::size_t n = signal.size();
  auto spectrum = rfft(signal.samples);
  const double bin_hz = static_cast<double>(signal.sample_rate) / static_cast<double>(n);
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    if (!keep(static_cast<double>(k) * bin_hz)) spectrum[k] = 0.0;
  }
  out.samples = irfft(spectrum, n);
  return out;
}

/// Keeps f_lo <= f <= f_hi.
inline Signal project_band(const Signal& signal, double f_lo, double f_hi) {
  return mask_spectrum(signal, [=](double f) { return f >= f_lo && f <= f_hi; });
}

/// Keeps f > cutoff.
inline Signal project_above(const Signal& signal, double cutoff_hz) {
  return mask_spectrum(signal, [=](double f) { return f > cutoff_hz; });
}

/// Keeps f >= cutoff.
inline Signal project_from(const Signal& signal, double cutoff_hz) {
  return mask_spectrum(signal, [=](double f) { return f >= cutoff_hz; });
}

}  // namespace bwe
