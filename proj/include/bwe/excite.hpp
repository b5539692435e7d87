#pragma once

// Classical excitation: broaden a bandlimited 48 kHz signal so that the band
// above the input passband carries energy for the LTV stage to shape. Every
// exciter adds content that is exactly confined above f_hi, so the passband
// of the output is the input's passband untouched.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "bwe/brickwall.hpp"
#include "bwe/degrade.hpp"
#include "bwe/errors.hpp"
#include "bwe/features.hpp"
#include "bwe/random.hpp"
#include "bwe/stft.hpp"

namespace bwe {

enum class ExciterVariant { noise, fold, rect };

inline ExciterVariant parse_exciter_variant(const std::string& name) {
  if (name == "noise") return ExciterVariant::noise;
  if (name == "fold") return ExciterVariant::fold;
  if (name == "rect") return ExciterVariant::rect;
  throw ContractError("unknown exciter '" + name + "' (expected noise, fold or rect)");
}

inline std::string to_string(ExciterVariant v) {
  switch (v) {
    case ExciterVariant::noise: return "noise";
    case ExciterVariant::fold: return "fold";
    case ExciterVariant::rect: return "rect";
  }
  throw ContractError("unknown exciter variant");
}

struct ExciterKind {
  ExciterVariant variant = ExciterVariant::noise;
  std::uint64_t seed = 0;
  /// Per-bin STFT magnitude of the noise band. Unset: derived per frame from
  /// the top two passband bands.
  std::optional<double> flat_level;

  friend bool operator==(const ExciterKind&, const ExciterKind&) = default;
};

/// Floor on the derived noise level so silent frames still excite.
inline constexpr double kMinFlatLevel = 1e-8;

namespace excite_detail {

inline std::size_t highest_passband_bin(double f_hi, const StftConfig& config) {
  return static_cast<std::size_t>(std::floor(f_hi / config.bin_hz()));
}

/// Index of the highest coarse band lying entirely at or below f_hi.
inline std::size_t top_passband_band(double f_hi, const GroupingMatrix& g, const StftConfig& config) {
  std::size_t top = 0;
  for (std::size_t k = 0; k < g.bands(); ++k) {
    if (static_cast<double>(g.band_end(k)) * config.bin_hz() <= f_hi) top = k;
  }
  return top;
}

inline std::vector<double> default_levels(const CoarseSpectrum& coarse, const GroupingMatrix& g,
                                          double f_hi, const StftConfig& config) {
  const std::size_t top = top_passband_band(f_hi, g, config);
  const std::size_t first = top == 0 ? 0 : top - 1;
  std::vector<double> levels(coarse.frames());
  for (std::size_t t = 0; t < coarse.frames(); ++t) {
    double sum = 0.0;
    for (std::size_t k = first; k <= top; ++k) {
      sum += std::max(0.0, std::pow(10.0, coarse.values(t, k)) - g.epsilon()) / static_cast<double>(g.band_width(k));
    }
    levels[t] = std::max(kMinFlatLevel, sum / static_cast<double>(top - first + 1));
  }
  return levels;
}

// Rayleigh mean of one STFT bin of unit-variance white Gaussian noise.
inline double noise_bin_mean(const StftConfig& config) {
  const auto w = hann_window(config.fft_size);
  double energy = 0.0;
  for (double v : w) energy += v * v;
  return std::sqrt(energy) * std::sqrt(std::numbers::pi) / 2.0;
}

inline Signal noise_band(const Signal& input, const ExciterKind& kind, const DegradationRecord& record) {
  const StftConfig config;
  const GroupingMatrix g(config.bins());
  std::vector<double> levels;
  if (kind.flat_level) {
    levels.assign(config.frame_count(input.size()), *kind.flat_level);
  } else {
    levels = default_levels(compress(magnitude(stft(input, config)), g), g, record.f_hi, config);
  }

  Rng rng(mix_seed(kind.seed, record.seed));
  Signal noise;
  noise.sample_rate = input.sample_rate;
  noise.samples.resize(input.size());
  for (auto& s : noise.samples) s = rng.normal();

  ComplexSpectrogram spec = stft(noise, config);
  const std::size_t edge = highest_passband_bin(record.f_hi, config);
  const double mean = noise_bin_mean(config);
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    auto* row = spec.values.row(t);
    const double gain = levels[t] / mean;
    for (std::size_t b = 0; b < spec.bins(); ++b) row[b] = b > edge ? row[b] * gain : 0.0;
  }
  return istft(spec);
}

/// Triangle-wave mirroring of the passband [lo, edge] upward to Nyquist, on
/// the full-length DFT. Mirrored copies are conjugated so each copy is a
/// modulation of the input and stays local in time.
inline Signal fold_band(const Signal& input, const DegradationRecord& record) {
  Signal out;
  out.sample_rate = input.sample_rate;
  if (input.empty()) return out;
  const std::size_t n = input.size();
  const auto x = rfft(input.samples);
  const double bin_hz = static_cast<double>(input.sample_rate) / static_cast<double>(n);
  const auto edge = std::min(static_cast<std::size_t>(std::floor(record.f_hi / bin_hz)), x.size() - 1);
  const auto lo = std::min(static_cast<std::size_t>(std::ceil(record.f_lo / bin_hz)), edge);
  const std::size_t width = edge - lo + 1;
  std::vector<std::complex<double>> y(x.size());
  for (std::size_t b = edge + 1; b < y.size(); ++b) {
    const std::size_t q = (b - edge - 1) % (2 * width);
    y[b] = q < width ? std::conj(x[edge - q]) : x[lo + (q - width)];
  }
  if (n % 2 == 0) y.back() = y.back().real();
  out.samples = irfft(y, n);
  return out;
}

inline Signal rect_band(const Signal& input) {
  Signal rectified = input;
  for (auto& s : rectified.samples) s = std::abs(s);
  return rectified;
}

}  // namespace excite_detail

inline Signal excite(const Signal& input, const ExciterKind& kind, const DegradationRecord& record) {
  require_rate(input, kWidebandRate, "excite");
  require_valid(input);
  validate(record);
  if (kind.flat_level) require(*kind.flat_level > 0.0, "excite: flat_level must be positive");

  Signal upper;
  switch (kind.variant) {
    case ExciterVariant::noise: upper = excite_detail::noise_band(input, kind, record); break;
    case ExciterVariant::fold: upper = excite_detail::fold_band(input, record); break;
    case ExciterVariant::rect: upper = excite_detail::rect_band(input); break;
    default: throw ContractError("excite: unknown exciter variant");
  }
  upper = project_above(upper, record.f_hi);

  Signal out = input;
  for (std::size_t i = 0; i < out.size(); ++i) out.samples[i] += upper.samples[i];
  return out;
}

/// Per-frame spread (max - min, log10) of the coarse bands at or above k.
inline std::vector<double> flatness(const CoarseSpectrum& coarse, std::size_t k) {
  require(k < coarse.bands(), "flatness: band index out of range");
  std::vector<double> out(coarse.frames());
  for (std::size_t t = 0; t < coarse.frames(); ++t) {
    const double* row = coarse.values.row(t);
    const auto [lo, hi] = std::minmax_element(row + k, row + coarse.bands());
    out[t] = *hi - *lo;
  }
  return out;
}

}  // namespace bwe
