#pragma once

// Zero-phase linear time-varying filtering in the STFT domain: each frame's
// complex spectrum is scaled by a real non-negative gain per bin, leaving the
// phase untouched.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "bwe/brickwall.hpp"
#include "bwe/degrade.hpp"
#include "bwe/errors.hpp"
#include "bwe/features.hpp"
#include "bwe/stft.hpp"

namespace bwe {

enum class LtvMode {
  /// Response values are the per-bin gains.
  direct,
  /// Response values are target magnitudes; gains divide out the
  /// excitation's own coarse envelope.
  match,
};

inline LtvMode parse_ltv_mode(const std::string& name) {
  if (name == "direct") return LtvMode::direct;
  if (name == "match") return LtvMode::match;
  throw ContractError("unknown LTV mode '" + name + "' (expected direct or match)");
}

inline std::string to_string(LtvMode m) { return m == LtvMode::direct ? "direct" : "match"; }

struct LtvResponse {
  FrameMatrix<double> values;
  LtvMode mode = LtvMode::match;

  std::size_t frames() const { return values.frames; }
  std::size_t bins() const { return values.bins; }
};

struct LtvOptions {
  double gain_ceiling_db = 40.0;
  double delta = 1e-8;
  /// Zero the bins below the start of the record's cutoff band. When false
  /// every bin is filtered.
  bool apply_cutoff = true;
  /// After synthesis, remove whatever STFT leakage fell below the cutoff so
  /// the filtered signal has no energy in the residual passband.
  bool exact_band_split = true;
};

/// Expands a coarse target to fine resolution: F = M^+ (10^Y - eps).
inline LtvResponse build_response(const CoarseSpectrum& target, const GroupingMatrix& g,
                                  LtvMode mode = LtvMode::match) {
  return {decompress(target, g).values, mode};
}

inline Signal apply_ltv(const Signal& excited, const LtvResponse& response, const DegradationRecord& record,
                        const LtvOptions& options = {}) {
  require_rate(excited, kWidebandRate, "apply_ltv");
  const StftConfig config;
  const GroupingMatrix g(config.bins());
  ComplexSpectrogram spec = stft(excited, config);
  if (response.frames() != spec.frames() || response.bins() != spec.bins()) {
    throw ContractError("apply_ltv: response is " + std::to_string(response.frames()) + "x" +
                        std::to_string(response.bins()) + " but excitation STFT is " +
                        std::to_string(spec.frames()) + "x" + std::to_string(spec.bins()));
  }
  require(record.cutoff_band_k < g.bands(), "apply_ltv: cutoff band out of range");
  const std::size_t cutoff_bin = options.apply_cutoff ? g.band_begin(record.cutoff_band_k) : 0;

  FrameMatrix<double> envelope;
  if (response.mode == LtvMode::match) envelope = decompress(compress(magnitude(spec), g), g).values;
  const double ceiling = std::pow(10.0, options.gain_ceiling_db / 20.0);

  for (std::size_t t = 0; t < spec.frames(); ++t) {
    auto* row = spec.values.row(t);
    const double* target = response.values.row(t);
    for (std::size_t b = 0; b < spec.bins(); ++b) {
      double gain = 0.0;
      if (b >= cutoff_bin) {
        gain = response.mode == LtvMode::direct
                   ? target[b]
                   : std::min(target[b] / (envelope(t, b) + options.delta), ceiling);
      }
      row[b] *= gain;
    }
  }

  Signal out = istft(spec);
  if (options.apply_cutoff && options.exact_band_split) {
    out = project_from(out, static_cast<double>(cutoff_bin) * config.bin_hz());
  }
  return out;
}

/// Residual connection: the synthesized upper band added to the upsampled input.
inline Signal residual_mix(const Signal& upsampled_input, const Signal& filtered) {
  require_rate(upsampled_input, kWidebandRate, "residual_mix");
  require_rate(filtered, kWidebandRate, "residual_mix");
  if (upsampled_input.size() != filtered.size()) {
    throw ContractError("residual_mix: length mismatch (" + std::to_string(upsampled_input.size()) + " vs " +
                        std::to_string(filtered.size()) + ")");
  }
  Signal out = upsampled_input;
  for (std::size_t i = 0; i < out.size(); ++i) out.samples[i] += filtered.samples[i];
  return out;
}

}  // namespace bwe
