#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bwe/errors.hpp"

namespace bwe {

inline constexpr int kNarrowbandRate = 8000;
inline constexpr int kWidebandRate = 48000;

/// Mono PCM audio. Samples are nominally in [-1, 1].
struct Signal {
  std::vector<double> samples;
  int sample_rate = kWidebandRate;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  friend bool operator==(const Signal&, const Signal&) = default;
};

inline bool all_finite(const std::vector<double>& v) {
  for (double s : v) {
    if (!std::isfinite(s)) return false;
  }
  return true;
}

inline void require_valid(const Signal& s) {
  require(s.sample_rate > 0, "signal sample rate must be positive");
  require(all_finite(s.samples), "signal contains non-finite samples");
}

inline void require_rate(const Signal& s, int rate, const char* what) {
  if (s.sample_rate != rate) {
    throw ContractError(std::string(what) + ": expected " + std::to_string(rate) +
                        " Hz input, got " + std::to_string(s.sample_rate) + " Hz");
  }
}

/// Zero-pads or truncates to exactly `length` samples.
inline Signal fit_length(Signal s, std::size_t length) {
  s.samples.resize(length, 0.0);
  return s;
}

}  // namespace bwe
