#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "bwe/errors.hpp"
#include "bwe/stft.hpp"

namespace bwe {

inline constexpr std::size_t kCoarseBands = 64;
inline constexpr std::size_t kCutoffBand = 11;
inline constexpr double kFeatureEpsilon = 1e-5;

/// Non-overlapping brickwall grouping of `bins` STFT bins into `bands`
/// contiguous bands. Row k of M is 1 on [edges[k], edges[k+1]) and 0
/// elsewhere. Because rows have disjoint support the pseudoinverse is the
/// transpose with each column scaled by the reciprocal band width.
class GroupingMatrix {
 public:
  GroupingMatrix(std::size_t bins = 1025, std::size_t bands = kCoarseBands) : bins_(bins) {
    require(bands > 0, "grouping matrix needs at least one band");
    require(bands <= bins, "cannot group " + std::to_string(bins) + " bins into " +
                               std::to_string(bands) + " bands");
    const std::size_t width = bins / bands;
    edges_.resize(bands + 1);
    for (std::size_t k = 0; k < bands; ++k) edges_[k] = k * width;
    edges_[bands] = bins;  // the last band absorbs the remainder
  }

  std::size_t bands() const { return edges_.size() - 1; }
  std::size_t bins() const { return bins_; }
  double epsilon() const { return kFeatureEpsilon; }
  const std::vector<std::size_t>& band_edges() const { return edges_; }
  std::size_t band_begin(std::size_t k) const { return edges_[k]; }
  std::size_t band_end(std::size_t k) const { return edges_[k + 1]; }
  std::size_t band_width(std::size_t k) const { return edges_[k + 1] - edges_[k]; }

  std::size_t band_of_bin(std::size_t bin) const {
    const auto it = std::upper_bound(edges_.begin(), edges_.end(), bin);
    return static_cast<std::size_t>(it - edges_.begin()) - 1;
  }

  /// Dense M (bands x bins).
  FrameMatrix<double> matrix() const {
    FrameMatrix<double> m(bands(), bins_);
    for (std::size_t k = 0; k < bands(); ++k) {
      for (std::size_t b = edges_[k]; b < edges_[k + 1]; ++b) m(k, b) = 1.0;
    }
    return m;
  }

  /// Dense M^+ (bins x bands).
  FrameMatrix<double> pinv() const {
    FrameMatrix<double> p(bins_, bands());
    for (std::size_t k = 0; k < bands(); ++k) {
      const double inv = 1.0 / static_cast<double>(band_width(k));
      for (std::size_t b = edges_[k]; b < edges_[k + 1]; ++b) p(b, k) = inv;
    }
    return p;
  }

  friend bool operator==(const GroupingMatrix&, const GroupingMatrix&) = default;

 private:
  std::size_t bins_;
  std::vector<std::size_t> edges_;
};

/// Frames x bands log10 band magnitudes.
struct CoarseSpectrum {
  FrameMatrix<double> values;

  std::size_t frames() const { return values.frames; }
  std::size_t bands() const { return values.bins; }

  friend bool operator==(const CoarseSpectrum&, const CoarseSpectrum&) = default;
};

/// X = log10(M F + eps), per frame.
inline CoarseSpectrum compress(const MagnitudeSpectrogram& mag, const GroupingMatrix& g) {
  require(mag.bins() == g.bins(), "compress: magnitude bin count does not match grouping matrix");
  CoarseSpectrum out{FrameMatrix<double>(mag.frames(), g.bands())};
  for (std::size_t t = 0; t < mag.frames(); ++t) {
    const double* row = mag.values.row(t);
    for (std::size_t k = 0; k < g.bands(); ++k) {
      double sum = 0.0;
      for (std::size_t b = g.band_begin(k); b < g.band_end(k); ++b) sum += row[b];
      out.values(t, k) = std::log10(sum + g.epsilon());
    }
  }
  return out;
}

/// F = M^+ (10^Y - eps). Values that would round below zero are clamped, so
/// the result is non-negative for any input.
inline MagnitudeSpectrogram decompress(const CoarseSpectrum& coarse, const GroupingMatrix& g,
                                       const StftConfig& config = {}) {
  require(coarse.bands() == g.bands(), "decompress: band count does not match grouping matrix");
  MagnitudeSpectrogram out;
  out.config = config;
  out.values = FrameMatrix<double>(coarse.frames(), g.bins());
  for (std::size_t t = 0; t < coarse.frames(); ++t) {
    double* row = out.values.row(t);
    for (std::size_t k = 0; k < g.bands(); ++k) {
      const double band = std::max(0.0, std::pow(10.0, coarse.values(t, k)) - g.epsilon());
      const double level = band / static_cast<double>(g.band_width(k));
      std::fill(row + g.band_begin(k), row + g.band_end(k), level);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Log-mel features

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// HTK-scale triangular filterbank with each row normalised to unit sum.
class MelFilterbank {
 public:
  MelFilterbank(std::size_t bands = 80, const StftConfig& config = {}, double f_min = 0.0,
                double f_max = -1.0)
      : bands_(bands), bins_(config.bins()), weights_(bands, config.bins()) {
    if (f_max < 0) f_max = config.sample_rate / 2.0;
    require(bands > 0 && f_max > f_min, "mel filterbank needs bands and a positive range");
    const double mel_lo = hz_to_mel(f_min);
    const double mel_hi = hz_to_mel(f_max);
    centers_hz_.resize(bands + 2);
    for (std::size_t i = 0; i < bands + 2; ++i) {
      centers_hz_[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(bands + 1));
    }
    for (std::size_t m = 0; m < bands; ++m) {
      const double lo = centers_hz_[m], mid = centers_hz_[m + 1], hi = centers_hz_[m + 2];
      double sum = 0.0;
      for (std::size_t b = 0; b < bins_; ++b) {
        const double f = static_cast<double>(b) * config.bin_hz();
        double w = 0.0;
        if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
        else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
        weights_(m, b) = w;
        sum += w;
      }
      require(sum > 0, "mel band " + std::to_string(m) + " covers no STFT bin");
      for (std::size_t b = 0; b < bins_; ++b) weights_(m, b) /= sum;
    }
    centers_hz_.erase(centers_hz_.begin());
    centers_hz_.pop_back();
  }

  std::size_t bands() const { return bands_; }
  std::size_t bins() const { return bins_; }
  const FrameMatrix<double>& weights() const { return weights_; }
  /// Peak frequency of each triangle.
  const std::vector<double>& centers_hz() const { return centers_hz_; }

 private:
  std::size_t bands_;
  std::size_t bins_;
  FrameMatrix<double> weights_;
  std::vector<double> centers_hz_;
};

struct MelSpectrogram {
  FrameMatrix<double> values;

  std::size_t frames() const { return values.frames; }
  std::size_t bands() const { return values.bins; }
};

inline const MelFilterbank& canonical_mel_filterbank() {
  static const MelFilterbank fb{};
  return fb;
}

/// log10(max(W F, eps)) on the canonical 80-band, 0-24 kHz filterbank.
inline MelSpectrogram log_mel(const MagnitudeSpectrogram& mag, const MelFilterbank& fb = canonical_mel_filterbank()) {
  require(mag.config == StftConfig{}, "log_mel expects the canonical 48 kHz STFT configuration");
  require(mag.bins() == fb.bins(), "log_mel: bin count does not match filterbank");
  MelSpectrogram out{FrameMatrix<double>(mag.frames(), fb.bands())};
  for (std::size_t t = 0; t < mag.frames(); ++t) {
    const double* row = mag.values.row(t);
    for (std::size_t m = 0; m < fb.bands(); ++m) {
      const double* w = fb.weights().row(m);
      double acc = 0.0;
      for (std::size_t b = 0; b < fb.bins(); ++b) acc += w[b] * row[b];
      out.values(t, m) = std::log10(std::max(acc, kFeatureEpsilon));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature dumps

inline constexpr char kFeatureMagic[9] = "BWEFEAT1";

inline void write_features(const std::filesystem::path& path, const FrameMatrix<double>& m) {
  dump_detail::write_matrix(path, kFeatureMagic, m);
}

inline FrameMatrix<double> read_features(const std::filesystem::path& path) {
  return dump_detail::read_matrix(path, kFeatureMagic);
}

/// One frame per line, comma separated, shortest round-trip formatting.
inline void write_features_csv(const std::filesystem::path& path, const FrameMatrix<double>& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t t = 0; t < m.frames; ++t) {
    for (std::size_t b = 0; b < m.bins; ++b) {
      if (b) out << ',';
      out << m(t, b);
    }
    out << '\n';
  }
}

inline FrameMatrix<double> read_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  FrameMatrix<double> m;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (m.frames == 0) m.bins = row.size();
    if (row.size() != m.bins) throw FormatError(path.string() + ": ragged CSV row");
    m.data.insert(m.data.end(), row.begin(), row.end());
    ++m.frames;
  }
  return m;
}

}  // namespace bwe
