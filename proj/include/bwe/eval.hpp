#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bwe/degrade.hpp"
#include "bwe/errors.hpp"
#include "bwe/features.hpp"
#include "bwe/fft.hpp"
#include "bwe/parallel.hpp"
#include "bwe/predict.hpp"
#include "bwe/resample.hpp"
#include "bwe/stft.hpp"
#include "bwe/wav.hpp"

namespace bwe {

namespace eval_detail {

inline void pad_to_common_length(Signal& a, Signal& b) {
  const std::size_t n = std::max(a.size(), b.size());
  a.samples.resize(n, 0.0);
  b.samples.resize(n, 0.0);
}

}  // namespace eval_detail

/// Mean absolute difference of 80-band log10 mel features.
inline double mel_l1(Signal reference, Signal estimate) {
  require_rate(reference, kWidebandRate, "mel_l1");
  require_rate(estimate, kWidebandRate, "mel_l1");
  if (reference.empty() && estimate.empty()) throw ContractError("mel_l1: empty signals");
  eval_detail::pad_to_common_length(reference, estimate);
  const auto a = log_mel(magnitude(stft(reference)));
  const auto b = log_mel(magnitude(stft(estimate)));
  double sum = 0.0;
  for (std::size_t i = 0; i < a.values.data.size(); ++i) sum += std::abs(a.values.data[i] - b.values.data[i]);
  return sum / static_cast<double>(a.values.data.size());
}

// ---------------------------------------------------------------------------
// STOI

struct StoiConstants {
  static constexpr int sample_rate = 10000;
  static constexpr std::size_t frame = 256;
  static constexpr std::size_t fft = 512;
  static constexpr std::size_t bands = 15;
  static constexpr double min_freq = 150.0;
  static constexpr std::size_t segment = 30;  // 384 ms
  static constexpr double beta_db = -15.0;
  static constexpr double dynamic_range_db = 40.0;
};

namespace stoi_detail {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

/// Hann of length n+2 with the zero end points dropped.
inline std::vector<double> inner_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i + 1) / static_cast<double>(n + 1));
  }
  return w;
}

/// One-third-octave band matrix over the rfft bins: band i spans
/// [argmin|f - lo_i|, argmin|f - hi_i|).
inline FrameMatrix<double> third_octave_bands() {
  using C = StoiConstants;
  const std::size_t bins = C::fft / 2 + 1;
  FrameMatrix<double> obm(C::bands, bins);
  auto nearest = [&](double target) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * C::sample_rate / static_cast<double>(C::fft);
      const double d = (f - target) * (f - target);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  };
  for (std::size_t i = 0; i < C::bands; ++i) {
    const double k = static_cast<double>(i);
    const std::size_t lo = nearest(C::min_freq * std::pow(2.0, (2.0 * k - 1.0) / 6.0));
    const std::size_t hi = nearest(C::min_freq * std::pow(2.0, (2.0 * k + 1.0) / 6.0));
    for (std::size_t b = lo; b < hi; ++b) obm(i, b) = 1.0;
  }
  return obm;
}

inline std::vector<std::vector<double>> frames_of(const std::vector<double>& x, const std::vector<double>& w,
                                                  std::size_t hop) {
  std::vector<std::vector<double>> frames;
  const std::size_t n = w.size();
  for (std::size_t i = 0; i + n < x.size(); i += hop) {
    std::vector<double> f(n);
    for (std::size_t j = 0; j < n; ++j) f[j] = w[j] * x[i + j];
    frames.push_back(std::move(f));
  }
  return frames;
}

inline std::vector<double> overlap_add(const std::vector<std::vector<double>>& frames, std::size_t hop) {
  if (frames.empty()) return {};
  const std::size_t n = frames.front().size();
  std::vector<double> out((frames.size() - 1) * hop + n, 0.0);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (std::size_t j = 0; j < n; ++j) out[t * hop + j] += frames[t][j];
  }
  return out;
}

/// Drops frames more than the dynamic range below the reference's loudest frame.
inline void remove_silent_frames(std::vector<double>& x, std::vector<double>& y) {
  using C = StoiConstants;
  const auto w = inner_hann(C::frame);
  const std::size_t hop = C::frame / 2;
  const auto xf = frames_of(x, w, hop);
  const auto yf = frames_of(y, w, hop);
  std::vector<double> energy(xf.size());
  for (std::size_t t = 0; t < xf.size(); ++t) {
    double s = 0.0;
    for (double v : xf[t]) s += v * v;
    energy[t] = 20.0 * std::log10(std::sqrt(s) + kEps);
  }
  const double peak = energy.empty() ? 0.0 : *std::max_element(energy.begin(), energy.end());
  std::vector<std::vector<double>> xk, yk;
  for (std::size_t t = 0; t < xf.size(); ++t) {
    if (peak - C::dynamic_range_db - energy[t] < 0.0) {
      xk.push_back(xf[t]);
      yk.push_back(yf[t]);
    }
  }
  x = overlap_add(xk, hop);
  y = overlap_add(yk, hop);
}

/// Band envelopes (bands x frames) of a 10 kHz signal.
inline FrameMatrix<double> band_envelopes(const std::vector<double>& x, const FrameMatrix<double>& obm) {
  using C = StoiConstants;
  const auto w = inner_hann(C::frame);
  const auto frames = frames_of(x, w, C::frame / 2);
  const FftPlan plan(C::fft);
  FrameMatrix<double> env(C::bands, frames.size());
  std::vector<std::complex<double>> buf(C::fft);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    std::fill(buf.begin(), buf.end(), std::complex<double>{});
    for (std::size_t j = 0; j < C::frame; ++j) buf[j] = frames[t][j];
    plan.forward(buf);
    for (std::size_t i = 0; i < C::bands; ++i) {
      double power = 0.0;
      for (std::size_t b = 0; b < obm.bins; ++b) power += obm(i, b) * std::norm(buf[b]);
      env(i, t) = std::sqrt(power);
    }
  }
  return env;
}

}  // namespace stoi_detail

/// Short-time objective intelligibility: 10 kHz analysis, 15 third-octave
/// bands from 150 Hz, 384 ms segments, clipped per-segment correlation.
inline double stoi(Signal reference, Signal estimate) {
  using C = StoiConstants;
  using namespace stoi_detail;
  require(reference.sample_rate == estimate.sample_rate, "stoi: sample rates differ");
  require_valid(reference);
  require_valid(estimate);
  eval_detail::pad_to_common_length(reference, estimate);

  std::vector<double> x = reference.samples;
  std::vector<double> y = estimate.samples;
  if (reference.sample_rate != C::sample_rate) {
    x = resample_rational(x, C::sample_rate, reference.sample_rate, reference.sample_rate);
    y = resample_rational(y, C::sample_rate, estimate.sample_rate, estimate.sample_rate);
  }
  remove_silent_frames(x, y);

  static const FrameMatrix<double> obm = third_octave_bands();
  const auto xe = band_envelopes(x, obm);
  const auto ye = band_envelopes(y, obm);
  const std::size_t frames = xe.bins;
  if (frames < C::segment) {
    throw ContractError("stoi: fewer than 384 ms of non-silent reference signal (" + std::to_string(frames) +
                        " frames)");
  }

  const double clip = std::pow(10.0, -C::beta_db / 20.0);
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> xs(C::segment), ys(C::segment);
  for (std::size_t m = C::segment; m <= frames; ++m) {
    for (std::size_t i = 0; i < C::bands; ++i) {
      double nx = 0.0, ny = 0.0;
      for (std::size_t j = 0; j < C::segment; ++j) {
        xs[j] = xe(i, m - C::segment + j);
        ys[j] = ye(i, m - C::segment + j);
        nx += xs[j] * xs[j];
        ny += ys[j] * ys[j];
      }
      const double scale = std::sqrt(nx) / (std::sqrt(ny) + kEps);
      double mx = 0.0, my = 0.0;
      for (std::size_t j = 0; j < C::segment; ++j) {
        ys[j] = std::min(ys[j] * scale, xs[j] * (1.0 + clip));
        mx += xs[j];
        my += ys[j];
      }
      mx /= C::segment;
      my /= C::segment;
      double sx = 0.0, sy = 0.0;
      for (std::size_t j = 0; j < C::segment; ++j) {
        xs[j] -= mx;
        ys[j] -= my;
        sx += xs[j] * xs[j];
        sy += ys[j] * ys[j];
      }
      sx = std::sqrt(sx) + kEps;
      sy = std::sqrt(sy) + kEps;
      double corr = 0.0;
      for (std::size_t j = 0; j < C::segment; ++j) corr += (xs[j] / sx) * (ys[j] / sy);
      total += corr;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Band energy

enum class SpectralWindow { rectangular, blackman_harris };

inline constexpr double kSilentDb = -200.0;

/// 10 log10(E[f_low, f_high] / E_total) from a one-sided periodogram of the
/// whole signal. Silent signals and empty bands report -200.
inline double band_energy_db(const Signal& signal, double f_low, double f_high,
                             SpectralWindow window = SpectralWindow::rectangular) {
  require(f_low < f_high, "band_energy_db: f_low must be below f_high");
  require(f_high <= signal.sample_rate / 2.0 + 1e-9, "band_energy_db: f_high above Nyquist");
  const std::size_t n = signal.size();
  if (n == 0) return kSilentDb;
  std::vector<double> x = signal.samples;
  if (window == SpectralWindow::blackman_harris) {
    constexpr double a0 = 0.35875, a1 = 0.48829, a2 = 0.14128, a3 = 0.01168;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
      x[i] *= a0 - a1 * std::cos(p) + a2 * std::cos(2 * p) - a3 * std::cos(3 * p);
    }
  }
  const auto spectrum = rfft(x);
  const double bin_hz = static_cast<double>(signal.sample_rate) / static_cast<double>(n);
  double band = 0.0, total = 0.0;
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
    const double e = std::norm(spectrum[k]) * (edge ? 1.0 : 2.0);
    total += e;
    const double f = static_cast<double>(k) * bin_hz;
    if (f >= f_low && f <= f_high) band += e;
  }
  if (total <= 0.0 || band <= 0.0) return kSilentDb;
  return std::max(kSilentDb, 10.0 * std::log10(band / total));
}

// ---------------------------------------------------------------------------
// Corpus evaluation

struct MetricReport {
  std::string utterance_id;
  double mel_l1 = 0.0;
  double stoi = 0.0;  // clamped to [0, 1]
  double coarse_loss_hi = 0.0;
  double upper_band_energy_db = 0.0;
  std::optional<std::string> error;
};

struct MetricSummary {
  std::size_t count = 0;
  std::size_t errors = 0;
  double mel_l1 = 0.0;
  double stoi = 0.0;
  double coarse_loss_hi = 0.0;
  double upper_band_energy_db = 0.0;
};

struct CorpusReport {
  std::vector<MetricReport> utterances;  // sorted by id
  MetricSummary summary;
};

/// Coarse features of a 48 kHz signal.
inline CoarseSpectrum coarse_features(const Signal& s, const GroupingMatrix& g = GroupingMatrix{}) {
  return compress(magnitude(stft(s)), g);
}

inline MetricReport evaluate_pair(const std::string& id, Signal reference, Signal estimate) {
  require_rate(reference, kWidebandRate, "evaluate");
  require_rate(estimate, kWidebandRate, "evaluate");
  eval_detail::pad_to_common_length(reference, estimate);
  const GroupingMatrix g;
  MetricReport r;
  r.utterance_id = id;
  r.mel_l1 = mel_l1(reference, estimate);
  r.stoi = std::clamp(stoi(reference, estimate), 0.0, 1.0);
  r.coarse_loss_hi = feature_loss(coarse_features(reference, g), coarse_features(estimate, g), kCutoffBand);
  const double cutoff_hz = static_cast<double>(g.band_begin(kCutoffBand)) * StftConfig{}.bin_hz();
  r.upper_band_energy_db = band_energy_db(estimate, cutoff_hz, kWidebandRate / 2.0);
  return r;
}

inline MetricSummary summarize(const std::vector<MetricReport>& reports) {
  MetricSummary s;
  for (const auto& r : reports) {
    if (r.error) {
      ++s.errors;
      continue;
    }
    ++s.count;
    s.mel_l1 += r.mel_l1;
    s.stoi += r.stoi;
    s.coarse_loss_hi += r.coarse_loss_hi;
    s.upper_band_energy_db += r.upper_band_energy_db;
  }
  if (s.count > 0) {
    const auto n = static_cast<double>(s.count);
    s.mel_l1 /= n;
    s.stoi /= n;
    s.coarse_loss_hi /= n;
    s.upper_band_energy_db /= n;
  }
  return s;
}

inline CorpusReport evaluate_corpus(const std::filesystem::path& manifest, const std::filesystem::path& estimates_dir,
                                    const std::filesystem::path& references_dir,
                                    std::size_t workers = default_worker_count()) {
  auto records = read_manifest(manifest);
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.utterance_id < b.utterance_id; });
  CorpusReport report;
  report.utterances.resize(records.size());
  parallel_for(records.size(), workers, [&](std::size_t i) {
    const std::string& id = records[i].utterance_id;
    try {
      report.utterances[i] = evaluate_pair(id, read_wav(references_dir / (id + ".wav")),
                                           read_wav(estimates_dir / (id + ".wav")));
    } catch (const std::exception& e) {
      report.utterances[i] = MetricReport{};
      report.utterances[i].utterance_id = id;
      report.utterances[i].error = e.what();
    }
  });
  report.summary = summarize(report.utterances);
  return report;
}

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j{{"id", r.utterance_id}};
  if (r.error) {
    j["error"] = *r.error;
  } else {
    j["mel_l1"] = r.mel_l1;
    j["stoi"] = r.stoi;
    j["coarse_loss_hi"] = r.coarse_loss_hi;
    j["upper_band_energy_db"] = r.upper_band_energy_db;
  }
  return j;
}

inline nlohmann::json to_json(const MetricSummary& s) {
  return {{"summary", true},         {"count", s.count},
          {"errors", s.errors},      {"mel_l1", s.mel_l1},
          {"stoi", s.stoi},          {"coarse_loss_hi", s.coarse_loss_hi},
          {"upper_band_energy_db", s.upper_band_energy_db}};
}

inline void write_report_jsonl(std::ostream& out, const CorpusReport& report) {
  for (const auto& r : report.utterances) out << to_json(r).dump() << '\n';
  out << to_json(report.summary).dump() << '\n';
}

inline void write_report_csv(std::ostream& out, const CorpusReport& report) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "id,mel_l1,stoi,coarse_loss_hi,upper_band_energy_db,error\n";
  for (const auto& r : report.utterances) {
    out << r.utterance_id << ',';
    if (r.error) {
      out << ",,,," << '"' << *r.error << '"' << '\n';
    } else {
      out << r.mel_l1 << ',' << r.stoi << ',' << r.coarse_loss_hi << ',' << r.upper_band_energy_db << ",\n";
    }
  }
  const auto& s = report.summary;
  out << "__mean__," << s.mel_l1 << ',' << s.stoi << ',' << s.coarse_loss_hi << ',' << s.upper_band_energy_db << ','
      << s.errors << " errors\n";
}

}  // namespace bwe
