#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bwe/brickwall.hpp"
#include "bwe/errors.hpp"
#include "bwe/features.hpp"
#include "bwe/random.hpp"
#include "bwe/resample.hpp"
#include "bwe/signal.hpp"

namespace bwe {

inline constexpr double kLowCutoffMax = 500.0;
inline constexpr double kHighCutoffMin = 3500.0;
inline constexpr double kHighCutoffMax = 4000.0;

/// Passband applied to one utterance. cutoff_band_k is the first coarse band
/// treated as missing; it is the same constant for every utterance.
struct DegradationRecord {
  std::string utterance_id;
  double f_lo = 0.0;
  double f_hi = kHighCutoffMax;
  std::uint64_t seed = 0;
  std::size_t cutoff_band_k = kCutoffBand;

  friend bool operator==(const DegradationRecord&, const DegradationRecord&) = default;
};

inline void validate(const DegradationRecord& r) {
  if (!(r.f_lo < r.f_hi)) throw ContractError("degradation record '" + r.utterance_id + "': f_lo >= f_hi");
  if (!(r.f_lo >= 0.0 && r.f_lo <= kLowCutoffMax && r.f_hi >= kHighCutoffMin && r.f_hi <= kHighCutoffMax)) {
    throw ContractError("degradation record '" + r.utterance_id + "': cutoffs outside [0,500] / [3500,4000] Hz");
  }
  if (r.cutoff_band_k >= kCoarseBands) throw ContractError("degradation record: cutoff band out of range");
}

/// f_lo ~ U[0, 500], f_hi ~ U[3500, 4000], drawn from a seed derived from the
/// global seed and the utterance id.
inline DegradationRecord sample_record(std::uint64_t global_seed, const std::string& utterance_id) {
  DegradationRecord r;
  r.utterance_id = utterance_id;
  r.seed = utterance_seed(global_seed, utterance_id);
  Rng rng(r.seed);
  r.f_lo = rng.uniform(0.0, kLowCutoffMax);
  r.f_hi = rng.uniform(kHighCutoffMin, kHighCutoffMax);
  return r;
}

/// Frequency-domain brickwall: zeroes every DFT bin strictly below f_lo or
/// strictly above f_hi.
inline Signal bandlimit(const Signal& signal, double f_lo, double f_hi) {
  require_rate(signal, kWidebandRate, "bandlimit");
  require_valid(signal);
  if (!(f_lo < f_hi)) throw ContractError("bandlimit: f_lo must be below f_hi");
  require(f_lo >= 0.0 && f_hi <= signal.sample_rate / 2.0, "bandlimit: cutoffs outside [0, Nyquist]");
  return project_band(signal, f_lo, f_hi);
}

/// Brickwall to the record's passband, then keep every 6th sample.
inline Signal degrade_to_8k(const Signal& signal, const DegradationRecord& record) {
  validate(record);
  const Signal limited = bandlimit(signal, record.f_lo, record.f_hi);
  Signal out;
  out.sample_rate = kNarrowbandRate;
  out.samples.reserve((limited.size() + kUpsampleFactor - 1) / kUpsampleFactor);
  for (std::size_t i = 0; i < limited.size(); i += kUpsampleFactor) out.samples.push_back(limited.samples[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Manifest: JSON lines {id, f_lo, f_hi, seed, k}

inline nlohmann::json to_json(const DegradationRecord& r) {
  return {{"id", r.utterance_id}, {"f_lo", r.f_lo}, {"f_hi", r.f_hi}, {"seed", r.seed}, {"k", r.cutoff_band_k}};
}

inline DegradationRecord record_from_json(const nlohmann::json& j) {
  try {
    DegradationRecord r;
    r.utterance_id = j.at("id").get<std::string>();
    r.f_lo = j.at("f_lo").get<double>();
    r.f_hi = j.at("f_hi").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.cutoff_band_k = j.at("k").get<std::size_t>();
    validate(r);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest record: ") + e.what());
  }
}

inline std::string manifest_line(const DegradationRecord& r) { return to_json(r).dump(); }

inline void write_manifest(const std::filesystem::path& path, std::vector<DegradationRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.utterance_id < b.utterance_id; });
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) out << manifest_line(r) << '\n';
}

inline std::vector<DegradationRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::vector<DegradationRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace bwe
