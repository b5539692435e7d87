#include <gtest/gtest.h>

#include <sstream>

#include "bwe/eval.hpp"
#include "support/fixtures.hpp"

using namespace bwe;

namespace {

Signal add_noise(const Signal& x, double snr_db, std::uint64_t seed) {
  const auto n = support::white_noise(x.size(), seed, 1.0);
  const double px = support::l2(x.samples), pn = support::l2(n.samples);
  const double g = px / pn * std::pow(10.0, -snr_db / 20.0);
  Signal y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y.samples[i] += g * n.samples[i];
  return y;
}

}  // namespace

TEST(MelL1, IdentityZeroAndPositiveOtherwise) {
  const auto x = support::synthetic_speech(1, 0.5);
  EXPECT_EQ(mel_l1(x, x), 0.0);
  const auto y = add_noise(x, 10.0, 2);
  EXPECT_GT(mel_l1(x, y), 0.0);
  EXPECT_DOUBLE_EQ(mel_l1(x, y), mel_l1(y, x));
  EXPECT_THROW(mel_l1(Signal{}, Signal{}), ContractError);
}

TEST(MelL1, PadsShorterSignal) {
  const auto x = support::synthetic_speech(3, 0.5);
  Signal shorter = x;
  shorter.samples.resize(x.size() - 100);
  EXPECT_NO_THROW(mel_l1(x, shorter));
  EXPECT_LT(mel_l1(x, shorter), 0.1);
}

TEST(Stoi, IdentityIsOne) {
  const auto x = support::synthetic_speech(4, 1.5);
  EXPECT_NEAR(stoi(x, x), 1.0, 1e-6);
}

TEST(Stoi, DecreasesWithNoise) {
  const auto x = support::synthetic_speech(5, 2.0);
  double previous = stoi(x, x);
  for (double snr : {20.0, 10.0, 0.0}) {
    const double s = stoi(x, add_noise(x, snr, 6));
    EXPECT_LT(s, previous) << snr;
    previous = s;
  }
}

TEST(Stoi, GainInvariant) {
  const auto x = support::synthetic_speech(7, 1.5);
  const auto y = add_noise(x, 5.0, 8);
  Signal scaled = y;
  for (auto& v : scaled.samples) v *= 0.37;
  EXPECT_NEAR(stoi(x, y), stoi(x, scaled), 1e-6);
}

TEST(Stoi, ConstantsAndBands) {
  const auto obm = stoi_detail::third_octave_bands();
  EXPECT_EQ(obm.frames, 15u);
  EXPECT_EQ(obm.bins, 257u);
  // First band: 150 * 2^(-1/6) .. 150 * 2^(1/6) Hz -> nearest bins 7 and 8 at 19.53 Hz spacing.
  double first = 0.0;
  for (std::size_t b = 0; b < 257; ++b) first += obm(0, b);
  EXPECT_GE(first, 1.0);
  for (std::size_t i = 1; i < 15; ++i) {
    std::size_t lo_prev = 257, lo = 257;
    for (std::size_t b = 0; b < 257; ++b) {
      if (obm(i - 1, b) > 0 && lo_prev == 257) lo_prev = b;
      if (obm(i, b) > 0 && lo == 257) lo = b;
    }
    EXPECT_GT(lo, lo_prev);
  }
  const auto w = stoi_detail::inner_hann(256);
  EXPECT_NEAR(w[0], 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi / 257.0), 1e-15);
  EXPECT_NEAR(w[0], w[255], 1e-15);
}

TEST(Stoi, TooShortIsContractError) {
  const auto x = support::synthetic_speech(9, 0.2);
  EXPECT_THROW(stoi(x, x), ContractError);
}

TEST(BandEnergy, SineAndSilence) {
  const auto x = support::sine(48000, 1000.0);
  EXPECT_NEAR(band_energy_db(x, 900.0, 1100.0), 0.0, 1e-9);
  EXPECT_LT(band_energy_db(x, 2000.0, 24000.0), -200.0 + 1e-6);
  Signal z;
  z.samples.assign(100, 0.0);
  EXPECT_EQ(band_energy_db(z, 0.0, 1000.0), kSilentDb);
  EXPECT_THROW(band_energy_db(x, 2000.0, 1000.0), ContractError);
}

TEST(Corpus, EstimatesEqualReferencesGiveZeroError) {
  const auto dir = support::scratch_dir("eval_corpus");
  std::filesystem::create_directories(dir / "ref");
  std::vector<DegradationRecord> records;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto id = support::utterance_name(i);
    auto s = support::synthetic_speech(10 + i, 1.0);
    for (auto& v : s.samples) v = static_cast<float>(v);
    write_wav(s, dir / "ref" / (id + ".wav"));
    records.push_back(sample_record(1, id));
  }
  write_manifest(dir / "manifest.jsonl", records);
  const auto report = evaluate_corpus(dir / "manifest.jsonl", dir / "ref", dir / "ref", 2);
  ASSERT_EQ(report.utterances.size(), 3u);
  EXPECT_EQ(report.summary.errors, 0u);
  EXPECT_EQ(report.summary.count, 3u);
  EXPECT_EQ(report.summary.mel_l1, 0.0);
  EXPECT_EQ(report.summary.coarse_loss_hi, 0.0);
  EXPECT_NEAR(report.summary.stoi, 1.0, 1e-6);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(report.utterances[i].utterance_id, support::utterance_name(i));

  std::ostringstream jsonl;
  write_report_jsonl(jsonl, report);
  std::istringstream lines(jsonl.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    if (++n == 4) {
      EXPECT_TRUE(j.at("summary").get<bool>());
    }
  }
  EXPECT_EQ(n, 4u);
  std::ostringstream csv;
  write_report_csv(csv, report);
  EXPECT_EQ(csv.str().rfind("id,mel_l1,stoi,coarse_loss_hi,upper_band_energy_db,error\n", 0), 0u);
}

TEST(Corpus, MissingEstimateIsCountedAndWorkerCountIrrelevant) {
  const auto dir = support::scratch_dir("eval_missing");
  std::filesystem::create_directories(dir / "ref");
  std::filesystem::create_directories(dir / "est");
  std::vector<DegradationRecord> records;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto id = support::utterance_name(i);
    const auto s = support::synthetic_speech(20 + i, 1.0);
    write_wav(s, dir / "ref" / (id + ".wav"));
    if (i != 1) write_wav(add_noise(s, 10.0, i), dir / "est" / (id + ".wav"));
    records.push_back(sample_record(1, id));
  }
  write_manifest(dir / "manifest.jsonl", records);
  const auto a = evaluate_corpus(dir / "manifest.jsonl", dir / "est", dir / "ref", 1);
  const auto b = evaluate_corpus(dir / "manifest.jsonl", dir / "est", dir / "ref", 3);
  EXPECT_EQ(a.summary.errors, 1u);
  EXPECT_TRUE(a.utterances[1].error.has_value());
  std::ostringstream ja, jb;
  write_report_jsonl(ja, a);
  write_report_jsonl(jb, b);
  EXPECT_EQ(ja.str(), jb.str());
}
