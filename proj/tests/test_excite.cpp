#include <gtest/gtest.h>

#include "bwe/eval.hpp"
#include "bwe/excite.hpp"
#include "support/fixtures.hpp"

using namespace bwe;

namespace {

struct Case {
  Signal input;  // upsampled bandlimited signal
  DegradationRecord record;
};

Case make_case(std::uint64_t seed, double seconds = 1.0) {
  const auto r = sample_record(seed, "utt" + std::to_string(seed));
  return {upsample_6x(degrade_to_8k(support::synthetic_speech(seed, seconds), r)), r};
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

TEST(Exciter, ParseVariant) {
  EXPECT_EQ(parse_exciter_variant("noise"), ExciterVariant::noise);
  EXPECT_EQ(parse_exciter_variant("fold"), ExciterVariant::fold);
  EXPECT_EQ(parse_exciter_variant("rect"), ExciterVariant::rect);
  EXPECT_THROW(parse_exciter_variant("sawtooth"), ContractError);
  for (auto v : {ExciterVariant::noise, ExciterVariant::fold, ExciterVariant::rect}) {
    EXPECT_EQ(parse_exciter_variant(to_string(v)), v);
  }
}

TEST(Exciter, NoiseUpperBandIsFlat) {
  const GroupingMatrix g;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto c = make_case(seed);
    const auto out = excite(c.input, ExciterKind{ExciterVariant::noise, 5, {}}, c.record);
    const double after = mean(flatness(compress(magnitude(stft(out)), g), kCutoffBand));
    const double before = mean(flatness(compress(magnitude(stft(c.input)), g), kCutoffBand));
    EXPECT_LE(after, 0.6);
    EXPECT_LT(after, before - 1.0);
  }
}

TEST(Exciter, PassbandPreserved) {
  for (auto variant : {ExciterVariant::noise, ExciterVariant::fold, ExciterVariant::rect}) {
    const auto c = make_case(4);
    const auto out = excite(c.input, ExciterKind{variant, 1, {}}, c.record);
    const auto a = project_band(out, c.record.f_lo, c.record.f_hi);
    const auto b = project_band(c.input, c.record.f_lo, c.record.f_hi);
    EXPECT_LT(support::relative_error(b.samples, a.samples), 1e-6) << to_string(variant);
    // Nothing is added at or below f_hi at all.
    Signal added = out;
    for (std::size_t i = 0; i < added.size(); ++i) added.samples[i] -= c.input.samples[i];
    EXPECT_LE(band_energy_db(added, 0.0, c.record.f_hi), -200.0 + 1e-9) << to_string(variant);
  }
}

TEST(Exciter, UpperBandEnergyPositive) {
  const auto c = make_case(5, 0.5);
  for (auto variant : {ExciterVariant::noise, ExciterVariant::fold, ExciterVariant::rect}) {
    const auto out = excite(c.input, ExciterKind{variant, 1, {}}, c.record);
    EXPECT_GT(band_energy_db(out, 4500.0, 24000.0), -60.0) << to_string(variant);
  }
  Signal silent;
  silent.samples.assign(24000, 0.0);
  const auto noise = excite(silent, ExciterKind{ExciterVariant::noise, 1, {}}, c.record);
  EXPECT_GT(support::l2(noise.samples), 0.0);
}

TEST(Exciter, ZeroInputWithFixedLevel) {
  const GroupingMatrix g;
  Signal silent;
  silent.samples.assign(48000, 0.0);
  const auto r = sample_record(9, "z");
  const double level = 0.01;
  const auto out = excite(silent, ExciterKind{ExciterVariant::noise, 3, level}, r);
  const auto mag = magnitude(stft(out));
  // Passband stays zero.
  EXPECT_LE(band_energy_db(out, 0.0, r.f_hi), -200.0 + 1e-9);
  // The mean upper-band bin magnitude of interior frames sits at the level.
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 4; t + 4 < mag.frames(); ++t) {
    for (std::size_t b = g.band_begin(kCutoffBand); b < 1025; ++b, ++n) sum += mag.values(t, b);
  }
  EXPECT_NEAR(sum / static_cast<double>(n), level, 0.05 * level);
}

TEST(Exciter, NoiseDeterministicPerSeed) {
  const auto c = make_case(6, 0.5);
  const ExciterKind kind{ExciterVariant::noise, 11, {}};
  EXPECT_EQ(excite(c.input, kind, c.record), excite(c.input, kind, c.record));
  EXPECT_NE(excite(c.input, kind, c.record), excite(c.input, ExciterKind{ExciterVariant::noise, 12, {}}, c.record));
}

TEST(Exciter, FoldMirrorsSinePartners) {
  DegradationRecord r;
  r.f_lo = 0.0;
  r.f_hi = 3750.0;
  const double f0 = 40 * 23.4375;  // STFT bin 40
  // Two seconds: 0.5 Hz DFT bins, edge bin 7500, copies of width 7501 bins.
  const auto x = support::sine(96000, f0, 0.3);
  const auto out = excite(x, ExciterKind{ExciterVariant::fold, 0, {}}, r);
  // Mirrored at 6563 Hz, shifted at 8438.5 Hz, then 14064 and 15939.5 Hz.
  const auto mag = magnitude(stft(out));
  const std::size_t t = mag.frames() / 2;
  for (std::size_t partner : {280u, 360u, 600u, 680u}) {
    EXPECT_NEAR(mag.values(t, partner), mag.values(t, 40), 0.01 * mag.values(t, 40)) << partner;
  }
  for (std::size_t quiet : {200u, 320u, 500u, 800u}) EXPECT_LT(mag.values(t, quiet), 1e-5 * mag.values(t, 40)) << quiet;
}

TEST(Exciter, Flatness) {
  CoarseSpectrum c{FrameMatrix<double>(2, 64)};
  for (std::size_t k = 0; k < 64; ++k) c.values(0, k) = k < 11 ? 2.0 : -1.0;
  for (std::size_t k = 0; k < 64; ++k) c.values(1, k) = -1.0;
  c.values(1, 30) = 0.0;
  const auto f = flatness(c, 11);
  EXPECT_DOUBLE_EQ(f[0], 0.0);
  EXPECT_DOUBLE_EQ(f[1], 1.0);
  EXPECT_THROW(flatness(c, 64), ContractError);
}

TEST(Exciter, RejectsBadInput) {
  const auto c = make_case(7, 0.25);
  EXPECT_THROW(excite(c.input, ExciterKind{ExciterVariant::noise, 0, -1.0}, c.record), ContractError);
  EXPECT_THROW(excite(support::sine(100, 100.0, 0.5, 8000), ExciterKind{}, c.record), ContractError);
  auto bad = c.record;
  bad.f_hi = 5000.0;
  EXPECT_THROW(excite(c.input, ExciterKind{}, bad), ContractError);
}
