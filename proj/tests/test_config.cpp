#include <gtest/gtest.h>

#include <cstdlib>

#include "bwe/run_config.hpp"
#include "support/fixtures.hpp"

using namespace bwe;

namespace {

RunConfig populated() {
  RunConfig c;
  c.global_seed = 18446744073709551557ull;
  c.workers = 3;
  c.encoding = WavEncoding::pcm16;
  c.degrade_in_dir = "/data/wide";
  c.degrade_out_dir = "out dir/with spaces";
  c.extend_in_dir = "narrow";
  c.extend_out_dir = "ext";
  c.references = "wide";
  c.predictor = "models/ridge.bwe";
  c.exciter = {ExciterVariant::fold, 99, 0.1 + 0.2};
  c.ltv_mode = LtvMode::direct;
  c.gain_ceiling_db = 33.3;
  c.train_in_dir = "narrow";
  c.train_references = "wide";
  c.model_out = "m.bwe";
  c.context = 4;
  c.ridge = {1e-5, 0.1 + 0.2, 1.0 / 3.0};
  c.eval_estimates = "ext";
  c.eval_references = "wide";
  c.eval_out = "report.csv";
  c.eval_csv = true;
  c.features_in = "a.wav";
  c.features_out = "a.feat";
  c.features_kind = "mel";
  c.features_csv = true;
  return c;
}

}  // namespace

TEST(RunConfig, RoundTripIsLossless) {
  for (const auto& c : {RunConfig{}, populated()}) {
    const auto text = serialize(c);
    EXPECT_EQ(parse_run_config(text), c) << text;
    EXPECT_EQ(serialize(parse_run_config(text)), text);
  }
}

TEST(RunConfig, FlatLevelAuto) {
  RunConfig c;
  c.exciter.flat_level = 0.25;
  auto back = parse_run_config(serialize(c));
  EXPECT_EQ(back.exciter.flat_level, 0.25);
  back = parse_run_config("[extend]\nflat_level = auto\n", back);
  EXPECT_FALSE(back.exciter.flat_level.has_value());
}

TEST(RunConfig, UnknownKeysAndSectionsRejected) {
  EXPECT_THROW(parse_run_config("[global]\ncolour = blue\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[nonsense]\n"), ConfigError);
  EXPECT_THROW(parse_run_config("seed = 1\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[global]\nseed\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[global\n"), ConfigError);
}

TEST(RunConfig, BadValuesRejected) {
  EXPECT_THROW(parse_run_config("[global]\nseed = -1\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[global]\nseed = 12x\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[global]\nencoding = mp3\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[extend]\nexciter = saw\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[extend]\nltv_mode = causal\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[extend]\nflat_level = 0\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[train-predictor]\nridge = 1e-3,abc\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[evaluate]\ncsv = yes\n"), ConfigError);
}

TEST(RunConfig, CommentsBlankLinesAndLayering) {
  const auto c = parse_run_config("# comment\n\n; other\n[global]\n  seed   =  7  \n[extend]\nexciter=rect\n");
  EXPECT_EQ(c.global_seed, 7u);
  EXPECT_EQ(c.exciter.variant, ExciterVariant::rect);
  RunConfig base;
  base.workers = 5;
  EXPECT_EQ(parse_run_config("[global]\nseed = 1\n", base).workers, 5u);
}

TEST(RunConfig, SetValueUsesFileParser) {
  RunConfig c;
  set_config_value(c, "extend", "gain_ceiling_db", "12.5");
  EXPECT_EQ(c.gain_ceiling_db, 12.5);
  EXPECT_THROW(set_config_value(c, "extend", "nope", "1"), ConfigError);
}

TEST(RunConfig, EnvironmentSeedOverride) {
  RunConfig c;
  c.global_seed = 1;
  ::setenv("BWE_SEED", "12345", 1);
  apply_environment(c);
  EXPECT_EQ(c.global_seed, 12345u);
  ::setenv("BWE_SEED", "bad", 1);
  EXPECT_THROW(apply_environment(c), ConfigError);
  ::unsetenv("BWE_SEED");
  apply_environment(c);
  EXPECT_EQ(c.global_seed, 12345u);
}

TEST(RunConfig, RunLockAndFileLoading) {
  const auto dir = support::scratch_dir("config");
  const auto c = populated();
  write_run_lock(dir, c);
  EXPECT_EQ(load_run_config(dir / "run.lock"), c);
  EXPECT_THROW(load_run_config(dir / "missing.cfg"), ConfigError);
}
