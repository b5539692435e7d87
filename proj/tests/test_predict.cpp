#include <gtest/gtest.h>

#include <algorithm>

#include "bwe/predict.hpp"
#include "support/feature_corpus.hpp"
#include "support/fixtures.hpp"

using namespace bwe;

namespace {

CoarseSpectrum random_coarse(std::size_t frames, std::uint64_t seed) {
  Rng rng(seed);
  CoarseSpectrum c{FrameMatrix<double>(frames, 64)};
  for (auto& v : c.values.data) v = rng.uniform(-4.0, 1.0);
  return c;
}

double min_high_value(const std::vector<FeaturePair>& pairs) {
  double m = 0.0;
  for (const auto& p : pairs) {
    for (std::size_t t = 0; t < p.y_features.frames(); ++t) {
      for (std::size_t k = kCutoffBand; k < 64; ++k) m = std::min(m, p.y_features.values(t, k));
    }
  }
  return m;
}

}  // namespace

TEST(FeatureLoss, Examples) {
  const auto y = random_coarse(10, 1);
  EXPECT_EQ(feature_loss(y, y, 11), 0.0);
  auto plus = y;
  for (std::size_t t = 0; t < 10; ++t) {
    for (std::size_t k = 11; k < 64; ++k) plus.values(t, k) += 1.0;
  }
  EXPECT_NEAR(feature_loss(y, plus, 11), 1.0, 1e-12);
  EXPECT_NEAR(feature_loss_squared(y, plus, 11), 1.0, 1e-12);
  auto low = y;
  for (std::size_t t = 0; t < 10; ++t) low.values(t, 3) += 5.0;
  EXPECT_EQ(feature_loss(y, low, 11), 0.0);
  EXPECT_THROW(feature_loss(y, random_coarse(9, 2), 11), ContractError);
}

TEST(Oracle, ResidualConvention) {
  FeaturePair p{random_coarse(20, 3), random_coarse(20, 4), sample_record(1, "o")};
  const auto out = oracle_predict(p);
  EXPECT_EQ(feature_loss(p.y_features, out, 11), 0.0);
  for (std::size_t t = 0; t < 20; ++t) {
    for (std::size_t k = 0; k < 11; ++k) EXPECT_EQ(out.values(t, k), p.x_features.values(t, k));
  }
  p.y_features = p.x_features;
  EXPECT_EQ(oracle_predict(p), p.x_features);
}

TEST(Ridge, RecoversExactLinearMap) {
  const auto corpus = support::linear_feature_corpus(12, 120, 2, 5);
  ASSERT_GT(min_high_value(corpus.pairs), -4.5);
  std::vector<FeaturePair> train(corpus.pairs.begin(), corpus.pairs.begin() + 10);
  std::vector<FeaturePair> held(corpus.pairs.begin() + 10, corpus.pairs.end());
  const auto model = train_ridge(train, 2, 1e-8);
  EXPECT_EQ(model.high_bands(), 53u);
  EXPECT_EQ(model.input_dim(), 321u);
  double err = 0.0;
  for (const auto& p : held) err += feature_loss(p.y_features, predict(model, p.x_features), 11);
  EXPECT_LT(err / static_cast<double>(held.size()), 1e-6);
}

TEST(Ridge, LargeLambdaGivesColumnMeans) {
  const auto corpus = support::linear_feature_corpus(4, 100, 1, 6);
  const auto model = train_ridge(corpus.pairs, 1, 1e12);
  std::vector<double> means(53, 0.0);
  std::size_t frames = 0;
  for (const auto& p : corpus.pairs) {
    for (std::size_t t = 0; t < p.y_features.frames(); ++t, ++frames) {
      for (std::size_t k = 0; k < 53; ++k) means[k] += p.y_features.values(t, 11 + k);
    }
  }
  const auto y = predict(model, corpus.pairs[0].x_features);
  for (std::size_t k = 0; k < 53; ++k) {
    EXPECT_NEAR(y.values(5, 11 + k), means[k] / static_cast<double>(frames), 1e-6);
    for (std::size_t j = 0; j + 1 < model.input_dim(); ++j) EXPECT_NEAR(model.weight(k, j), 0.0, 1e-8);
  }
  const auto bias = bias_only_model(corpus.pairs, 1);
  for (std::size_t k = 0; k < 53; ++k) {
    EXPECT_NEAR(bias.weight(k, bias.input_dim() - 1), means[k] / static_cast<double>(frames), 1e-9);
  }
}

TEST(Ridge, TrainingLossBeatsBiasOnly) {
  const auto corpus = support::linear_feature_corpus(6, 100, 2, 7, 0.3);
  const auto model = train_ridge(corpus.pairs, 2, 1e-3);
  const auto bias = bias_only_model(corpus.pairs, 2);
  EXPECT_LE(evaluate_model(model, corpus.pairs).squared, evaluate_model(bias, corpus.pairs).squared);
  EXPECT_LE(evaluate_model(model, corpus.pairs).l1, evaluate_model(bias, corpus.pairs).l1);
}

TEST(Ridge, PairOrderDoesNotMatter) {
  auto corpus = support::linear_feature_corpus(6, 80, 1, 8, 0.1);
  const auto a = train_ridge(corpus.pairs, 1, 1e-3);
  std::reverse(corpus.pairs.begin(), corpus.pairs.end());
  std::swap(corpus.pairs[1], corpus.pairs[3]);
  const auto b = train_ridge(corpus.pairs, 1, 1e-3);
  EXPECT_EQ(a.weights, b.weights);
}

TEST(Ridge, TooFewFrames) {
  const auto corpus = support::linear_feature_corpus(1, 100, 2, 9);
  EXPECT_THROW(train_ridge(corpus.pairs, 2, 1e-3), ContractError);
  EXPECT_THROW(train_ridge({}, 2, 1e-3), ContractError);
}

TEST(Predict, ZeroWeightModelEmitsBias) {
  PredictorModel m;
  m.context = 1;
  m.config_hash = feature_config_hash();
  m.weights.assign(m.high_bands() * m.input_dim(), 0.0);
  for (std::size_t k = 0; k < m.high_bands(); ++k) m.weights[k * m.input_dim() + m.input_dim() - 1] = -1.5 + 0.01 * k;
  const auto x = random_coarse(7, 10);
  const auto y = predict(m, x);
  for (std::size_t t = 0; t < 7; ++t) {
    for (std::size_t k = 0; k < 11; ++k) EXPECT_EQ(y.values(t, k), x.values(t, k));
    for (std::size_t k = 11; k < 64; ++k) EXPECT_DOUBLE_EQ(y.values(t, k), -1.5 + 0.01 * (k - 11));
  }
}

TEST(Predict, Affine) {
  const auto corpus = support::linear_feature_corpus(4, 100, 2, 11, 0.1);
  const auto model = train_ridge(corpus.pairs, 2, 1e-2);
  const auto& x1 = corpus.pairs[0].x_features;
  const auto& x2 = corpus.pairs[1].x_features;
  const double a = 0.3;
  CoarseSpectrum mix = x1;
  for (std::size_t i = 0; i < mix.values.data.size(); ++i) {
    mix.values.data[i] = a * x1.values.data[i] + (1 - a) * x2.values.data[i];
  }
  const auto y1 = predict(model, x1), y2 = predict(model, x2), ym = predict(model, mix);
  for (std::size_t t = 0; t < 100; ++t) {
    for (std::size_t k = 11; k < 64; ++k) {
      // Only where the floor is inactive.
      if (y1.values(t, k) > -5.0 && y2.values(t, k) > -5.0 && ym.values(t, k) > -5.0) {
        EXPECT_NEAR(ym.values(t, k), a * y1.values(t, k) + (1 - a) * y2.values(t, k), 1e-9);
      }
    }
  }
}

TEST(Predict, EdgeFramesUseReplicatedContext) {
  const auto corpus = support::linear_feature_corpus(4, 100, 2, 12, 0.1);
  const auto model = train_ridge(corpus.pairs, 2, 1e-2);
  const auto x = random_coarse(5, 13);
  // Frame 0 with context radius 2 sees frames {0, 0, 0, 1, 2}.
  CoarseSpectrum padded{FrameMatrix<double>(7, 64)};
  for (std::size_t t = 0; t < 7; ++t) {
    const std::size_t src = t < 2 ? 0 : t - 2;
    std::copy_n(x.values.row(src), 64, padded.values.row(t));
  }
  const auto a = predict(model, x), b = predict(model, padded);
  for (std::size_t k = 11; k < 64; ++k) EXPECT_NEAR(a.values(0, k), b.values(2, k), 1e-12);
}

TEST(Predict, RejectsMismatches) {
  const auto corpus = support::linear_feature_corpus(2, 100, 1, 14);
  const auto model = train_ridge(corpus.pairs, 1, 1e-3);
  EXPECT_THROW(predict(model, corpus.pairs[0].x_features, 1234), ContractError);
  CoarseSpectrum wrong{FrameMatrix<double>(10, 32)};
  EXPECT_THROW(predict(model, wrong), ContractError);
}

TEST(Split, NinetyTenDeterministic) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < 100; ++i) ids.push_back(support::utterance_name(i));
  const auto s = split_train_validation(ids);
  EXPECT_EQ(s.train.size(), 90u);
  EXPECT_EQ(s.validation.size(), 10u);
  auto shuffled = ids;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto s2 = split_train_validation(shuffled);
  EXPECT_EQ(s.train, s2.train);
  EXPECT_EQ(s.validation, s2.validation);
  for (const auto& v : s.validation) EXPECT_EQ(std::count(s.train.begin(), s.train.end(), v), 0);
}

TEST(SelectRidge, PicksMinimumValidationLoss) {
  const auto corpus = support::linear_feature_corpus(8, 200, 1, 15, 0.1);
  std::vector<FeaturePair> train(corpus.pairs.begin(), corpus.pairs.begin() + 6);
  std::vector<FeaturePair> val(corpus.pairs.begin() + 6, corpus.pairs.end());
  const auto sel = select_ridge(train, val, 1);
  ASSERT_EQ(sel.validation_l1.size(), default_ridge_grid().size());
  const double chosen = evaluate_model(sel.model, val).l1;
  for (double l : sel.validation_l1) EXPECT_LE(chosen, l);
  EXPECT_LE(chosen, evaluate_model(bias_only_model(train, 1), val).l1);
}

TEST(ModelFile, RoundTripAndHeader) {
  const auto dir = support::scratch_dir("model");
  const auto corpus = support::linear_feature_corpus(2, 100, 1, 16);
  const auto model = train_ridge(corpus.pairs, 1, 1e-3);
  write_model(dir / "m.bwe", model);
  EXPECT_EQ(read_model(dir / "m.bwe"), model);
  std::ifstream in(dir / "m.bwe", std::ios::binary);
  char head[8];
  in.read(head, 8);
  EXPECT_EQ(std::string(head, 8), "BWELTV01");
  EXPECT_EQ(std::filesystem::file_size(dir / "m.bwe"), 8u + 12u + 8u + 8u + 8u * model.weights.size());
  std::ofstream(dir / "bad.bwe", std::ios::binary) << "BWELTV01";
  EXPECT_THROW(read_model(dir / "bad.bwe"), FormatError);
}

TEST(ConfigHash, SensitiveToGeometry) {
  StftConfig c;
  c.hop = 256;
  c.fft_size = 1024;
  EXPECT_NE(feature_config_hash(), feature_config_hash(GroupingMatrix{513, 64}, c));
  EXPECT_EQ(feature_config_hash(), feature_config_hash());
}
