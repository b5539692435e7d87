#pragma once

// Envelope predictors: an oracle that reads the ground-truth features, and a
// closed-form ridge regression from a window of input coarse frames to the
// missing high bands. Both keep the input's bands below the cutoff unchanged.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "bwe/degrade.hpp"
#include "bwe/errors.hpp"
#include "bwe/features.hpp"
#include "bwe/random.hpp"
#include "bwe/stft.hpp"

namespace bwe {

/// Fingerprint of everything that shapes the coarse features.
inline std::uint64_t feature_config_hash(const GroupingMatrix& g = GroupingMatrix{}, const StftConfig& config = {}) {
  std::ostringstream s;
  s << "fft=" << config.fft_size << ";hop=" << config.hop << ";rate=" << config.sample_rate
    << ";window=hann-periodic;bins=" << g.bins() << ";eps=1e-5;edges=";
  for (auto e : g.band_edges()) s << e << ',';
  return fnv1a64(s.str());
}

struct FeaturePair {
  CoarseSpectrum x_features;
  CoarseSpectrum y_features;
  DegradationRecord record;
};

/// Mean |y - y_hat| over all frames and the bands at or above k.
inline double feature_loss(const CoarseSpectrum& y, const CoarseSpectrum& y_hat, std::size_t k) {
  require(y.frames() == y_hat.frames() && y.bands() == y_hat.bands(), "feature_loss: shape mismatch");
  require(k < y.bands(), "feature_loss: band index out of range");
  if (y.frames() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t t = 0; t < y.frames(); ++t) {
    for (std::size_t b = k; b < y.bands(); ++b) sum += std::abs(y.values(t, b) - y_hat.values(t, b));
  }
  return sum / static_cast<double>(y.frames() * (y.bands() - k));
}

/// Mean squared difference over the same region as feature_loss.
inline double feature_loss_squared(const CoarseSpectrum& y, const CoarseSpectrum& y_hat, std::size_t k) {
  require(y.frames() == y_hat.frames() && y.bands() == y_hat.bands(), "feature_loss_squared: shape mismatch");
  require(k < y.bands(), "feature_loss_squared: band index out of range");
  if (y.frames() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t t = 0; t < y.frames(); ++t) {
    for (std::size_t b = k; b < y.bands(); ++b) {
      const double d = y.values(t, b) - y_hat.values(t, b);
      sum += d * d;
    }
  }
  return sum / static_cast<double>(y.frames() * (y.bands() - k));
}

/// Ground-truth high bands over the input's low bands.
inline CoarseSpectrum oracle_predict(const FeaturePair& pair) {
  const auto& x = pair.x_features;
  const auto& y = pair.y_features;
  require(x.frames() == y.frames() && x.bands() == y.bands(), "oracle_predict: feature shapes differ");
  CoarseSpectrum out = x;
  for (std::size_t t = 0; t < x.frames(); ++t) {
    for (std::size_t b = pair.record.cutoff_band_k; b < x.bands(); ++b) out.values(t, b) = y.values(t, b);
  }
  return out;
}

struct PredictorModel {
  std::uint32_t bands = kCoarseBands;
  std::uint32_t cutoff_band = kCutoffBand;
  std::uint32_t context = 2;
  double ridge = 1e-3;
  std::uint64_t config_hash = 0;
  /// (bands - cutoff_band) x input_dim, row-major; the last column is the bias.
  std::vector<double> weights;

  std::size_t high_bands() const { return bands - cutoff_band; }
  std::size_t input_dim() const { return static_cast<std::size_t>(bands) * (2 * context + 1) + 1; }
  double weight(std::size_t band, std::size_t col) const { return weights[band * input_dim() + col]; }

  friend bool operator==(const PredictorModel&, const PredictorModel&) = default;
};

namespace predict_detail {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Context-window design matrix with edge-replicated frames and a bias column.
inline Matrix design_matrix(const CoarseSpectrum& x, std::size_t context) {
  const std::size_t bands = x.bands();
  const std::size_t dim = bands * (2 * context + 1) + 1;
  Matrix a(static_cast<Eigen::Index>(x.frames()), static_cast<Eigen::Index>(dim));
  const auto last = static_cast<std::ptrdiff_t>(x.frames()) - 1;
  for (std::size_t t = 0; t < x.frames(); ++t) {
    std::size_t col = 0;
    for (std::ptrdiff_t o = -static_cast<std::ptrdiff_t>(context); o <= static_cast<std::ptrdiff_t>(context); ++o) {
      const auto src = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(t) + o, 0, last));
      for (std::size_t b = 0; b < bands; ++b) a(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(col++)) = x.values(src, b);
    }
    a(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(col)) = 1.0;
  }
  return a;
}

inline Matrix high_targets(const CoarseSpectrum& y, std::size_t cutoff) {
  Matrix b(static_cast<Eigen::Index>(y.frames()), static_cast<Eigen::Index>(y.bands() - cutoff));
  for (std::size_t t = 0; t < y.frames(); ++t) {
    for (std::size_t k = cutoff; k < y.bands(); ++k) {
      b(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k - cutoff)) = y.values(t, k);
    }
  }
  return b;
}

inline std::vector<const FeaturePair*> canonical_order(const std::vector<FeaturePair>& pairs) {
  std::vector<const FeaturePair*> order;
  order.reserve(pairs.size());
  for (const auto& p : pairs) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(), [](const FeaturePair* a, const FeaturePair* b) {
    return a->record.utterance_id < b->record.utterance_id;
  });
  return order;
}

}  // namespace predict_detail

/// Normal-equation sums for ridge regression, accumulated utterance by
/// utterance in id order so the result does not depend on input order.
struct RidgeSystem {
  predict_detail::Matrix gram;   // A^T A
  predict_detail::Matrix cross;  // A^T B
  std::size_t frames = 0;
  std::size_t bands = 0;
  std::size_t cutoff = 0;
  std::size_t context = 0;
};

inline RidgeSystem accumulate_ridge(const std::vector<FeaturePair>& pairs, std::size_t context) {
  require(!pairs.empty(), "train_ridge: no training pairs");
  RidgeSystem sys;
  sys.bands = pairs.front().x_features.bands();
  sys.cutoff = pairs.front().record.cutoff_band_k;
  sys.context = context;
  require(sys.cutoff < sys.bands, "train_ridge: cutoff band out of range");
  const auto dim = static_cast<Eigen::Index>(sys.bands * (2 * context + 1) + 1);
  const auto high = static_cast<Eigen::Index>(sys.bands - sys.cutoff);
  sys.gram = predict_detail::Matrix::Zero(dim, dim);
  sys.cross = predict_detail::Matrix::Zero(dim, high);
  for (const FeaturePair* p : predict_detail::canonical_order(pairs)) {
    require(p->x_features.bands() == sys.bands && p->y_features.bands() == sys.bands,
            "train_ridge: pairs disagree on band count");
    require(p->x_features.frames() == p->y_features.frames(), "train_ridge: pair frame counts differ");
    require(p->record.cutoff_band_k == sys.cutoff, "train_ridge: pairs disagree on cutoff band");
    if (p->x_features.frames() == 0) continue;
    const auto a = predict_detail::design_matrix(p->x_features, context);
    const auto b = predict_detail::high_targets(p->y_features, sys.cutoff);
    sys.gram.noalias() += a.transpose() * a;
    sys.cross.noalias() += a.transpose() * b;
    sys.frames += p->x_features.frames();
  }
  return sys;
}

/// Solves (A^T A + lambda D) W = A^T B, where D is the identity with the bias
/// entry zeroed so the intercept is not shrunk.
inline PredictorModel solve_ridge(const RidgeSystem& sys, double lambda, std::uint64_t config_hash) {
  require(lambda >= 0.0 && std::isfinite(lambda), "train_ridge: ridge must be a finite non-negative value");
  const auto dim = sys.gram.rows();
  require(sys.frames > static_cast<std::size_t>(dim),
          "train_ridge: " + std::to_string(sys.frames) + " frames do not exceed feature dimension " +
              std::to_string(dim));
  predict_detail::Matrix lhs = sys.gram;
  for (Eigen::Index i = 0; i + 1 < dim; ++i) lhs(i, i) += lambda;
  const Eigen::LLT<predict_detail::Matrix> llt(lhs);
  if (llt.info() != Eigen::Success) throw NumericalError("train_ridge: normal equations are not positive definite");
  const predict_detail::Matrix w = llt.solve(sys.cross);
  if (!w.allFinite()) throw NumericalError("train_ridge: non-finite solution");

  PredictorModel model;
  model.bands = static_cast<std::uint32_t>(sys.bands);
  model.cutoff_band = static_cast<std::uint32_t>(sys.cutoff);
  model.context = static_cast<std::uint32_t>(sys.context);
  model.ridge = lambda;
  model.config_hash = config_hash;
  model.weights.resize(model.high_bands() * model.input_dim());
  for (std::size_t k = 0; k < model.high_bands(); ++k) {
    for (std::size_t c = 0; c < model.input_dim(); ++c) {
      model.weights[k * model.input_dim() + c] = w(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k));
    }
  }
  return model;
}

inline PredictorModel train_ridge(const std::vector<FeaturePair>& pairs, std::size_t context, double lambda,
                                  std::uint64_t config_hash = feature_config_hash()) {
  return solve_ridge(accumulate_ridge(pairs, context), lambda, config_hash);
}

/// Bands below the cutoff are copied from x; the rest come from the linear
/// map, floored at log10(eps).
inline CoarseSpectrum predict(const PredictorModel& model, const CoarseSpectrum& x,
                              std::uint64_t config_hash = feature_config_hash()) {
  if (x.bands() != model.bands) {
    throw ContractError("predict: model expects " + std::to_string(model.bands) + " bands, features have " +
                        std::to_string(x.bands()));
  }
  if (config_hash != model.config_hash) throw ContractError("predict: feature configuration hash mismatch");
  require(model.weights.size() == model.high_bands() * model.input_dim(), "predict: malformed weight matrix");

  CoarseSpectrum out = x;
  if (x.frames() == 0) return out;
  const auto a = predict_detail::design_matrix(x, model.context);
  const Eigen::Map<const predict_detail::Matrix> w(model.weights.data(), static_cast<Eigen::Index>(model.high_bands()),
                                                   static_cast<Eigen::Index>(model.input_dim()));
  const predict_detail::Matrix y = a * w.transpose();
  const double floor = std::log10(kFeatureEpsilon);
  for (std::size_t t = 0; t < x.frames(); ++t) {
    for (std::size_t k = 0; k < model.high_bands(); ++k) {
      out.values(t, model.cutoff_band + k) = std::max(floor, y(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Train/validation split and ridge selection

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> validation;
};

/// 90/10 split by utterance, ordered by id hash (ties broken by id).
inline Split split_train_validation(std::vector<std::string> ids, double train_fraction = 0.9) {
  std::sort(ids.begin(), ids.end(), [](const std::string& a, const std::string& b) {
    const auto ha = fnv1a64(a), hb = fnv1a64(b);
    return ha != hb ? ha < hb : a < b;
  });
  const auto n_train = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(ids.size())));
  Split s;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, ids.size())));
  s.validation.assign(ids.begin() + static_cast<std::ptrdiff_t>(s.train.size()), ids.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  return s;
}

inline const std::vector<double>& default_ridge_grid() {
  static const std::vector<double> grid{1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  return grid;
}

/// Per-utterance-averaged losses of a model over a set of pairs.
struct LossSummary {
  double l1 = 0.0;
  double squared = 0.0;
};

inline LossSummary evaluate_model(const PredictorModel& model, const std::vector<FeaturePair>& pairs,
                                  std::uint64_t config_hash = feature_config_hash()) {
  LossSummary s;
  std::size_t frames = 0;
  for (const auto& p : pairs) {
    const auto y_hat = predict(model, p.x_features, config_hash);
    const auto n = p.y_features.frames();
    s.l1 += feature_loss(p.y_features, y_hat, model.cutoff_band) * static_cast<double>(n);
    s.squared += feature_loss_squared(p.y_features, y_hat, model.cutoff_band) * static_cast<double>(n);
    frames += n;
  }
  if (frames > 0) {
    s.l1 /= static_cast<double>(frames);
    s.squared /= static_cast<double>(frames);
  }
  return s;
}

/// Model that ignores its input and predicts the training mean of each band.
inline PredictorModel bias_only_model(const std::vector<FeaturePair>& pairs, std::size_t context,
                                      std::uint64_t config_hash = feature_config_hash()) {
  const RidgeSystem sys = accumulate_ridge(pairs, context);
  PredictorModel model;
  model.bands = static_cast<std::uint32_t>(sys.bands);
  model.cutoff_band = static_cast<std::uint32_t>(sys.cutoff);
  model.context = static_cast<std::uint32_t>(context);
  model.ridge = std::numeric_limits<double>::infinity();
  model.config_hash = config_hash;
  model.weights.assign(model.high_bands() * model.input_dim(), 0.0);
  const auto bias_row = static_cast<Eigen::Index>(model.input_dim() - 1);
  for (std::size_t k = 0; k < model.high_bands(); ++k) {
    // Bias column of A^T B is the column sum of B.
    model.weights[k * model.input_dim() + model.input_dim() - 1] =
        sys.cross(bias_row, static_cast<Eigen::Index>(k)) / static_cast<double>(sys.frames);
  }
  return model;
}

struct RidgeSelection {
  PredictorModel model;
  std::vector<double> grid;
  std::vector<double> validation_l1;  // one entry per grid value
};

/// Fits every grid value on the training pairs and keeps the one with the
/// lowest validation L1 loss (first wins on ties).
inline RidgeSelection select_ridge(const std::vector<FeaturePair>& train, const std::vector<FeaturePair>& validation,
                                   std::size_t context, const std::vector<double>& grid = default_ridge_grid(),
                                   std::uint64_t config_hash = feature_config_hash()) {
  require(!grid.empty(), "select_ridge: empty grid");
  require(!validation.empty(), "select_ridge: no validation pairs");
  const RidgeSystem sys = accumulate_ridge(train, context);
  RidgeSelection sel;
  sel.grid = grid;
  double best = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    PredictorModel m = solve_ridge(sys, lambda, config_hash);
    const double loss = evaluate_model(m, validation, config_hash).l1;
    sel.validation_l1.push_back(loss);
    if (loss < best) {
      best = loss;
      sel.model = std::move(m);
    }
  }
  return sel;
}

// ---------------------------------------------------------------------------
// Model file: "BWELTV01", u32 K, u32 k, u32 c, f64 lambda, u64 hash, f64 weights.

inline constexpr char kModelMagic[9] = "BWELTV01";

inline void write_model(const std::filesystem::path& path, const PredictorModel& m) {
  require(m.weights.size() == m.high_bands() * m.input_dim(), "write_model: malformed weight matrix");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kModelMagic, 8);
  dump_detail::put<std::uint32_t>(out, m.bands);
  dump_detail::put<std::uint32_t>(out, m.cutoff_band);
  dump_detail::put<std::uint32_t>(out, m.context);
  dump_detail::put<double>(out, m.ridge);
  dump_detail::put<std::uint64_t>(out, m.config_hash);
  out.write(reinterpret_cast<const char*>(m.weights.data()), static_cast<std::streamsize>(m.weights.size() * sizeof(double)));
  if (!out) throw IoError("short write to " + path.string());
}

inline PredictorModel read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model " + path.string());
  char head[8];
  if (!in.read(head, 8) || std::string(head, 8) != std::string(kModelMagic, 8)) {
    throw FormatError(path.string() + ": not a predictor model file");
  }
  const std::string name = path.string();
  PredictorModel m;
  m.bands = dump_detail::get<std::uint32_t>(in, name);
  m.cutoff_band = dump_detail::get<std::uint32_t>(in, name);
  m.context = dump_detail::get<std::uint32_t>(in, name);
  m.ridge = dump_detail::get<double>(in, name);
  m.config_hash = dump_detail::get<std::uint64_t>(in, name);
  if (m.cutoff_band >= m.bands || m.context > 64) throw FormatError(name + ": implausible model header");
  m.weights.resize(m.high_bands() * m.input_dim());
  if (!in.read(reinterpret_cast<char*>(m.weights.data()), static_cast<std::streamsize>(m.weights.size() * sizeof(double)))) {
    throw FormatError(name + ": truncated weight matrix");
  }
  return m;
}

}  // namespace bwe
