#pragma once

// upsample -> excite -> predict -> build_response -> apply_ltv -> residual_mix

#include <optional>
#include <string>

#include "bwe/degrade.hpp"
#include "bwe/errors.hpp"
#include "bwe/excite.hpp"
#include "bwe/features.hpp"
#include "bwe/ltv.hpp"
#include "bwe/predict.hpp"
#include "bwe/resample.hpp"
#include "bwe/stft.hpp"

namespace bwe {

struct ExtendOptions {
  ExciterKind exciter;
  LtvMode ltv_mode = LtvMode::match;
  LtvOptions ltv;
};

inline CoarseSpectrum coarse_of(const Signal& s, const GroupingMatrix& g) { return compress(magnitude(stft(s)), g); }

/// Features of a degraded/reference pair on the 48 kHz grid. The reference is
/// trimmed or zero-padded to the upsampled length so frames line up.
inline FeaturePair make_feature_pair(const Signal& narrowband, const Signal& reference, const DegradationRecord& record) {
  require_rate(reference, kWidebandRate, "make_feature_pair");
  const GroupingMatrix g;
  const Signal up = upsample_6x(narrowband);
  return {coarse_of(up, g), coarse_of(fit_length(reference, up.size()), g), record};
}

/// Either the ground-truth reference (oracle) or a trained model supplies
/// the high-band envelope.
struct Predictor {
  const Signal* reference = nullptr;
  const PredictorModel* model = nullptr;

  static Predictor oracle(const Signal& ref) { return {&ref, nullptr}; }
  static Predictor ridge(const PredictorModel& m) { return {nullptr, &m}; }
};

struct ExtendResult {
  Signal output;
  Signal upsampled;
  Signal excited;
  CoarseSpectrum predicted;
};

inline ExtendResult extend_utterance_detailed(const Signal& narrowband, const DegradationRecord& record,
                                              const Predictor& predictor, const ExtendOptions& options = {}) {
  require_rate(narrowband, kNarrowbandRate, "extend");
  validate(record);
  require((predictor.reference != nullptr) != (predictor.model != nullptr), "extend: exactly one predictor required");
  const GroupingMatrix g;

  ExtendResult r;
  r.upsampled = upsample_6x(narrowband);
  r.excited = excite(r.upsampled, options.exciter, record);
  const CoarseSpectrum x = coarse_of(r.upsampled, g);
  if (predictor.reference) {
    require_rate(*predictor.reference, kWidebandRate, "extend: reference");
    FeaturePair pair{x, coarse_of(fit_length(*predictor.reference, r.upsampled.size()), g), record};
    r.predicted = oracle_predict(pair);
  } else {
    require(predictor.model->cutoff_band == record.cutoff_band_k, "extend: model cutoff band differs from record");
    r.predicted = predict(*predictor.model, x);
  }
  const LtvResponse response = build_response(r.predicted, g, options.ltv_mode);
  const Signal filtered = apply_ltv(r.excited, response, record, options.ltv);
  r.output = residual_mix(r.upsampled, filtered);
  return r;
}

inline Signal extend_utterance(const Signal& narrowband, const DegradationRecord& record, const Predictor& predictor,
                               const ExtendOptions& options = {}) {
  return extend_utterance_detailed(narrowband, record, predictor, options).output;
}

}  // namespace bwe
