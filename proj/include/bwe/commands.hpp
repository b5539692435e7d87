#pragma once

// Subcommand drivers. Each validates its configuration completely before it
// creates or writes anything, then processes utterances in parallel. Return
// value is the process exit code: 0 success, 1 some utterances failed.
// Configuration and contract problems are thrown (ConfigError, ContractError)
// and map to exit code 2 in the CLI.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bwe/degrade.hpp"
#include "bwe/errors.hpp"
#include "bwe/eval.hpp"
#include "bwe/features.hpp"
#include "bwe/parallel.hpp"
#include "bwe/pipeline.hpp"
#include "bwe/predict.hpp"
#include "bwe/run_config.hpp"
#include "bwe/stft.hpp"
#include "bwe/wav.hpp"

namespace bwe {

namespace fs = std::filesystem;

namespace cmd_detail {

inline std::size_t workers(const RunConfig& c) { return c.workers == 0 ? default_worker_count() : c.workers; }

inline void require_dir(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is not set");
  if (!fs::is_directory(path)) throw ConfigError(what + " '" + path + "' is not a directory");
}

inline void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is not set");
  if (!fs::is_regular_file(path)) throw ConfigError(what + " '" + path + "' does not exist");
}

/// *.wav files directly under dir, sorted by name.
inline std::vector<fs::path> list_wavs(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

struct Failure {
  std::string id;
  std::string message;
};

/// Sorted failure list, printed to err. Returns the exit code.
inline int report_failures(std::vector<std::optional<Failure>> slots, std::ostream& err) {
  std::vector<Failure> failures;
  for (auto& f : slots) {
    if (f) failures.push_back(std::move(*f));
  }
  std::sort(failures.begin(), failures.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (const auto& f : failures) err << "error: " << f.id << ": " << f.message << '\n';
  return failures.empty() ? 0 : 1;
}

inline fs::path default_manifest(const std::string& configured, const std::string& dir) {
  return configured.empty() ? fs::path(dir) / "manifest.jsonl" : fs::path(configured);
}

inline std::map<std::string, DegradationRecord> index_manifest(const fs::path& path) {
  std::map<std::string, DegradationRecord> out;
  for (auto& r : read_manifest(path)) {
    const std::string id = r.utterance_id;
    if (!out.emplace(id, std::move(r)).second) throw ContractError(path.string() + ": duplicate id '" + id + "'");
  }
  return out;
}

/// Resolved predictor for extend: either the references directory or a
/// model whose feature hash has been checked.
struct PredictorSource {
  std::optional<fs::path> references;
  std::optional<PredictorModel> model;
};

inline PredictorSource resolve_predictor(const RunConfig& c) {
  PredictorSource p;
  if (c.predictor == "oracle") {
    if (c.references.empty()) throw ConfigError("oracle predictor requires a references directory");
    require_dir(c.references, "references");
    p.references = c.references;
    return p;
  }
  require_file(c.predictor, "predictor model");
  p.model = read_model(c.predictor);
  if (p.model->config_hash != feature_config_hash()) {
    throw ContractError("predictor model '" + c.predictor + "' was trained with a different feature configuration");
  }
  if (p.model->cutoff_band != kCutoffBand || p.model->bands != kCoarseBands) {
    throw ContractError("predictor model '" + c.predictor + "' has an incompatible band layout");
  }
  return p;
}

inline ExtendOptions extend_options(const RunConfig& c) {
  if (!std::isfinite(c.gain_ceiling_db)) throw ConfigError("gain_ceiling_db must be finite");
  if (c.exciter.flat_level && !(*c.exciter.flat_level > 0.0)) throw ConfigError("flat_level must be positive");
  ExtendOptions o;
  o.exciter = c.exciter;
  o.ltv_mode = c.ltv_mode;
  o.ltv.gain_ceiling_db = c.gain_ceiling_db;
  return o;
}

inline Signal extend_one(const fs::path& input, const DegradationRecord& record, const PredictorSource& p,
                         const ExtendOptions& options) {
  const Signal narrow = read_wav(input);
  if (p.model) return extend_utterance(narrow, record, Predictor::ridge(*p.model), options);
  const Signal reference = read_wav(*p.references / (record.utterance_id + ".wav"));
  return extend_utterance(narrow, record, Predictor::oracle(reference), options);
}

}  // namespace cmd_detail

// ---------------------------------------------------------------------------

inline int cmd_degrade(const RunConfig& c, std::ostream& err = std::cerr) {
  using namespace cmd_detail;
  require_dir(c.degrade_in_dir, "degrade input directory");
  if (c.degrade_out_dir.empty()) throw ConfigError("degrade output directory is not set");
  const fs::path manifest = default_manifest(c.degrade_manifest, c.degrade_out_dir);
  const auto files = list_wavs(c.degrade_in_dir);

  fs::create_directories(c.degrade_out_dir);
  if (files.empty()) err << "warning: no .wav files in " << c.degrade_in_dir << '\n';

  std::vector<std::optional<DegradationRecord>> records(files.size());
  std::vector<std::optional<Failure>> failures(files.size());
  parallel_for(files.size(), workers(c), [&](std::size_t i) {
    const std::string id = files[i].stem().string();
    try {
      const Signal wide = read_wav(files[i]);
      if (wide.sample_rate != kWidebandRate) {
        throw UnsupportedError("expected 48000 Hz input, got " + std::to_string(wide.sample_rate) + " Hz");
      }
      const DegradationRecord r = sample_record(c.global_seed, id);
      write_wav(degrade_to_8k(wide, r), fs::path(c.degrade_out_dir) / (id + ".wav"), c.encoding);
      records[i] = r;
    } catch (const std::exception& e) {
      failures[i] = Failure{id, e.what()};
    }
  });

  std::vector<DegradationRecord> ok;
  for (auto& r : records) {
    if (r) ok.push_back(std::move(*r));
  }
  write_manifest(manifest, ok);
  write_run_lock(c.degrade_out_dir, c);
  return report_failures(std::move(failures), err);
}

inline int cmd_extend(const RunConfig& c, std::ostream& err = std::cerr) {
  using namespace cmd_detail;
  require_dir(c.extend_in_dir, "extend input directory");
  if (c.extend_out_dir.empty()) throw ConfigError("extend output directory is not set");
  const fs::path manifest = default_manifest(c.extend_manifest, c.extend_in_dir);
  if (!fs::is_regular_file(manifest)) throw ConfigError("manifest '" + manifest.string() + "' does not exist");
  const auto options = extend_options(c);
  const auto predictor = resolve_predictor(c);
  const auto records = read_manifest(manifest);

  fs::create_directories(c.extend_out_dir);
  std::vector<std::optional<Failure>> failures(records.size());
  parallel_for(records.size(), workers(c), [&](std::size_t i) {
    const auto& r = records[i];
    try {
      const Signal out = extend_one(fs::path(c.extend_in_dir) / (r.utterance_id + ".wav"), r, predictor, options);
      write_wav(out, fs::path(c.extend_out_dir) / (r.utterance_id + ".wav"), c.encoding);
    } catch (const std::exception& e) {
      failures[i] = Failure{r.utterance_id, e.what()};
    }
  });
  // Carry the records of the extended utterances along so the output
  // directory can be evaluated directly.
  std::vector<DegradationRecord> done;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!failures[i]) done.push_back(records[i]);
  }
  write_manifest(fs::path(c.extend_out_dir) / "manifest.jsonl", done);
  write_run_lock(c.extend_out_dir, c);
  return report_failures(std::move(failures), err);
}

/// Single-file extend. The record is looked up in the manifest by the input
/// file's stem; the manifest defaults to manifest.jsonl beside the input.
inline int cmd_extend_file(const RunConfig& c, const fs::path& input, const fs::path& output,
                           std::ostream& err = std::cerr) {
  using namespace cmd_detail;
  require_file(input.string(), "input file");
  if (output.empty()) throw ConfigError("output file is not set");
  const fs::path manifest = default_manifest(c.extend_manifest, input.parent_path().string());
  if (!fs::is_regular_file(manifest)) throw ConfigError("manifest '" + manifest.string() + "' does not exist");
  const auto options = extend_options(c);
  const auto predictor = resolve_predictor(c);
  const auto index = index_manifest(manifest);
  const auto it = index.find(input.stem().string());
  if (it == index.end()) throw ContractError("no manifest record for '" + input.stem().string() + "'");

  try {
    const Signal out = extend_one(input, it->second, predictor, options);
    if (output.has_parent_path()) fs::create_directories(output.parent_path());
    write_wav(out, output, c.encoding);
  } catch (const ContractError&) {
    throw;
  } catch (const std::exception& e) {
    err << "error: " << it->first << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}

/// Builds feature pairs, fits the predictor on the training split and writes
/// the model file. With several ridge values the one with the lowest
/// validation L1 loss is kept. A JSON summary goes to `log`.
inline int cmd_train(const RunConfig& c, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  using namespace cmd_detail;
  require_dir(c.train_in_dir, "training input directory");
  require_dir(c.train_references, "training references directory");
  if (c.model_out.empty()) throw ConfigError("model output path is not set");
  if (c.ridge.empty()) throw ConfigError("ridge: at least one value required");
  for (double l : c.ridge) {
    if (!(l > 0.0) || !std::isfinite(l)) throw ConfigError("ridge values must be positive and finite");
  }
  if (c.context > 32) throw ConfigError("context radius must be at most 32");
  const fs::path manifest = default_manifest(c.train_manifest, c.train_in_dir);
  if (!fs::is_regular_file(manifest)) throw ConfigError("manifest '" + manifest.string() + "' does not exist");
  auto records = read_manifest(manifest);
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.utterance_id < b.utterance_id; });

  std::vector<std::optional<FeaturePair>> slots(records.size());
  std::vector<std::optional<Failure>> failures(records.size());
  parallel_for(records.size(), workers(c), [&](std::size_t i) {
    const auto& r = records[i];
    try {
      slots[i] = make_feature_pair(read_wav(fs::path(c.train_in_dir) / (r.utterance_id + ".wav")),
                                   read_wav(fs::path(c.train_references) / (r.utterance_id + ".wav")), r);
    } catch (const std::exception& e) {
      failures[i] = Failure{r.utterance_id, e.what()};
    }
  });
  const int status = report_failures(std::move(failures), err);

  std::map<std::string, FeaturePair> pairs;
  for (auto& p : slots) {
    if (p) pairs.emplace(p->record.utterance_id, std::move(*p));
  }
  if (pairs.empty()) throw ContractError("no usable training utterances");
  std::vector<std::string> ids;
  for (const auto& [id, p] : pairs) ids.push_back(id);
  const Split split = split_train_validation(ids);
  std::vector<FeaturePair> train, validation;
  for (const auto& id : split.train) train.push_back(pairs.at(id));
  for (const auto& id : split.validation) validation.push_back(pairs.at(id));

  nlohmann::json summary{{"train_utterances", train.size()}, {"validation_utterances", validation.size()},
                         {"context", c.context}};
  PredictorModel model;
  if (c.ridge.size() > 1) {
    if (validation.empty()) throw ContractError("ridge sweep needs at least one validation utterance");
    const RidgeSelection sel = select_ridge(train, validation, c.context, c.ridge);
    model = sel.model;
    summary["sweep"] = nlohmann::json::array();
    for (std::size_t i = 0; i < sel.grid.size(); ++i) {
      summary["sweep"].push_back({{"ridge", sel.grid[i]}, {"validation_l1", sel.validation_l1[i]}});
    }
  } else {
    model = train_ridge(train, c.context, c.ridge.front());
  }
  summary["ridge"] = model.ridge;
  const PredictorModel baseline = bias_only_model(train, c.context);
  const auto train_loss = evaluate_model(model, train);
  summary["train_l1"] = train_loss.l1;
  summary["train_squared"] = train_loss.squared;
  summary["train_bias_only_l1"] = evaluate_model(baseline, train).l1;
  if (!validation.empty()) {
    const auto val_loss = evaluate_model(model, validation);
    summary["validation_l1"] = val_loss.l1;
    summary["validation_squared"] = val_loss.squared;
    summary["validation_bias_only_l1"] = evaluate_model(baseline, validation).l1;
  }

  const fs::path out(c.model_out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_model(out, model);
  write_run_lock(out.has_parent_path() ? out.parent_path() : fs::path("."), c);
  log << summary.dump() << '\n';
  return status;
}

inline int cmd_evaluate(const RunConfig& c, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cmd_detail;
  require_dir(c.eval_estimates, "estimates directory");
  require_dir(c.eval_references, "references directory");
  const fs::path manifest = c.eval_manifest.empty() ? fs::path(c.eval_estimates) / "manifest.jsonl"
                                                    : fs::path(c.eval_manifest);
  if (!fs::is_regular_file(manifest)) throw ConfigError("manifest '" + manifest.string() + "' does not exist");

  const CorpusReport report = evaluate_corpus(manifest, c.eval_estimates, c.eval_references, workers(c));
  auto emit = [&](std::ostream& s) {
    if (c.eval_csv) {
      write_report_csv(s, report);
    } else {
      write_report_jsonl(s, report);
    }
  };
  if (c.eval_out.empty()) {
    emit(out);
  } else {
    const fs::path path(c.eval_out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    emit(f);
    write_run_lock(path.has_parent_path() ? path.parent_path() : fs::path("."), c);
  }
  for (const auto& r : report.utterances) {
    if (r.error) err << "error: " << r.utterance_id << ": " << *r.error << '\n';
  }
  return report.summary.errors == 0 ? 0 : 1;
}

/// Feature matrix of one file. 8 kHz inputs are upsampled first.
inline FrameMatrix<double> feature_matrix(const Signal& s, const std::string& kind) {
  const Signal wide = s.sample_rate == kNarrowbandRate ? upsample_6x(s) : s;
  require_rate(wide, kWidebandRate, "features");
  const MagnitudeSpectrogram mag = magnitude(stft(wide));
  if (kind == "coarse") return compress(mag, GroupingMatrix{}).values;
  if (kind == "mel") return log_mel(mag).values;
  if (kind == "spec") return mag.values;
  throw ConfigError("unknown feature kind '" + kind + "' (expected coarse, mel or spec)");
}

inline std::string feature_extension(const RunConfig& c) {
  if (c.features_csv) return ".csv";
  return c.features_kind == "spec" ? ".spec" : ".feat";
}

inline void write_feature_file(const FrameMatrix<double>& m, const fs::path& path, const RunConfig& c) {
  if (c.features_csv) {
    write_features_csv(path, m);
  } else if (c.features_kind == "spec") {
    write_spectrogram(path, MagnitudeSpectrogram{m, StftConfig{}});
  } else {
    write_features(path, m);
  }
}

/// Dumps features of one file, or of every .wav in a directory.
inline int cmd_features(const RunConfig& c, std::ostream& err = std::cerr) {
  using namespace cmd_detail;
  if (c.features_kind != "coarse" && c.features_kind != "mel" && c.features_kind != "spec") {
    throw ConfigError("unknown feature kind '" + c.features_kind + "' (expected coarse, mel or spec)");
  }
  if (c.features_in.empty()) throw ConfigError("features input is not set");
  if (c.features_out.empty()) throw ConfigError("features output is not set");
  const fs::path in(c.features_in), out(c.features_out);

  if (fs::is_regular_file(in)) {
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    try {
      write_feature_file(feature_matrix(read_wav(in), c.features_kind), out, c);
    } catch (const ContractError&) {
      throw;
    } catch (const std::exception& e) {
      err << "error: " << in.stem().string() << ": " << e.what() << '\n';
      return 1;
    }
    return 0;
  }
  require_dir(c.features_in, "features input");
  const auto files = list_wavs(in);
  fs::create_directories(out);
  std::vector<std::optional<Failure>> failures(files.size());
  parallel_for(files.size(), workers(c), [&](std::size_t i) {
    const std::string id = files[i].stem().string();
    try {
      write_feature_file(feature_matrix(read_wav(files[i]), c.features_kind), out / (id + feature_extension(c)), c);
    } catch (const std::exception& e) {
      failures[i] = Failure{id, e.what()};
    }
  });
  write_run_lock(out, c);
  return report_failures(std::move(failures), err);
}

}  // namespace bwe
