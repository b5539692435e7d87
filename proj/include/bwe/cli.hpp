#pragma once

// Command-line front end. Precedence: built-in defaults < --config file <
// BWE_SEED < flags.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bwe/commands.hpp"
#include "bwe/errors.hpp"
#include "bwe/run_config.hpp"

namespace bwe {

namespace cli_detail {

struct Binding {
  std::string flag;
  std::string section;
  std::string key;
  std::string help;
};

struct Subcommand {
  CLI::App* app = nullptr;
  std::vector<Binding> bindings;
  std::map<std::string, std::string> values;  // flag -> raw value
};

inline void bind(Subcommand& s, const std::vector<Binding>& bindings) {
  for (const auto& b : bindings) {
    s.bindings.push_back(b);
    s.app->add_option("--" + b.flag, s.values[b.flag], b.help);
  }
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using cli_detail::Binding;
  using cli_detail::Subcommand;

  CLI::App app{"Bandwidth extension of 8 kHz speech to 48 kHz"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key = value run configuration file");
  std::map<std::string, std::string> global_values;
  app.add_option("--seed", global_values["seed"], "global seed for cutoff sampling (default 0)");
  app.add_option("--workers", global_values["workers"], "worker threads, 0 for all cores");
  app.add_option("--encoding", global_values["encoding"], "float32 or pcm16 for written audio");
  bool pcm16 = false;
  app.add_flag("--pcm16", pcm16, "write 16-bit PCM audio instead of 32-bit float");

  Subcommand degrade, extend, train, evaluate, features;
  degrade.app = app.add_subcommand("degrade", "bandlimit and decimate a 48 kHz corpus");
  cli_detail::bind(degrade, {{"in-dir", "degrade", "in_dir", "48 kHz input directory"},
                             {"out-dir", "degrade", "out_dir", "8 kHz output directory"},
                             {"manifest", "degrade", "manifest", "manifest path (default <out-dir>/manifest.jsonl)"}});

  extend.app = app.add_subcommand("extend", "extend an 8 kHz corpus to 48 kHz");
  cli_detail::bind(extend, {{"in-dir", "extend", "in_dir", "8 kHz input directory"},
                            {"out-dir", "extend", "out_dir", "48 kHz output directory"},
                            {"manifest", "extend", "manifest", "manifest path (default <in-dir>/manifest.jsonl)"},
                            {"references", "extend", "references", "48 kHz references (oracle predictor)"},
                            {"predictor", "extend", "predictor", "oracle or a model file"},
                            {"exciter", "extend", "exciter", "noise, fold or rect"},
                            {"exciter-seed", "extend", "exciter_seed", "noise exciter seed"},
                            {"flat-level", "extend", "flat_level", "noise level per bin, or auto"},
                            {"ltv-mode", "extend", "ltv_mode", "direct or match"},
                            {"gain-ceiling-db", "extend", "gain_ceiling_db", "match-mode gain ceiling"}});
  std::string single_in, single_out;
  extend.app->add_option("--in", single_in, "single input file");
  extend.app->add_option("--out", single_out, "single output file");

  train.app = app.add_subcommand("train-predictor", "fit the ridge envelope predictor");
  cli_detail::bind(train, {{"in-dir", "train-predictor", "in_dir", "8 kHz degraded directory"},
                           {"references", "train-predictor", "references", "48 kHz references"},
                           {"manifest", "train-predictor", "manifest", "manifest path (default <in-dir>/manifest.jsonl)"},
                           {"out", "train-predictor", "out", "model output path"},
                           {"context", "train-predictor", "context", "context radius in frames"},
                           {"ridge", "train-predictor", "ridge", "ridge value, or comma-separated sweep"}});
  bool sweep = false;
  train.app->add_flag("--sweep", sweep, "select ridge from 1e-5..1 on the validation split");

  evaluate.app = app.add_subcommand("evaluate", "objective metrics of estimates against references");
  cli_detail::bind(evaluate, {{"estimates", "evaluate", "estimates", "48 kHz estimates directory"},
                              {"references", "evaluate", "references", "48 kHz references directory"},
                              {"manifest", "evaluate", "manifest", "manifest path (default <estimates>/manifest.jsonl)"},
                              {"out", "evaluate", "out", "report path (default stdout)"}});
  bool eval_csv = false;
  evaluate.app->add_flag("--csv", eval_csv, "CSV report instead of JSON lines");

  features.app = app.add_subcommand("features", "dump coarse, mel or magnitude features");
  cli_detail::bind(features, {{"in", "features", "in", "input .wav or directory"},
                              {"out", "features", "out", "output file or directory"},
                              {"kind", "features", "kind", "coarse, mel or spec"}});
  bool features_csv = false;
  features.app->add_flag("--csv", features_csv, "CSV instead of binary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig config = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    apply_environment(config);
    for (const auto& [flag, value] : global_values) {
      if (!value.empty()) set_config_value(config, "global", flag, value);
    }
    if (pcm16) config.encoding = WavEncoding::pcm16;
    for (Subcommand* s : {&degrade, &extend, &train, &evaluate, &features}) {
      if (!s->app->parsed()) continue;
      for (const auto& b : s->bindings) {
        if (const auto& v = s->values[b.flag]; !v.empty()) set_config_value(config, b.section, b.key, v);
      }
    }
    if (sweep) config.ridge = default_ridge_grid();
    if (eval_csv) config.eval_csv = true;
    if (features_csv) config.features_csv = true;

    if (degrade.app->parsed()) return cmd_degrade(config, err);
    if (extend.app->parsed()) {
      if (!single_in.empty() || !single_out.empty()) {
        if (single_in.empty() || single_out.empty()) throw ConfigError("--in and --out must be given together");
        return cmd_extend_file(config, single_in, single_out, err);
      }
      return cmd_extend(config, err);
    }
    if (train.app->parsed()) return cmd_train(config, out, err);
    if (evaluate.app->parsed()) return cmd_evaluate(config, out, err);
    if (features.app->parsed()) return cmd_features(config, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ContractError& e) {
    err << "contract error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace bwe
