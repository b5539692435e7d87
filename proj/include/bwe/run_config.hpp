#pragma once

// Run configuration: a UTF-8 line-based file of `key = value` pairs grouped
// under [section] headers. Blank lines and lines starting with '#' or ';' are
// ignored. Every key is known in advance; anything else is an error.

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bwe/errors.hpp"
#include "bwe/excite.hpp"
#include "bwe/ltv.hpp"
#include "bwe/wav.hpp"

namespace bwe {

struct RunConfig {
  // [global]
  std::uint64_t global_seed = 0;
  std::size_t workers = 0;  // 0: logical cores
  WavEncoding encoding = WavEncoding::float32;  // for written audio

  // [degrade]
  std::string degrade_in_dir;
  std::string degrade_out_dir;
  std::string degrade_manifest;  // default <out_dir>/manifest.jsonl

  // [extend]
  std::string extend_in_dir;
  std::string extend_out_dir;
  std::string extend_manifest;  // default <in_dir>/manifest.jsonl
  std::string references;
  std::string predictor = "oracle";  // "oracle" or a model path
  ExciterKind exciter;
  LtvMode ltv_mode = LtvMode::match;
  double gain_ceiling_db = 40.0;

  // [train-predictor]
  std::string train_in_dir;
  std::string train_references;
  std::string train_manifest;
  std::string model_out;
  std::size_t context = 2;
  std::vector<double> ridge{1e-3};  // more than one value: validation sweep

  // [evaluate]
  std::string eval_estimates;
  std::string eval_references;
  std::string eval_manifest;
  std::string eval_out;  // empty: stdout
  bool eval_csv = false;

  // [features]
  std::string features_in;
  std::string features_out;
  std::string features_kind = "coarse";  // coarse | mel | spec
  bool features_csv = false;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s, const std::string& key) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw ConfigError(key + ": not a number: '" + s + "'");
  return v;
}

inline std::uint64_t parse_u64(const std::string& s, const std::string& key) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
    throw ConfigError(key + ": not an unsigned integer: '" + s + "'");
  }
  return v;
}

inline bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <class M>
Field string_field(std::string section, std::string key, M RunConfig::*member) {
  return {std::move(section), std::move(key), [member](const RunConfig& c) { return c.*member; },
          [member](RunConfig& c, const std::string& v) { c.*member = v; }};
}

inline const std::vector<Field>& fields() {
  using C = RunConfig;
  static const std::vector<Field> table = {
      {"global", "seed", [](const C& c) { return std::to_string(c.global_seed); },
       [](C& c, const std::string& v) { c.global_seed = parse_u64(v, "seed"); }},
      {"global", "workers", [](const C& c) { return std::to_string(c.workers); },
       [](C& c, const std::string& v) { c.workers = parse_u64(v, "workers"); }},
      {"global", "encoding",
       [](const C& c) { return std::string(c.encoding == WavEncoding::pcm16 ? "pcm16" : "float32"); },
       [](C& c, const std::string& v) {
         if (v == "float32") c.encoding = WavEncoding::float32;
         else if (v == "pcm16") c.encoding = WavEncoding::pcm16;
         else throw ConfigError("encoding: expected float32 or pcm16, got '" + v + "'");
       }},

      string_field("degrade", "in_dir", &C::degrade_in_dir),
      string_field("degrade", "out_dir", &C::degrade_out_dir),
      string_field("degrade", "manifest", &C::degrade_manifest),

      string_field("extend", "in_dir", &C::extend_in_dir),
      string_field("extend", "out_dir", &C::extend_out_dir),
      string_field("extend", "manifest", &C::extend_manifest),
      string_field("extend", "references", &C::references),
      string_field("extend", "predictor", &C::predictor),
      {"extend", "exciter", [](const C& c) { return to_string(c.exciter.variant); },
       [](C& c, const std::string& v) {
         try {
           c.exciter.variant = parse_exciter_variant(v);
         } catch (const ContractError& e) {
           throw ConfigError(e.what());
         }
       }},
      {"extend", "exciter_seed", [](const C& c) { return std::to_string(c.exciter.seed); },
       [](C& c, const std::string& v) { c.exciter.seed = parse_u64(v, "exciter_seed"); }},
      {"extend", "flat_level",
       [](const C& c) { return c.exciter.flat_level ? format_double(*c.exciter.flat_level) : std::string("auto"); },
       [](C& c, const std::string& v) {
         if (v == "auto") {
           c.exciter.flat_level.reset();
           return;
         }
         const double level = parse_double(v, "flat_level");
         if (!(level > 0.0)) throw ConfigError("flat_level must be positive or 'auto'");
         c.exciter.flat_level = level;
       }},
      {"extend", "ltv_mode", [](const C& c) { return to_string(c.ltv_mode); },
       [](C& c, const std::string& v) {
         try {
           c.ltv_mode = parse_ltv_mode(v);
         } catch (const ContractError& e) {
           throw ConfigError(e.what());
         }
       }},
      {"extend", "gain_ceiling_db", [](const C& c) { return format_double(c.gain_ceiling_db); },
       [](C& c, const std::string& v) { c.gain_ceiling_db = parse_double(v, "gain_ceiling_db"); }},

      string_field("train-predictor", "in_dir", &C::train_in_dir),
      string_field("train-predictor", "references", &C::train_references),
      string_field("train-predictor", "manifest", &C::train_manifest),
      string_field("train-predictor", "out", &C::model_out),
      {"train-predictor", "context", [](const C& c) { return std::to_string(c.context); },
       [](C& c, const std::string& v) { c.context = parse_u64(v, "context"); }},
      {"train-predictor", "ridge",
       [](const C& c) {
         std::string s;
         for (std::size_t i = 0; i < c.ridge.size(); ++i) s += (i ? "," : "") + format_double(c.ridge[i]);
         return s;
       },
       [](C& c, const std::string& v) {
         c.ridge.clear();
         std::stringstream ss(v);
         std::string item;
         while (std::getline(ss, item, ',')) c.ridge.push_back(parse_double(trim(item), "ridge"));
         if (c.ridge.empty()) throw ConfigError("ridge: at least one value required");
       }},

      string_field("evaluate", "estimates", &C::eval_estimates),
      string_field("evaluate", "references", &C::eval_references),
      string_field("evaluate", "manifest", &C::eval_manifest),
      string_field("evaluate", "out", &C::eval_out),
      {"evaluate", "csv", [](const C& c) { return std::string(c.eval_csv ? "true" : "false"); },
       [](C& c, const std::string& v) { c.eval_csv = parse_bool(v, "csv"); }},

      string_field("features", "in", &C::features_in),
      string_field("features", "out", &C::features_out),
      string_field("features", "kind", &C::features_kind),
      {"features", "csv", [](const C& c) { return std::string(c.features_csv ? "true" : "false"); },
       [](C& c, const std::string& v) { c.features_csv = parse_bool(v, "csv"); }},
  };
  return table;
}

}  // namespace config_detail

inline std::string serialize(const RunConfig& c) {
  std::string out;
  std::string section;
  for (const auto& f : config_detail::fields()) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(c) + '\n';
  }
  return out;
}

/// Sets one key through the same parser the config file uses.
inline void set_config_value(RunConfig& c, const std::string& section, const std::string& key,
                             const std::string& value) {
  for (const auto& f : config_detail::fields()) {
    if (f.section == section && f.key == key) {
      f.set(c, value);
      return;
    }
  }
  throw ConfigError("unknown key '" + key + "' in [" + section + "]");
}

/// Applies the file's keys on top of `base`.
inline RunConfig parse_run_config(const std::string& text, RunConfig base = {}) {
  using namespace config_detail;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const auto& f : fields()) known = known || f.section == section;
      if (!known) throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(where + "key '" + key + "' outside any section");
    const Field* field = nullptr;
    for (const auto& f : fields()) {
      if (f.section == section && f.key == key) field = &f;
    }
    if (!field) throw ConfigError(where + "unknown key '" + key + "' in [" + section + "]");
    try {
      field->set(base, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return base;
}

inline RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), std::move(base));
}

/// BWE_SEED, when set, replaces the global seed.
inline void apply_environment(RunConfig& c) {
  if (const char* seed = std::getenv("BWE_SEED"); seed && *seed) {
    c.global_seed = config_detail::parse_u64(seed, "BWE_SEED");
  }
}

/// Writes the effective configuration as <dir>/run.lock.
inline void write_run_lock(const std::filesystem::path& dir, const RunConfig& c) {
  std::ofstream out(dir / "run.lock", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "run.lock").string());
  out << serialize(c);
}

}  // namespace bwe
