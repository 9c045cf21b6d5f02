/**
 * @file config.hpp
 * @brief Experiment configuration: flat INI text with sections
 *        source, fiber, detector, link, policy, run.
 *
 * Every key has a default, so an empty file is a valid configuration (the
 * 125 km / 26 dB lab link). Unknown sections or keys are errors. dump_config
 * writes every key in a fixed order, so dump(load(x)) is a normal form.
 *
 *   [source]   mu_signal, mu_unmodulated, pulse_width_ns, pulse_rate_hz
 *   [fiber]    length_km, atten_db_per_km, birefringence_seed
 *   [detector] efficiency, dark_prob, gate_width_ns
 *   [link]     bob_insertion_loss_db, e_opt, coder_delay_ns
 *   [policy]   enabled, period_s, scan_points, pulses_per_point, qber_trigger
 *   [run]      scenario (lab|field), seed, n_pulses, duration_s, drift_rate,
 *              sample_fraction, qber_limit, sweep_lengths_km, target_detections,
 *              max_pulses, transcript (full|clicks), runs, payload, output
 */

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fmqkd/calibration.hpp"
#include "fmqkd/channel.hpp"
#include "fmqkd/error.hpp"
#include "fmqkd/format.hpp"
#include "fmqkd/protocol.hpp"

namespace fmqkd {

enum class Scenario { Lab, Field };

// Field links run about one percentage point worse than the same link in the lab.
inline constexpr double kFieldExtraError = 0.01;

struct ExperimentConfig {
  LinkParams link;
  CalibrationPolicy policy;
  Scenario scenario = Scenario::Lab;
  std::uint64_t seed = 1;
  std::uint64_t n_pulses = 1'000'000;
  double duration_s = 43'200.0;
  double drift_rate = 0.005;
  double sample_fraction = 0.1;
  double qber_limit = kQberLimit;
  std::vector<double> sweep_lengths_km{25, 50, 75, 100, 125, 150, 175, 200};
  std::uint64_t target_detections = 10'000;
  std::uint64_t max_pulses = 1'000'000'000'000;
  TranscriptMode transcript = TranscriptMode::Full;
  std::uint64_t runs = 1;
  std::string payload;  // empty: bundled sample
  std::string output;

  /// Link as simulated: the field scenario adds its extra misalignment error.
  LinkParams effective_link() const {
    LinkParams l = link;
    if (scenario == Scenario::Field) l.e_opt = std::min(0.5, l.e_opt + kFieldExtraError);
    return l;
  }

  void validate() const {
    link.validate();
    policy.validate(link.source.pulse_rate_hz);
    require(n_pulses > 0, "run.n_pulses must be > 0");
    require(duration_s > policy.period_s, "run.duration_s must exceed policy.period_s");
    require(drift_rate >= 0.0, "run.drift_rate must be >= 0");
    require(sample_fraction > 0.0 && sample_fraction < 1.0, "run.sample_fraction must lie in (0,1)");
    require(qber_limit > 0.0 && qber_limit <= 0.5, "run.qber_limit must lie in (0,0.5]");
    require(!sweep_lengths_km.empty(), "run.sweep_lengths_km must not be empty");
    for (double l : sweep_lengths_km) require(l >= 0.0, "run.sweep_lengths_km entries must be >= 0");
    require(target_detections > 0, "run.target_detections must be > 0");
    require(max_pulses > 0, "run.max_pulses must be > 0");
    require(runs > 0, "run.runs must be > 0");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& v) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("expected a number, got '" + v + "'");
  return x;
}

inline std::uint64_t parse_uint(const std::string& v) {
  // Accept integral values written in floating notation (1e7).
  const double x = parse_double(v);
  if (x < 0.0 || x != std::floor(x) || x > 1.8e19) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return static_cast<std::uint64_t>(x);
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

inline std::string format_uint(std::uint64_t v) { return std::to_string(v); }

struct Key {
  const char* name;  // section.key
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define FMQKD_DOUBLE(NAME, FIELD)                                                          \
  Key {                                                                                    \
    NAME, [](ExperimentConfig& c, const std::string& v) { c.FIELD = parse_double(v); },    \
        [](const ExperimentConfig& c) { return format_shortest(c.FIELD); }               \
  }
#define FMQKD_UINT(NAME, FIELD)                                                            \
  Key {                                                                                    \
    NAME, [](ExperimentConfig& c, const std::string& v) { c.FIELD = parse_uint(v); },      \
        [](const ExperimentConfig& c) { return format_uint(c.FIELD); }                     \
  }

inline const std::vector<Key>& keys() {
  static const std::vector<Key> table{
      FMQKD_DOUBLE("source.mu_signal", link.source.mu_signal),
      FMQKD_DOUBLE("source.mu_unmodulated", link.source.mu_unmodulated),
      FMQKD_DOUBLE("source.pulse_width_ns", link.source.pulse_width_ns),
      FMQKD_DOUBLE("source.pulse_rate_hz", link.source.pulse_rate_hz),
      FMQKD_DOUBLE("fiber.length_km", link.fiber.length_km),
      FMQKD_DOUBLE("fiber.atten_db_per_km", link.fiber.atten_db_per_km),
      FMQKD_UINT("fiber.birefringence_seed", link.fiber.birefringence_seed),
      FMQKD_DOUBLE("detector.efficiency", link.detector.efficiency),
      FMQKD_DOUBLE("detector.dark_prob", link.detector.dark_prob),
      FMQKD_DOUBLE("detector.gate_width_ns", link.detector.gate_width_ns),
      FMQKD_DOUBLE("link.bob_insertion_loss_db", link.bob_insertion_loss_db),
      FMQKD_DOUBLE("link.e_opt", link.e_opt),
      FMQKD_DOUBLE("link.coder_delay_ns", link.coder_delay_ns),
      Key{"policy.enabled", [](ExperimentConfig& c, const std::string& v) { c.policy.enabled = parse_bool(v); },
          [](const ExperimentConfig& c) { return std::string(c.policy.enabled ? "true" : "false"); }},
      FMQKD_DOUBLE("policy.period_s", policy.period_s),
      Key{"policy.scan_points",
          [](ExperimentConfig& c, const std::string& v) { c.policy.scan_points = static_cast<std::size_t>(parse_uint(v)); },
          [](const ExperimentConfig& c) { return format_uint(c.policy.scan_points); }},
      FMQKD_UINT("policy.pulses_per_point", policy.pulses_per_point),
      FMQKD_DOUBLE("policy.qber_trigger", policy.qber_trigger),
      Key{"run.scenario",
          [](ExperimentConfig& c, const std::string& v) {
            if (v == "lab") c.scenario = Scenario::Lab;
            else if (v == "field") c.scenario = Scenario::Field;
            else throw ConfigError("expected lab or field, got '" + v + "'");
          },
          [](const ExperimentConfig& c) { return std::string(c.scenario == Scenario::Lab ? "lab" : "field"); }},
      FMQKD_UINT("run.seed", seed),
      FMQKD_UINT("run.n_pulses", n_pulses),
      FMQKD_DOUBLE("run.duration_s", duration_s),
      FMQKD_DOUBLE("run.drift_rate", drift_rate),
      FMQKD_DOUBLE("run.sample_fraction", sample_fraction),
      FMQKD_DOUBLE("run.qber_limit", qber_limit),
      Key{"run.sweep_lengths_km",
          [](ExperimentConfig& c, const std::string& v) {
            c.sweep_lengths_km.clear();
            std::stringstream ss(v);
            std::string item;
            while (std::getline(ss, item, ',')) c.sweep_lengths_km.push_back(parse_double(trim(item)));
          },
          [](const ExperimentConfig& c) {
            std::string s;
            for (std::size_t i = 0; i < c.sweep_lengths_km.size(); ++i)
              s += (i ? ", " : "") + format_shortest(c.sweep_lengths_km[i]);
            return s;
          }},
      FMQKD_UINT("run.target_detections", target_detections),
      FMQKD_UINT("run.max_pulses", max_pulses),
      Key{"run.transcript",
          [](ExperimentConfig& c, const std::string& v) {
            if (v == "full") c.transcript = TranscriptMode::Full;
            else if (v == "clicks") c.transcript = TranscriptMode::ClicksOnly;
            else throw ConfigError("expected full or clicks, got '" + v + "'");
          },
          [](const ExperimentConfig& c) {
            return std::string(c.transcript == TranscriptMode::Full ? "full" : "clicks");
          }},
      FMQKD_UINT("run.runs", runs),
      Key{"run.payload", [](ExperimentConfig& c, const std::string& v) { c.payload = v; },
          [](const ExperimentConfig& c) { return c.payload; }},
      Key{"run.output", [](ExperimentConfig& c, const std::string& v) { c.output = v; },
          [](const ExperimentConfig& c) { return c.output; }},
  };
  return table;
}

#undef FMQKD_DOUBLE
#undef FMQKD_UINT

inline const Key* find_key(const std::string& name) {
  for (const auto& k : keys())
    if (name == k.name) return &k;
  return nullptr;
}

inline bool known_section(const std::string& s) {
  return s == "source" || s == "fiber" || s == "detector" || s == "link" || s == "policy" || s == "run";
}

}  // namespace detail

/// Parses configuration text. Comments start with '#' or ';'.
inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::string section;
  std::vector<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto where = [&] { return "line " + std::to_string(line_no) + ": "; };
    std::string line = raw;
    if (const auto c = line.find_first_of("#;"); c != std::string::npos) line.erase(c);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where() + "unterminated section header");
      section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      if (!detail::known_section(section)) throw ConfigError(where() + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where() + "expected 'key = value'");
    std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    // Dotted keys may be written outside a section.
    std::string name = key.find('.') == std::string::npos ? section + "." + key : key;
    if (key.find('.') == std::string::npos && section.empty())
      throw ConfigError(where() + "key '" + key + "' outside any section");
    const detail::Key* k = detail::find_key(name);
    if (!k) throw ConfigError(where() + "unknown key '" + name + "'");
    if (std::find(seen.begin(), seen.end(), name) != seen.end())
      throw ConfigError(where() + "duplicate key '" + name + "'");
    seen.push_back(name);
    try {
      k->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where() + name + ": " + e.what());
    }
  }
  try {
    cfg.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

/// Every key, grouped by section, in a fixed order.
inline std::string dump_config(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& k : detail::keys()) {
    const std::string name = k.name;
    const auto dot = name.find('.');
    const std::string sec = name.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out += '\n';
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += name.substr(dot + 1) + " = " + k.get(cfg) + '\n';
  }
  return out;
}

}  // namespace fmqkd
