// fmqkd: command-line front end for the Faraday-Michelson QKD simulator.
//
//   fmqkd simulate  [--config F] [--seed N] [--out transcript.csv] [--key key.hex] [--pulses N]
//   fmqkd sweep     [--config F] [--seed N] [--out sweep.csv] [--lengths 25,50,...]
//   fmqkd stability [--config F] [--seed N] [--out trace.csv] [--duration S]
//   fmqkd field     [--config F] [--seed N] [--out field.csv] [--runs N] [--duration S]
//   fmqkd otp       --key key.hex --in FILE --out FILE
//   fmqkd config    [--config F]            (print the normalized configuration)
//
// Exit codes: 0 success, 1 QBER over the limit (abort), 2 configuration error,
// 3 internal error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fmqkd/harness/config.hpp"
#include "fmqkd/harness/experiments.hpp"

namespace {

using namespace fmqkd;

enum Exit { kOk = 0, kAbort = 1, kConfigError = 2, kInternal = 3 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? parse_config("") : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output = c.out;
  return cfg;
}

// Writes through `emit` into cfg.output, or stdout when no path is set.
template <class F>
void write_output(const std::string& path, F&& emit) {
  if (path.empty() || path == "-") {
    emit(std::cout);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParameterError("cannot write '" + path + "'");
  emit(f);
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "INI configuration file");
  cmd->add_option("--seed", c.seed, "experiment seed (overrides run.seed)");
  cmd->add_option("--out", c.out, "output CSV path (default stdout)");
}

std::string summary_line(const RunReport& r) {
  std::ostringstream os;
  os << "seed=" << r.seed << " pulses=" << r.pulses << " clicks=" << r.clicks << " sifted=" << r.sifted
     << " key_bits=" << r.key_bits << " qber=" << format_number(r.qber, 6)
     << " measured_qber=" << format_number(r.measured_qber, 6) << " abort=" << (r.aborted ? 1 : 0)
     << " raw_rate=" << format_number(r.raw_rate, 6) << " sifted_rate=" << format_number(r.sifted_rate, 6)
     << " duty_cycle=" << format_number(r.duty_cycle, 6) << " runtime_s=" << format_number(r.runtime_s, 4);
  return os.str();
}

int cmd_simulate(const Common& c, std::optional<std::uint64_t> pulses, const std::string& key_path) {
  ExperimentConfig cfg = load(c);
  if (pulses) cfg.n_pulses = *pulses;
  cfg.validate();
  const SimulateResult res = simulate(cfg);
  write_output(cfg.output, [&](std::ostream& os) { write_transcript_csv(os, res.transcript); });
  if (!key_path.empty())
    write_output(key_path, [&](std::ostream& os) { os << key_to_hex(res.key.bits) << '\n'; });
  std::cerr << summary_line(res.report) << '\n';
  return res.report.aborted ? kAbort : kOk;
}

int cmd_sweep(const Common& c, const std::string& lengths) {
  ExperimentConfig cfg = load(c);
  if (!lengths.empty()) {
    std::stringstream ss(lengths);
    std::string item;
    cfg.sweep_lengths_km.clear();
    while (std::getline(ss, item, ',')) cfg.sweep_lengths_km.push_back(std::stod(item));
  }
  cfg.validate();
  const auto rows = sweep_distance(cfg, cfg.sweep_lengths_km);
  write_output(cfg.output, [&](std::ostream& os) { write_sweep_csv(os, rows); });
  return kOk;
}

int cmd_stability(const Common& c, std::optional<double> duration) {
  ExperimentConfig cfg = load(c);
  if (duration) cfg.duration_s = *duration;
  cfg.validate();
  const StabilityTrace trace = stability_trace(cfg, cfg.duration_s);
  write_output(cfg.output, [&](std::ostream& os) { write_stability_csv(os, trace); });
  std::cerr << "calibrated duty_cycle=" << format_number(trace.calibrated.duty_cycle(), 6)
            << " qber=" << format_number(trace.calibrated.key.true_qber(), 6)
            << " | uncalibrated qber=" << format_number(trace.uncalibrated.key.true_qber(), 6) << '\n';
  return kOk;
}

int cmd_field(const Common& c, std::optional<std::uint64_t> runs, std::optional<double> duration) {
  ExperimentConfig cfg = load(c);
  cfg.scenario = Scenario::Field;
  if (runs) cfg.runs = *runs;
  if (duration) cfg.duration_s = *duration;
  cfg.validate();
  const Bytes payload = read_file_bytes(cfg.payload.empty() ? default_payload_path() : cfg.payload);
  const auto reports = field_family(cfg, payload);
  write_output(cfg.output, [&](std::ostream& os) { write_field_csv(os, reports); });
  bool any_abort = false;
  for (const auto& f : reports) {
    std::cerr << summary_line(f.run) << " otp_roundtrip=" << (f.otp_roundtrip ? 1 : 0) << '\n';
    any_abort = any_abort || f.run.aborted;
  }
  return any_abort ? kAbort : kOk;
}

int cmd_otp(const std::string& key_path, const std::string& in_path, const std::string& out_path) {
  std::ifstream kf(key_path);
  if (!kf) throw ParameterError("cannot open key file '" + key_path + "'");
  std::stringstream ks;
  ks << kf.rdbuf();
  KeyPool pool(hex_to_key_bits(ks.str()));
  const Bytes data = read_file_bytes(in_path);
  const Bytes out = pool.apply(data);
  std::ofstream of(out_path, std::ios::binary);
  if (!of) throw ParameterError("cannot write '" + out_path + "'");
  of.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  std::cerr << "otp: " << data.size() << " bytes, " << pool.remaining() << " key bits left\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intrinsically stabilized uni-directional QKD simulator"};
  app.require_subcommand(1);

  Common common;
  std::optional<std::uint64_t> pulses, runs;
  std::optional<double> duration;
  std::string key_path, lengths, in_path, otp_out;

  auto* sim = app.add_subcommand("simulate", "single QKD session, per-pulse transcript CSV");
  add_common(sim, common);
  sim->add_option("--pulses", pulses, "number of pulses (overrides run.n_pulses)");
  sim->add_option("--key", key_path, "write the retained key as hex");

  auto* sweep = app.add_subcommand("sweep", "QBER and rates against fiber length");
  add_common(sweep, common);
  sweep->add_option("--lengths", lengths, "comma-separated fiber lengths in km");

  auto* stab = app.add_subcommand("stability", "visibility/QBER trace with and without calibration");
  add_common(stab, common);
  stab->add_option("--duration", duration, "simulated seconds");

  auto* field = app.add_subcommand("field", "deployed-link field scenario over consecutive seeds");
  add_common(field, common);
  field->add_option("--runs", runs, "number of consecutive seeds");
  field->add_option("--duration", duration, "simulated seconds per run");

  auto* otp = app.add_subcommand("otp", "one-time pad encrypt/decrypt (XOR, symmetric)");
  otp->add_option("--key", key_path, "hex key file")->required();
  otp->add_option("--in", in_path, "input file")->required();
  otp->add_option("--out", otp_out, "output file")->required();

  auto* show = app.add_subcommand("config", "print the normalized configuration");
  show->add_option("--config", common.config, "INI configuration file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*sim) return cmd_simulate(common, pulses, key_path);
    if (*sweep) return cmd_sweep(common, lengths);
    if (*stab) return cmd_stability(common, duration);
    if (*field) return cmd_field(common, runs, duration);
    if (*otp) return cmd_otp(key_path, in_path, otp_out);
    if (*show) {
      std::cout << dump_config(load(common));
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const KeyExhausted& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternal;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}
