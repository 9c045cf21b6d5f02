/**
 * @file experiments.hpp
 * @brief Seeded scenario runners: single session, distance sweep, stability
 *        trace and the deployed-link field scenario, with their CSV tables.
 *
 * Independent runs (sweep points, seed families) execute concurrently on
 * std::async; results are always collected in input order, so output never
 * depends on scheduling.
 */

#pragma once

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <future>
#include <iterator>
#include <limits>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "fmqkd/calibration.hpp"
#include "fmqkd/channel.hpp"
#include "fmqkd/error.hpp"
#include "fmqkd/format.hpp"
#include "fmqkd/harness/config.hpp"
#include "fmqkd/protocol.hpp"
#include "fmqkd/rng.hpp"

#ifndef FMQKD_DATA_DIR
#define FMQKD_DATA_DIR "data"
#endif

namespace fmqkd {

struct RunReport {
  std::uint64_t seed = 0;
  std::uint64_t pulses = 0;
  std::uint64_t clicks = 0;
  std::uint64_t sifted = 0;      // matched-basis detections
  std::size_t key_bits = 0;      // retained after disclosure
  double qber = std::numeric_limits<double>::quiet_NaN();           // over every sifted bit
  double measured_qber = std::numeric_limits<double>::quiet_NaN();  // on the disclosed sample
  bool aborted = false;
  double raw_rate = 0.0;     // clicks per pulse
  double sifted_rate = 0.0;  // sifted bits per pulse
  double duty_cycle = 0.0;
  double runtime_s = 0.0;  // wall clock, never written to CSV
};

template <class F>
auto run_ordered(std::size_t n, F&& job) {
  using R = decltype(job(std::size_t{0}));
  std::vector<std::future<R>> futures;
  futures.reserve(n);
  for (std::size_t i = 0; i < n; ++i) futures.push_back(std::async(std::launch::async, job, i));
  std::vector<R> out;
  out.reserve(n);
  for (auto& f : futures) out.push_back(f.get());
  return out;
}

// Runs jobs with at most `width` in flight, collecting results in input order.
template <class F>
auto run_batched(std::size_t n, std::size_t width, F&& job) {
  using R = decltype(job(std::size_t{0}));
  std::vector<R> out;
  out.reserve(n);
  for (std::size_t start = 0; start < n; start += width) {
    const std::size_t count = std::min(width, n - start);
    auto part = run_ordered(count, [&](std::size_t i) { return job(start + i); });
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

inline std::size_t worker_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// --- single session -------------------------------------------------------

struct SimulateResult {
  SessionTranscript transcript;
  SiftedKey key;  // after estimation
  RunReport report;
};

/// One QKD session at the ideal working point, no drift.
inline SimulateResult simulate(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  SimulateResult out;
  SessionOptions opt;
  opt.mode = cfg.transcript;
  out.transcript = run_session(cfg.effective_link(), cfg.n_pulses, cfg.seed, opt);
  const SiftedKey sifted = sift(out.transcript);

  RunReport& r = out.report;
  r.seed = cfg.seed;
  r.pulses = out.transcript.n_pulses;
  r.clicks = out.transcript.clicks();
  r.sifted = sifted.size();
  r.qber = sifted.true_qber();
  r.raw_rate = static_cast<double>(r.clicks) / static_cast<double>(r.pulses);
  r.sifted_rate = static_cast<double>(r.sifted) / static_cast<double>(r.pulses);
  if (sifted.empty()) {
    r.aborted = true;
  } else {
    Rng rng = make_rng(cfg.seed, Stream::Sampling);
    out.key = estimate_and_gate(sifted, cfg.sample_fraction, rng, cfg.qber_limit);
    r.measured_qber = out.key.measured_qber;
    r.aborted = out.key.aborted;
    r.key_bits = out.key.size();
  }
  r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// --- distance sweep -------------------------------------------------------

struct SweepRow {
  double length_km = 0.0;
  std::uint64_t pulses = 0;
  std::uint64_t clicks = 0;
  std::uint64_t sifted = 0;
  double raw_rate = 0.0;
  double sifted_rate = 0.0;
  double qber = 0.0;  // over the whole sifted key
  double expected_qber = 0.0;
  bool aborted = false;
};

inline constexpr const char* kSweepHeader =
    "length_km,pulses,clicks,sifted,raw_rate,sifted_rate,qber,expected_qber,abort";

/// One lab session at a given length, run until target_detections sifted
/// bits or max_pulses. The entire sifted key serves as the test sample.
inline SweepRow sweep_point(const ExperimentConfig& cfg, double length_km, std::uint64_t salt) {
  ExperimentConfig c = cfg;
  c.scenario = Scenario::Lab;
  LinkParams link = c.effective_link();
  link.fiber.length_km = length_km;

  Session session(link, cfg.seed, TranscriptMode::ClicksOnly, salt);
  const double bias = session.ideal_bias();
  const double p_click = expected_click_probability(link);

  SweepRow row;
  row.length_km = length_km;
  row.expected_qber = expected_qber(link);
  std::uint64_t errors = 0;
  while (row.sifted < cfg.target_detections && row.pulses < cfg.max_pulses) {
    // Chunk sized to land slightly past the target.
    const double missing = static_cast<double>(cfg.target_detections - row.sifted);
    const double want = std::max(1e5, 1.05 * 2.0 * missing / std::max(p_click, 1e-300));
    const auto chunk = static_cast<std::uint64_t>(std::min(want, static_cast<double>(cfg.max_pulses - row.pulses)));
    session.run(chunk, 0.0, bias);
    const SessionTranscript t = session.take_transcript();
    const SiftedKey k = sift(t);
    row.pulses += chunk;
    row.clicks += t.records.size();
    row.sifted += k.size();
    errors += k.errors();
  }
  row.raw_rate = static_cast<double>(row.clicks) / static_cast<double>(row.pulses);
  row.sifted_rate = static_cast<double>(row.sifted) / static_cast<double>(row.pulses);
  row.qber = row.sifted ? static_cast<double>(errors) / static_cast<double>(row.sifted) : 0.5;
  row.aborted = row.sifted == 0 || row.qber > cfg.qber_limit;
  return row;
}

inline std::vector<SweepRow> sweep_distance(const ExperimentConfig& cfg, const std::vector<double>& lengths) {
  require(!lengths.empty(), "sweep_distance: lengths must not be empty");
  return run_batched(lengths.size(), worker_count(),
                     [&](std::size_t i) { return sweep_point(cfg, lengths[i], i); });
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << kSweepHeader << '\n';
  for (const auto& r : rows)
    os << format_number(r.length_km) << ',' << r.pulses << ',' << r.clicks << ',' << r.sifted << ','
       << format_number(r.raw_rate) << ',' << format_number(r.sifted_rate) << ',' << format_number(r.qber) << ','
       << format_number(r.expected_qber) << ',' << (r.aborted ? 1 : 0) << '\n';
}

// --- stability trace ------------------------------------------------------

struct StabilityTrace {
  OperationLog calibrated;
  OperationLog uncalibrated;  // one initial calibration, then drift runs free
};

inline StabilityTrace stability_trace(const ExperimentConfig& cfg, double duration_s) {
  require(duration_s > cfg.policy.period_s, "stability_trace: duration must exceed the calibration period");
  OperateOptions opt;
  opt.drift_rate = cfg.drift_rate;
  CalibrationPolicy off = cfg.policy;
  off.enabled = false;
  const LinkParams link = cfg.effective_link();
  auto logs = run_ordered(2, [&](std::size_t i) {
    return operate(link, i == 0 ? cfg.policy : off, duration_s, cfg.seed, opt);
  });
  return {std::move(logs[0]), std::move(logs[1])};
}

inline void write_stability_csv(std::ostream& os, const StabilityTrace& trace) {
  os << "run," << kOperationHeader << '\n';
  for (const auto& r : trace.calibrated.intervals) {
    os << "calibrated,";
    write_operation_row(os, r);
  }
  for (const auto& r : trace.uncalibrated.intervals) {
    os << "uncalibrated,";
    write_operation_row(os, r);
  }
}

// --- field scenario -------------------------------------------------------

inline std::string default_payload_path() { return std::string(FMQKD_DATA_DIR) + "/sample_payload.pgm"; }

inline Bytes read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParameterError("cannot open '" + path + "'");
  return Bytes(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

struct FieldReport {
  RunReport run;
  std::size_t calibrations = 0;
  double max_interval_qber = 0.0;
  std::size_t trojan_alarms = 0;
  bool otp_attempted = false;
  bool otp_roundtrip = false;
  // Payload bit error rate when Alice encrypts with her copy and Bob decrypts
  // with his; nonzero because the sifted key is not error-corrected.
  double otp_cross_error_rate = std::numeric_limits<double>::quiet_NaN();
};

inline constexpr const char* kFieldHeader =
    "seed,pulses,clicks,sifted,key_bits,qber,measured_qber,abort,raw_rate,sifted_rate,duty_cycle,calibrations,"
    "max_interval_qber,trojan_alarms,otp_roundtrip";

/// Field link, drift and periodic calibration for cfg.duration_s, followed by
/// key estimation and the one-time-pad demo on the payload.
inline FieldReport field_scenario(const ExperimentConfig& cfg, std::uint64_t seed, const Bytes& payload) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig c = cfg;
  c.scenario = Scenario::Field;
  const LinkParams link = c.effective_link();
  OperateOptions opt;
  opt.drift_rate = cfg.drift_rate;
  const OperationLog log = operate(link, cfg.policy, cfg.duration_s, seed, opt);

  FieldReport out;
  RunReport& r = out.run;
  r.seed = seed;
  r.pulses = log.qkd_pulses;
  r.clicks = log.clicks;
  r.sifted = log.key.size();
  r.qber = log.key.true_qber();
  r.raw_rate = r.pulses ? static_cast<double>(r.clicks) / static_cast<double>(r.pulses) : 0.0;
  r.sifted_rate = r.pulses ? static_cast<double>(r.sifted) / static_cast<double>(r.pulses) : 0.0;
  r.duty_cycle = log.duty_cycle();

  Rng monitor_rng = make_rng(seed, Stream::Monitor);
  for (const auto& iv : log.intervals) {
    if (iv.kind == IntervalKind::Calibration) {
      ++out.calibrations;
      continue;
    }
    if (!std::isnan(iv.qber)) out.max_interval_qber = std::max(out.max_interval_qber, iv.qber);
    const auto window = static_cast<std::uint64_t>((iv.t_end - iv.t_start) * link.source.pulse_rate_hz);
    if (window == 0) continue;
    const auto monitor = observe_window(TrojanMonitor::for_background(window, link.detector.dark_prob), monitor_rng,
                                        link.detector.dark_prob);
    out.trojan_alarms += trojan_check(monitor);
  }

  if (log.key.empty()) {
    r.aborted = true;
  } else {
    Rng rng = make_rng(seed, Stream::Sampling);
    const SiftedKey key = estimate_and_gate(log.key, cfg.sample_fraction, rng, cfg.qber_limit);
    r.measured_qber = key.measured_qber;
    r.aborted = key.aborted;
    r.key_bits = key.size();
    if (!key.aborted && key.size() >= 8 * payload.size()) {
      out.otp_attempted = true;
      const Bytes cipher = otp_encrypt(key.bits, payload);
      out.otp_roundtrip = otp_decrypt(key.bits, cipher) == payload;
      const Bytes cross = otp_decrypt(key.bits, otp_encrypt(key.alice_bits, payload));
      std::size_t wrong = 0;
      for (std::size_t i = 0; i < payload.size(); ++i) wrong += std::popcount(static_cast<unsigned>(cross[i] ^ payload[i]));
      out.otp_cross_error_rate = payload.empty() ? 0.0 : static_cast<double>(wrong) / (8.0 * payload.size());
    }
  }
  r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

/// cfg.runs consecutive seeds starting at cfg.seed.
inline std::vector<FieldReport> field_family(const ExperimentConfig& cfg, const Bytes& payload) {
  return run_batched(cfg.runs, worker_count(),
                     [&](std::size_t i) { return field_scenario(cfg, cfg.seed + i, payload); });
}

inline void write_field_csv(std::ostream& os, const std::vector<FieldReport>& reports) {
  os << kFieldHeader << '\n';
  for (const auto& f : reports) {
    const RunReport& r = f.run;
    os << r.seed << ',' << r.pulses << ',' << r.clicks << ',' << r.sifted << ',' << r.key_bits << ','
       << format_number(r.qber) << ',' << format_number(r.measured_qber) << ',' << (r.aborted ? 1 : 0) << ','
       << format_number(r.raw_rate) << ',' << format_number(r.sifted_rate) << ',' << format_number(r.duty_cycle)
       << ',' << f.calibrations << ',' << format_number(f.max_interval_qber) << ',' << f.trojan_alarms << ','
       << (f.otp_attempted ? (f.otp_roundtrip ? "1" : "0") : "") << '\n';
  }
}

}  // namespace fmqkd
