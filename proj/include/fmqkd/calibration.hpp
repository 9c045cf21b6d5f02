/**
 * @file calibration.hpp
 * @brief Residual phase drift and the periodic test-and-correct loop.
 *
 * With Faraday mirrors the polarization of the link is harmless, but the
 * optical path difference between Alice's and Bob's interferometers still
 * wanders with temperature. The drift is modeled as a Brownian phase walk and
 * is corrected by scanning Bob's modulator over a full fringe with bright
 * test pulses, fitting c0 + c1 cos(phi) + c2 sin(phi), and moving Bob's bias
 * to the fitted peak. Key exchange is suspended while a scan runs.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fmqkd/channel.hpp"
#include "fmqkd/error.hpp"
#include "fmqkd/format.hpp"
#include "fmqkd/interferometer.hpp"
#include "fmqkd/protocol.hpp"
#include "fmqkd/rng.hpp"

namespace fmqkd {

// Wraps into (-pi, pi].
inline double wrap_phase(double phi) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(phi, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  if (r > std::numbers::pi) r -= two_pi;
  return r;
}

struct DriftState {
  double offset = 0.0;  // wrapped to (-pi, pi]
  double rate = 0.005;  // rad / sqrt(s)
  Rng rng;
};

inline DriftState advance_drift(DriftState state, double dt) {
  require(dt >= 0.0, "advance_drift: dt must be >= 0");
  if (dt == 0.0 || state.rate == 0.0) return state;
  std::normal_distribution<double> step(0.0, state.rate * std::sqrt(dt));
  state.offset = wrap_phase(state.offset + step(state.rng));
  return state;
}

struct CalibrationPolicy {
  bool enabled = true;  // false: one initial calibration, then none
  double period_s = 500.0;  // calibration start to calibration start
  std::size_t scan_points = 16;
  std::uint64_t pulses_per_point = 2'500'000;
  double qber_trigger = 0.0;  // recalibrate early above this running QBER; 0 disables

  double scan_time(double pulse_rate_hz) const {
    return static_cast<double>(scan_points) * static_cast<double>(pulses_per_point) / pulse_rate_hz;
  }

  double duty_cycle(double pulse_rate_hz) const { return scan_time(pulse_rate_hz) / period_s; }

  void validate(double pulse_rate_hz) const {
    require(scan_points >= 8, "policy.scan_points must be >= 8");
    require(pulses_per_point > 0, "policy.pulses_per_point must be > 0");
    require(period_s > 0.0, "policy.period_s must be > 0");
    require(qber_trigger >= 0.0 && qber_trigger <= 0.5, "policy.qber_trigger must lie in [0,0.5]");
    require(duty_cycle(pulse_rate_hz) <= kMaxDutyCycle,
            "policy rejected: calibration duty cycle " + format_number(duty_cycle(pulse_rate_hz), 4) +
                " exceeds " + format_number(kMaxDutyCycle));
  }

  static constexpr double kMaxDutyCycle = 0.10;
};

struct FringeSample {
  double phase = 0.0;  // scan phase added to Bob's current bias
  std::uint64_t counts = 0;
  std::uint64_t pulses = 0;
};

struct CalibrationResult {
  double offset = 0.0;  // scan phase of the fringe peak, (-pi, pi]
  double visibility = 0.0;
  double residual = 0.0;  // RMS of count residuals
  std::uint64_t pulses = 0;
};

namespace detail {

// Least-squares fit of y = c0 + c1 cos(phase) + c2 sin(phase).
inline CalibrationResult fit_cosine(std::span<const double> phases, std::span<const double> y, double background) {
  if (phases.size() < 8) throw CalibrationFailed("fit_fringe: need at least 8 samples");
  std::array<std::array<double, 4>, 3> a{};
  for (std::size_t k = 0; k < phases.size(); ++k) {
    const double f[3] = {1.0, std::cos(phases[k]), std::sin(phases[k])};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) a[i][j] += f[i] * f[j];
      a[i][3] += f[i] * y[k];
    }
  }
  // Gaussian elimination with partial pivoting.
  const double scale = static_cast<double>(phases.size());
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) < 1e-9 * scale) throw CalibrationFailed("fit_fringe: samples do not span a period");
    std::swap(a[col], a[piv]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double k = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c) a[r][c] -= k * a[col][c];
    }
  }
  const double c0 = a[0][3] / a[0][0];
  const double c1 = a[1][3] / a[1][1];
  const double c2 = a[2][3] / a[2][2];

  const double amplitude = std::hypot(c1, c2);
  const double signal = c0 - background;
  if (c0 <= 0.0 || signal <= 0.0) throw CalibrationFailed("fit_fringe: no light above background");
  if (amplitude <= 1e-9 * c0) throw CalibrationFailed("fit_fringe: no usable fringe (visibility 0)");

  double ss = 0.0;
  for (std::size_t k = 0; k < phases.size(); ++k) {
    const double r = y[k] - (c0 + c1 * std::cos(phases[k]) + c2 * std::sin(phases[k]));
    ss += r * r;
  }
  CalibrationResult out;
  out.offset = wrap_phase(std::atan2(c2, c1));
  out.visibility = std::clamp(amplitude / signal, 0.0, 1.0);
  out.residual = std::sqrt(ss / scale);
  return out;
}

}  // namespace detail

/// Least-squares fit of counts = c0 + c1 cos(phase) + c2 sin(phase).
/// The fringe peaks at offset = atan2(c2, c1): moving the scanned phase by
/// -offset, or equivalently adding offset to the bias, restores the peak.
/// background is the expected dark count per point, removed before the
/// visibility ratio is formed.
inline CalibrationResult fit_fringe(std::span<const FringeSample> samples, double background = 0.0) {
  std::vector<double> phases, y;
  std::uint64_t pulses = 0;
  for (const auto& s : samples) {
    phases.push_back(s.phase);
    y.push_back(static_cast<double>(s.counts));
    pulses += s.pulses;
  }
  CalibrationResult out = detail::fit_cosine(phases, y, background);
  out.pulses = pulses;
  return out;
}

/// Same fit on the mean photon flux behind the counts, -ln(1 - counts/pulses),
/// with the dark-count share removed. The flux is linear in the interference
/// probability, so bright scans are not flattened at the fringe peak.
inline CalibrationResult fit_fringe_flux(std::span<const FringeSample> samples, double dark_prob) {
  std::vector<double> phases, y;
  std::uint64_t pulses = 0;
  double counts = 0.0;
  double dark_expected = 0.0;
  for (const auto& s : samples) {
    counts += static_cast<double>(s.counts);
    dark_expected += static_cast<double>(s.pulses) * dark_prob;
  }
  // Require light 5 sigma above the dark-count expectation.
  if (counts - dark_expected <= 5.0 * std::sqrt(dark_expected + 1.0))
    throw CalibrationFailed("fit_fringe_flux: no light above background");
  for (const auto& s : samples) {
    if (s.pulses == 0) throw CalibrationFailed("fit_fringe_flux: sample without pulses");
    if (s.counts >= s.pulses) throw CalibrationFailed("fit_fringe_flux: detector saturated");
    phases.push_back(s.phase);
    const double frac = static_cast<double>(s.counts) / static_cast<double>(s.pulses);
    y.push_back(-std::log1p(-frac) + std::log1p(-dark_prob));
    pulses += s.pulses;
  }
  CalibrationResult out = detail::fit_cosine(phases, y, 0.0);
  out.pulses = pulses;
  return out;
}

/// The simulated installation: link, drifting interferometer pair, Bob's
/// modulator bias and a simulated clock with its calibration-time ledger.
class Testbed {
 public:
  Testbed(const LinkParams& link, double drift_rate, std::uint64_t seed)
      : link_(link), paths_(link_paths(link)), count_rng_(make_rng(seed, Stream::Calibration)) {
    link_.validate();
    require(drift_rate >= 0.0, "drift rate must be >= 0");
    drift_.rate = drift_rate;
    drift_.rng = make_rng(seed, Stream::Drift);
  }

  const LinkParams& link() const { return link_; }
  const CentralBinPaths& paths() const { return paths_; }
  const DriftState& drift() const { return drift_; }
  double bob_bias() const { return bias_; }
  double clock() const { return clock_; }
  double calibration_time() const { return calibration_time_; }

  void set_drift_offset(double phi) { drift_.offset = wrap_phase(phi); }
  void set_bob_bias(double b) { bias_ = wrap_phase(b); }
  void shift_bob_bias(double d) { bias_ = wrap_phase(bias_ + d); }

  /// Signed distance of Bob's bias from the constructive working point.
  double working_point_error() const {
    return wrap_phase(bias_ - drift_.offset - paths_.constructive_bob_phase());
  }

  /// Lets simulated time pass; calibrating marks it as scan time.
  void elapse(double dt, bool calibrating) {
    drift_ = advance_drift(std::move(drift_), dt);
    clock_ += dt;
    if (calibrating) calibration_time_ += dt;
  }

  /// Clicks on Bob's detector for pulses of mean photon number mu with Bob's
  /// modulator at bias + scan_phase and Alice's at 0.
  std::uint64_t test_counts(double mu, double scan_phase, std::uint64_t pulses) {
    const double p_interf = paths_.probability(Port::Monitor, drift_.offset, bias_ + scan_phase);
    const double p = gate_click_probability(click_probability_for(mu, link_, std::min(p_interf, 1.0)),
                                            link_.detector.dark_prob);
    return std::binomial_distribution<std::uint64_t>(pulses, p)(count_rng_);
  }

 private:
  LinkParams link_;
  CentralBinPaths paths_;
  DriftState drift_;
  Rng count_rng_;
  double bias_ = 0.0;
  double clock_ = 0.0;
  double calibration_time_ = 0.0;
};

/// Steps Bob's modulator over scan_points phases in [0, 2pi), firing
/// pulses_per_point unmodulated-level test pulses at each.
inline std::vector<FringeSample> fringe_scan(Testbed& bed, const CalibrationPolicy& policy) {
  require(policy.scan_points >= 8, "fringe_scan: scan_points must be >= 8");
  const double dt = static_cast<double>(policy.pulses_per_point) / bed.link().source.pulse_rate_hz;
  std::vector<FringeSample> out;
  out.reserve(policy.scan_points);
  for (double phase : phase_grid(policy.scan_points)) {
    out.push_back({phase, bed.test_counts(bed.link().source.mu_unmodulated, phase, policy.pulses_per_point),
                   policy.pulses_per_point});
    bed.elapse(dt, true);
  }
  return out;
}

enum class IntervalKind { Calibration, Qkd };

struct IntervalRecord {
  double t_start = 0.0;
  double t_end = 0.0;
  double phase = 0.0;  // drift offset at t_end
  IntervalKind kind = IntervalKind::Qkd;
  double qber = std::numeric_limits<double>::quiet_NaN();
  double visibility = std::numeric_limits<double>::quiet_NaN();
  double correction = std::numeric_limits<double>::quiet_NaN();
  double duty_cycle_cum = 0.0;
  // Not exported; kept for analysis.
  double working_point_error = 0.0;  // after the interval (calibration) or averaged over it (qkd)
  std::uint64_t sifted = 0;
  bool failed = false;
};

struct OperationLog {
  std::vector<IntervalRecord> intervals;
  SiftedKey key;  // sifted, before estimation
  std::uint64_t qkd_pulses = 0;
  std::uint64_t clicks = 0;
  double total_time = 0.0;
  double calibration_time = 0.0;

  double duty_cycle() const { return total_time > 0.0 ? calibration_time / total_time : 0.0; }
};

struct OperateOptions {
  double drift_rate = 0.005;
  // Time resolution of the drift during key exchange.
  double drift_step_s = 1.0;
  // Draw the starting interferometer offset uniformly; otherwise start at 0.
  bool random_initial_offset = true;
  std::uint64_t session_salt = 0;
};

inline constexpr const char* kOperationHeader = "t_start,t_end,phase,kind,qber,visibility,correction,duty_cycle_cum";

/// One calibration: scan, fit, move Bob's bias to the peak. On a failed fit
/// the bias is left alone.
inline IntervalRecord calibrate(Testbed& bed, const CalibrationPolicy& policy) {
  IntervalRecord rec;
  rec.kind = IntervalKind::Calibration;
  rec.t_start = bed.clock();
  const auto samples = fringe_scan(bed, policy);
  try {
    const CalibrationResult fit = fit_fringe_flux(samples, bed.link().detector.dark_prob);
    bed.shift_bob_bias(fit.offset);
    rec.visibility = fit.visibility;
    rec.correction = fit.offset;
  } catch (const CalibrationFailed&) {
    rec.visibility = 0.0;
    rec.correction = 0.0;
    rec.failed = true;
  }
  rec.t_end = bed.clock();
  rec.phase = bed.drift().offset;
  rec.working_point_error = bed.working_point_error();
  rec.duty_cycle_cum = bed.calibration_time() / bed.clock();
  return rec;
}

/// Alternates calibration and key exchange for total_time seconds.
inline OperationLog operate(const LinkParams& link, const CalibrationPolicy& policy, double total_time,
                            std::uint64_t seed, const OperateOptions& options = {}) {
  link.validate();
  policy.validate(link.source.pulse_rate_hz);
  require(total_time > policy.period_s, "operate: total_time must exceed the calibration period");
  require(options.drift_step_s > 0.0, "operate: drift step must be > 0");

  Testbed bed(link, options.drift_rate, seed);
  if (options.random_initial_offset) {
    Rng init = make_rng(seed, Stream::Drift, 1);
    bed.set_drift_offset(std::uniform_real_distribution<double>(-std::numbers::pi, std::numbers::pi)(init));
  }
  Session session(link, seed, TranscriptMode::ClicksOnly, options.session_salt);

  const double rate = link.source.pulse_rate_hz;
  const double qkd_length = policy.period_s - policy.scan_time(rate);
  OperationLog log;
  double last_visibility = std::numeric_limits<double>::quiet_NaN();
  bool calibrated_once = false;

  while (bed.clock() < total_time) {
    if (policy.enabled || !calibrated_once) {
      if (bed.clock() + policy.scan_time(rate) > total_time) break;
      IntervalRecord rec = calibrate(bed, policy);
      last_visibility = rec.visibility;
      calibrated_once = true;
      log.intervals.push_back(rec);
    }

    IntervalRecord rec;
    rec.kind = IntervalKind::Qkd;
    rec.t_start = bed.clock();
    rec.visibility = last_visibility;
    const double end = std::min(total_time, bed.clock() + qkd_length);
    double wp_sum = 0.0;
    double wp_time = 0.0;
    SiftedKey interval_key;
    while (bed.clock() < end - 1e-9) {
      const double dt = std::min(options.drift_step_s, end - bed.clock());
      const auto pulses = static_cast<std::uint64_t>(std::llround(dt * rate));
      session.run(pulses, bed.drift().offset, bed.bob_bias());
      wp_sum += std::abs(bed.working_point_error()) * dt;
      wp_time += dt;
      log.qkd_pulses += pulses;
      bed.elapse(dt, false);

      if (policy.enabled && policy.qber_trigger > 0.0) {
        const SiftedKey part = sift(session.transcript());
        if (part.size() >= 100 && part.true_qber() > policy.qber_trigger) break;
      }
    }
    const SessionTranscript t = session.take_transcript();
    log.clicks += t.records.size();
    interval_key = sift(t);
    rec.t_end = bed.clock();
    rec.phase = bed.drift().offset;
    rec.sifted = interval_key.size();
    rec.qber = interval_key.true_qber();
    rec.working_point_error = wp_time > 0.0 ? wp_sum / wp_time : 0.0;
    rec.duty_cycle_cum = bed.calibration_time() / bed.clock();
    log.key.append(interval_key);
    log.intervals.push_back(rec);
  }
  log.total_time = bed.clock();
  log.calibration_time = bed.calibration_time();
  return log;
}

inline const char* interval_kind_name(IntervalKind k) { return k == IntervalKind::Calibration ? "calib" : "qkd"; }

inline void write_operation_row(std::ostream& os, const IntervalRecord& r) {
  os << format_number(r.t_start) << ',' << format_number(r.t_end) << ',' << format_number(r.phase) << ','
     << interval_kind_name(r.kind) << ',' << format_number(r.qber) << ',' << format_number(r.visibility) << ','
     << format_number(r.correction) << ',' << format_number(r.duty_cycle_cum) << '\n';
}

inline void write_operation_csv(std::ostream& os, const OperationLog& log) {
  os << kOperationHeader << '\n';
  for (const auto& r : log.intervals) write_operation_row(os, r);
}

}  // namespace fmqkd
