/**
 * @file channel.hpp
 * @brief Faint-pulse source, fiber, gated detector and the analytic QBER model.
 *
 * Detection uses the Poisson-averaged form: a pulse of mean photon number mu
 * that reaches the detector with overall efficiency eta clicks with
 * probability 1 - exp(-mu * eta). Dark clicks are drawn only when no signal
 * click occurred, so the per-gate click probability is
 *     p_sig + (1 - p_sig) * dark_prob.
 *
 * Bit decisions: a signal click lands on bit 0 (Bob's detector port) or bit 1
 * (the complementary central-bin output) in proportion to the two central-bin
 * probabilities, then is flipped with probability e_opt. A dark click carries
 * a uniformly random bit.
 */

#pragma once

#include <cmath>
#include <cstdint>

#include "fmqkd/error.hpp"
#include "fmqkd/interferometer.hpp"
#include "fmqkd/jones.hpp"
#include "fmqkd/rng.hpp"

namespace fmqkd {

struct SourceModel {
  double mu_signal = 0.1;       // mean photons per coded pulse at Alice's output
  double mu_unmodulated = 0.4;  // test pulses, no modulator attenuation
  double pulse_width_ns = 1.0;
  double pulse_rate_hz = 1e6;
};

struct FiberSpec {
  double length_km = 125.0;
  double atten_db_per_km = 0.208;  // 26 dB over 125 km
  std::uint64_t birefringence_seed = 1;
};

struct DetectorModel {
  double efficiency = 0.20;
  double dark_prob = 8e-7;  // per gate
  double gate_width_ns = 2.5;
};

/// Everything needed to turn an interference probability into click statistics.
/// efficiency, bob_insertion_loss_db and e_opt are a calibrated trio: together
/// they put the lab QBER at 125 km near 4.5%.
struct LinkParams {
  SourceModel source;
  FiberSpec fiber;
  DetectorModel detector;
  double bob_insertion_loss_db = 1.25;
  double e_opt = 0.035;
  double coder_delay_ns = 7.5;

  void validate() const {
    require(source.mu_signal > 0.0, "source.mu_signal must be > 0");
    require(source.mu_unmodulated >= source.mu_signal, "source.mu_unmodulated must be >= source.mu_signal");
    require(source.pulse_width_ns > 0.0 && source.pulse_width_ns < coder_delay_ns,
            "source.pulse_width_ns must lie in (0, coder delay)");
    require(source.pulse_rate_hz > 0.0, "source.pulse_rate_hz must be > 0");
    require(fiber.length_km >= 0.0, "fiber.length_km must be >= 0");
    require(fiber.atten_db_per_km > 0.0, "fiber.atten_db_per_km must be > 0");
    require(detector.efficiency > 0.0 && detector.efficiency <= 1.0, "detector.efficiency must lie in (0,1]");
    require(detector.dark_prob >= 0.0 && detector.dark_prob < 1.0, "detector.dark_prob must lie in [0,1)");
    require(detector.gate_width_ns > 0.0, "detector.gate_width_ns must be > 0");
    require(bob_insertion_loss_db >= 0.0, "link.bob_insertion_loss_db must be >= 0");
    require(e_opt >= 0.0 && e_opt <= 0.5, "link.e_opt must lie in [0,0.5]");
  }
};

enum class ClickOrigin { None, Signal, Dark };

struct ClickOutcome {
  bool clicked = false;
  ClickOrigin origin = ClickOrigin::None;

  friend bool operator==(const ClickOutcome&, const ClickOutcome&) = default;
};

inline double transmittance(double length_km, double atten_db_per_km) {
  require(length_km >= 0.0, "transmittance: length must be >= 0");
  return std::pow(10.0, -length_km * atten_db_per_km / 10.0);
}

inline double fiber_transmittance(const LinkParams& link) {
  return transmittance(link.fiber.length_km, link.fiber.atten_db_per_km);
}

// Fiber, Bob's insertion loss and detector efficiency.
inline double overall_efficiency(const LinkParams& link) {
  return fiber_transmittance(link) * db_to_power(link.bob_insertion_loss_db) * link.detector.efficiency;
}

// Ideal central-bin probability of two perfectly interfering quarter-amplitude paths.
inline constexpr double kCentralBinCeiling = 0.25;

/// Click probability for a pulse of mean photon number mu whose lossless
/// central-bin interference probability is interference_prob.
inline double click_probability_for(double mu, const LinkParams& link, double interference_prob) {
  require(interference_prob >= 0.0 && interference_prob <= 1.0, "interference probability must lie in [0,1]");
  return -std::expm1(-mu * overall_efficiency(link) * interference_prob / kCentralBinCeiling);
}

inline double signal_click_probability(const LinkParams& link, double interference_prob) {
  return click_probability_for(link.source.mu_signal, link, interference_prob);
}

inline ClickOutcome sample_click(Rng& rng, double p_signal, double dark_prob) {
  require(p_signal >= 0.0 && p_signal <= 1.0 && dark_prob >= 0.0 && dark_prob <= 1.0,
          "sample_click: probabilities must lie in [0,1]");
  if (bernoulli(rng, p_signal)) return {true, ClickOrigin::Signal};
  if (bernoulli(rng, dark_prob)) return {true, ClickOrigin::Dark};
  return {};
}

// Per-gate probability that a signal or dark click occurs.
inline double gate_click_probability(double p_signal, double dark_prob) {
  return p_signal + (1.0 - p_signal) * dark_prob;
}

/// Probability that a signal click is decoded as bit 0, given the two lossless
/// central-bin probabilities (detector port, complementary port).
inline double decode_zero_probability(double p_detector, double p_complement, double e_opt) {
  const double total = p_detector + p_complement;
  const double q0 = total > 0.0 ? p_detector / total : 0.5;
  return (1.0 - e_opt) * q0 + e_opt * (1.0 - q0);
}

/// Error probability of a matched-basis signal click when the working point
/// is off by working_point_error radians.
inline double signal_error_probability(double e_opt, double working_point_error) {
  const double s = std::sin(working_point_error / 2.0);
  return e_opt + (1.0 - 2.0 * e_opt) * s * s;
}

/// Analytic sifted-key QBER. Mismatched bases carry no correlation at all.
inline double expected_qber(const LinkParams& link, bool basis_matched = true, double working_point_error = 0.0) {
  if (!basis_matched) return 0.5;
  const double p_sig = signal_click_probability(link, kCentralBinCeiling);
  const double p_dark = (1.0 - p_sig) * link.detector.dark_prob;
  if (p_sig + p_dark <= 0.0) return 0.5;
  const double e = signal_error_probability(link.e_opt, working_point_error);
  return (e * p_sig + 0.5 * p_dark) / (p_sig + p_dark);
}

// Expected clicks per coded pulse; independent of the symbols sent.
inline double expected_click_probability(const LinkParams& link) {
  return gate_click_probability(signal_click_probability(link, kCentralBinCeiling), link.detector.dark_prob);
}

/// Polarization transfer of the fiber: a Haar-random unitary fixed by the
/// fiber's birefringence seed.
inline JonesMatrix channel_unitary(const LinkParams& link) {
  Rng rng = make_rng(link.fiber.birefringence_seed, Stream::Birefringence);
  return random_birefringence(rng, 0.0);
}

/// Detector-port central-bin probability through the full link, fiber loss included.
inline double central_bin_probability(double alice_phase, double bob_phase, const LinkParams& link,
                                      const JonesMatrix& channel) {
  return central_bin_probability(alice_phase, bob_phase, fiber_transmittance(link), channel);
}

/// Lossless central-bin paths through Alice, the link's channel unitary and
/// Bob, with ideal Faraday-mirrored coders. Loss enters via the click model.
inline CentralBinPaths link_paths(const LinkParams& link) {
  return central_bin_paths(InterferometerSpec::ideal(), channel_unitary(link), InterferometerSpec::ideal());
}

}  // namespace fmqkd
