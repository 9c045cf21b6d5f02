/**
 * @file interferometer.hpp
 * @brief Unbalanced Michelson interferometers with Faraday mirrors, and the
 *        time-bin field they produce at the receiver.
 *
 * Each coder is a 2x2 fiber coupler whose two arm-side ports feed a short and
 * a long arm, each ending on a mirror. Light enters the coupler on its input
 * port, splits, reflects, and recombines, leaving on either
 *
 *   - Port::Monitor: back out of the input port. On Alice's side this is the
 *     reverse path toward the laser; on Bob's side the circulator routes it
 *     to the single photon detector.
 *   - Port::Forward: the other input-side port. On Alice's side this feeds the
 *     channel; on Bob's side it is unused (a loss sink).
 *
 * Coupler convention: straight-through amplitude sqrt(1 - ratio), cross
 * amplitude i * sqrt(ratio). The short arm sits on the straight port. The
 * phase modulator sits in the long arm; InterferometerSpec::phase is the
 * round-trip phase it imprints.
 *
 * Time bins are integer indices one arm delay apart. A pulse launched in bin
 * k leaves in bin k (short arm) and k + 1 (long arm); after both coders the
 * central bin 1 carries the interference of short-long and long-short paths.
 */

#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "fmqkd/error.hpp"
#include "fmqkd/jones.hpp"

namespace fmqkd {

struct InterferometerSpec {
  double coupler_ratio = 0.5;  // power fraction coupled to the cross port
  double delay_ns = 7.5;       // long arm minus short arm, round trip
  JonesMatrix short_arm = JonesMatrix::identity();
  JonesMatrix long_arm = JonesMatrix::identity();
  double phase = 0.0;              // modulator round-trip phase, radians
  double modulator_loss_db = 3.0;  // single pass
  MirrorKind short_mirror = MirrorKind::Faraday90;
  MirrorKind long_mirror = MirrorKind::Faraday90;

  // Faraday mirrors, identity arms, lossless modulator.
  static InterferometerSpec ideal(double phase = 0.0) {
    InterferometerSpec s;
    s.phase = phase;
    s.modulator_loss_db = 0.0;
    return s;
  }

  void validate(double pulse_width_ns) const {
    require(coupler_ratio > 0.0 && coupler_ratio < 1.0, "coupler ratio must lie in (0,1)");
    require(delay_ns > pulse_width_ns, "arm delay must exceed the pulse width so time bins separate");
    require(modulator_loss_db >= 0.0, "modulator loss must be >= 0 dB");
  }

  double straight() const { return std::sqrt(1.0 - coupler_ratio); }
  double cross() const { return std::sqrt(coupler_ratio); }

  JonesMatrix short_round_trip() const { return arm_round_trip(short_arm, short_mirror, 0.0); }

  JonesMatrix long_round_trip() const {
    // Two passes through the modulator.
    const double loss = db_to_amplitude(2.0 * modulator_loss_db);
    return cplx{loss, 0.0} * arm_round_trip(long_arm, long_mirror, phase);
  }
};

enum class Port { Monitor, Forward };

/// Field amplitudes keyed by (time bin, coupler port).
class TimeBinField {
 public:
  using Key = std::pair<int, Port>;

  void add(int bin, Port port, const JonesVector& v) { cells_[{bin, port}] += v; }

  JonesVector at(int bin, Port port) const {
    const auto it = cells_.find({bin, port});
    return it == cells_.end() ? JonesVector{} : it->second;
  }

  double power(int bin, Port port) const { return at(bin, port).norm2(); }

  double total_power() const {
    double p = 0.0;
    for (const auto& [key, v] : cells_) p += v.norm2();
    return p;
  }

  const std::map<Key, JonesVector>& cells() const { return cells_; }

 private:
  std::map<Key, JonesVector> cells_;
};

inline TimeBinField interferometer_transfer(const InterferometerSpec& spec, const JonesVector& input,
                                            int input_bin) {
  const double t = spec.straight();
  const cplx is = kI * spec.cross();
  const JonesVector short_back = spec.short_round_trip() * input;
  const JonesVector long_back = spec.long_round_trip() * input;

  TimeBinField out;
  // Input -> short (straight) -> back to input (straight) or across (cross).
  out.add(input_bin, Port::Monitor, cplx{t * t} * short_back);
  out.add(input_bin, Port::Forward, (is * t) * short_back);
  // Input -> long (cross) -> back across (cross) or straight to forward.
  out.add(input_bin + 1, Port::Monitor, (is * is) * long_back);
  out.add(input_bin + 1, Port::Forward, (is * t) * long_back);
  return out;
}

struct EndToEndField {
  TimeBinField alice_monitor;  // light Alice's coder returns toward her laser
  TimeBinField bob;            // Monitor = detector (via circulator), Forward = unused port

  double total_power() const { return alice_monitor.total_power() + bob.total_power(); }

  double detector_probability(int bin) const { return bob.power(bin, Port::Monitor); }
};

/// Alice's coder, one pass of the channel, Bob's coder. Only Alice's forward
/// port is launched into the channel; her monitor-port output is kept for
/// power accounting.
inline EndToEndField end_to_end_field(const InterferometerSpec& alice, const JonesMatrix& channel,
                                      const InterferometerSpec& bob,
                                      const JonesVector& input = JonesVector::horizontal()) {
  const TimeBinField a = interferometer_transfer(alice, input, 0);
  EndToEndField out;
  for (const auto& [key, v] : a.cells()) {
    const auto [bin, port] = key;
    if (port == Port::Monitor) {
      out.alice_monitor.add(bin, port, v);
      continue;
    }
    const TimeBinField b = interferometer_transfer(bob, channel * v, bin);
    for (const auto& [bkey, bv] : b.cells()) out.bob.add(bkey.first, bkey.second, bv);
  }
  return out;
}

/// The two central-bin paths at Bob, split out so their modulator phases can
/// be applied as scalars. Built from the optics with both modulator phases at
/// zero; the amplitude on a port is then
///     alice_long * e^{i alice_phase} + bob_long * e^{i bob_phase}.
struct CentralBinPaths {
  JonesVector monitor_alice_long;  // Alice long arm, Bob short arm
  JonesVector monitor_bob_long;    // Alice short arm, Bob long arm
  JonesVector forward_alice_long;
  JonesVector forward_bob_long;

  double probability(Port port, double alice_phase, double bob_phase) const {
    const auto& a = port == Port::Monitor ? monitor_alice_long : forward_alice_long;
    const auto& b = port == Port::Monitor ? monitor_bob_long : forward_bob_long;
    return (std::polar(1.0, alice_phase) * a + std::polar(1.0, bob_phase) * b).norm2();
  }

  // Bob phase that makes the detector port constructive when Alice's phase is 0.
  double constructive_bob_phase() const {
    return std::arg(inner(monitor_bob_long, monitor_alice_long));
  }
};

inline CentralBinPaths central_bin_paths(InterferometerSpec alice, const JonesMatrix& channel,
                                         InterferometerSpec bob,
                                         const JonesVector& input = JonesVector::horizontal()) {
  alice.phase = 0.0;
  bob.phase = 0.0;
  const TimeBinField a = interferometer_transfer(alice, input, 0);
  const TimeBinField via_alice_long = interferometer_transfer(bob, channel * a.at(1, Port::Forward), 1);
  const TimeBinField via_alice_short = interferometer_transfer(bob, channel * a.at(0, Port::Forward), 0);
  return {via_alice_long.at(1, Port::Monitor), via_alice_short.at(1, Port::Monitor),
          via_alice_long.at(1, Port::Forward), via_alice_short.at(1, Port::Forward)};
}

/// Detector-port probability in the central bin for ideal lossless coders and
/// a channel of the given power transmittance and polarization transfer.
/// With this coupler convention the fringe peaks at alice_phase - bob_phase = pi.
inline double central_bin_probability(double alice_phase, double bob_phase, double channel_transmittance,
                                      const JonesMatrix& channel_unitary) {
  require(std::isfinite(alice_phase) && std::isfinite(bob_phase), "phases must be finite");
  require(channel_transmittance >= 0.0 && channel_transmittance <= 1.0, "transmittance must lie in [0,1]");
  const JonesMatrix channel = cplx{std::sqrt(channel_transmittance), 0.0} * channel_unitary;
  const EndToEndField f = end_to_end_field(InterferometerSpec::ideal(alice_phase), channel,
                                           InterferometerSpec::ideal(bob_phase));
  return f.detector_probability(1);
}

/// Fringe visibility (max - min) / (max + min) of a phase scan.
inline double visibility(std::span<const double> probabilities) {
  require(probabilities.size() >= 8, "visibility needs at least 8 scan samples");
  double lo = probabilities[0];
  double hi = probabilities[0];
  for (double p : probabilities) {
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  if (hi + lo <= 0.0) throw UndefinedVisibility("visibility undefined: scan contains no light");
  return (hi - lo) / (hi + lo);
}

// n equally spaced phases in [0, 2pi).
inline std::vector<double> phase_grid(std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
  return out;
}

}  // namespace fmqkd
