/**
 * @file protocol.hpp
 * @brief BB84 phase coding over the two-interferometer link: Alice and Bob
 *        state machines, sifting, QBER estimation with the abort rule,
 *        Trojan-horse monitoring and the one-time pad.
 *
 * Phase tables (round-trip modulator phases):
 *
 *     Alice  Z: 0 -> 0,     1 -> pi        Bob  Z -> 0
 *            X: 0 -> pi/2,  1 -> 3pi/2          X -> pi/2
 *
 * Bob's modulator additionally carries a static bias that puts his detector
 * port on the constructive side of the fringe for matched bases and bit 0.
 * The bias is what calibration maintains.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fmqkd/channel.hpp"
#include "fmqkd/error.hpp"
#include "fmqkd/format.hpp"
#include "fmqkd/interferometer.hpp"
#include "fmqkd/rng.hpp"

namespace fmqkd {

enum class Basis : std::uint8_t { Z, X };

struct Symbol {
  std::uint8_t bit = 0;
  Basis basis = Basis::Z;

  friend bool operator==(const Symbol&, const Symbol&) = default;
};

inline double alice_phase(Symbol sym) {
  const double base = sym.basis == Basis::Z ? 0.0 : std::numbers::pi / 2.0;
  return base + (sym.bit ? std::numbers::pi : 0.0);
}

inline double bob_phase(Basis basis) { return basis == Basis::Z ? 0.0 : std::numbers::pi / 2.0; }

inline char basis_char(Basis b) { return b == Basis::Z ? 'Z' : 'X'; }

struct PulseRecord {
  std::uint64_t index = 0;
  Symbol alice;
  double alice_phase = 0.0;
  Basis bob_basis = Basis::Z;
  double bob_phase = 0.0;
  ClickOutcome outcome;
  std::optional<std::uint8_t> decoded_bit;

  bool sifted() const { return outcome.clicked && alice.basis == bob_basis; }
};

enum class TranscriptMode {
  Full,        // one record per pulse
  ClicksOnly,  // records for clicked pulses only; n_pulses still counts every pulse
};

struct SessionTranscript {
  std::vector<PulseRecord> records;
  LinkParams link;
  std::uint64_t seed = 0;
  std::uint64_t n_pulses = 0;
  TranscriptMode mode = TranscriptMode::Full;

  std::uint64_t clicks() const {
    return static_cast<std::uint64_t>(
        std::count_if(records.begin(), records.end(), [](const PulseRecord& r) { return r.outcome.clicked; }));
  }
};

struct SessionOptions {
  TranscriptMode mode = TranscriptMode::Full;
  // Phase offset of the interferometer pair (drift), applied on Alice's side.
  double drift = 0.0;
  // Static bias on Bob's modulator; unset means the ideal working point.
  std::optional<double> bob_bias;
  // Replaces the physical signal click probability (single-pulse checks).
  std::optional<double> signal_probability;
};

/// Alice, the link and Bob, driven pulse by pulse. Alice, Bob and the
/// channel draw from separate substreams of the session seed.
class Session {
 public:
  Session(const LinkParams& link, std::uint64_t seed, TranscriptMode mode = TranscriptMode::Full,
          std::uint64_t salt = 0)
      : link_(link),
        paths_(link_paths(link)),
        alice_rng_(make_rng(seed, Stream::Alice, salt)),
        bob_rng_(make_rng(seed, Stream::Bob, salt)),
        channel_rng_(make_rng(seed, Stream::Channel, salt)) {
    link_.validate();
    transcript_.link = link;
    transcript_.seed = seed;
    transcript_.mode = mode;
    p_signal_ = signal_click_probability(link_, kCentralBinCeiling);
  }

  const CentralBinPaths& paths() const { return paths_; }

  double ideal_bias() const { return paths_.constructive_bob_phase(); }

  void override_signal_probability(double p) {
    require(p >= 0.0 && p <= 1.0, "signal probability must lie in [0,1]");
    p_signal_ = p;
  }

  /// Fire n_pulses with the interferometers offset by drift and Bob's
  /// modulator biased by bob_bias.
  void run(std::uint64_t n_pulses, double drift, double bob_bias) {
    if (transcript_.mode == TranscriptMode::Full)
      run_full(n_pulses, drift, bob_bias);
    else
      run_sparse(n_pulses, drift, bob_bias);
  }

  const SessionTranscript& transcript() const { return transcript_; }
  // Hands over the records gathered so far; the pulse counter keeps running.
  SessionTranscript take_transcript() {
    SessionTranscript out = transcript_;
    transcript_.records.clear();
    return out;
  }
  // Drops stored records, keeping the pulse counter.
  void clear_records() { transcript_.records.clear(); }

 private:
  Symbol draw_symbol() {
    std::uniform_int_distribution<int> bit(0, 1);
    const auto b = static_cast<std::uint8_t>(bit(alice_rng_));
    const auto basis = bit(alice_rng_) ? Basis::X : Basis::Z;
    return {b, basis};
  }

  Basis draw_basis() { return std::uniform_int_distribution<int>(0, 1)(bob_rng_) ? Basis::X : Basis::Z; }

  std::uint8_t decode(const PulseRecord& r, double drift, double bob_bias) {
    if (r.outcome.origin == ClickOrigin::Dark) return bernoulli(channel_rng_, 0.5) ? 1 : 0;
    const double a = r.alice_phase + drift;
    const double b = r.bob_phase + bob_bias;
    const double p0 = decode_zero_probability(paths_.probability(Port::Monitor, a, b),
                                              paths_.probability(Port::Forward, a, b), link_.e_opt);
    return bernoulli(channel_rng_, p0) ? 0 : 1;
  }

  PulseRecord make_record(std::uint64_t index) {
    PulseRecord r;
    r.index = index;
    r.alice = draw_symbol();
    r.alice_phase = alice_phase(r.alice);
    r.bob_basis = draw_basis();
    r.bob_phase = bob_phase(r.bob_basis);
    return r;
  }

  void run_full(std::uint64_t n_pulses, double drift, double bob_bias) {
    for (std::uint64_t k = 0; k < n_pulses; ++k) {
      PulseRecord r = make_record(transcript_.n_pulses++);
      r.outcome = sample_click(channel_rng_, p_signal_, link_.detector.dark_prob);
      if (r.outcome.clicked) r.decoded_bit = decode(r, drift, bob_bias);
      transcript_.records.push_back(r);
    }
  }

  // Click probability does not depend on the symbols (the two central-bin
  // outputs always sum to the same power), so the gap to the next click is
  // geometric and symbols are drawn only for clicked pulses.
  void run_sparse(std::uint64_t n_pulses, double drift, double bob_bias) {
    const double dark = link_.detector.dark_prob;
    const double p_click = gate_click_probability(p_signal_, dark);
    const std::uint64_t end = transcript_.n_pulses + n_pulses;
    if (p_click <= 0.0) {
      transcript_.n_pulses = end;
      return;
    }
    std::geometric_distribution<std::uint64_t> gap(p_click < 1.0 ? p_click : 0.5);
    std::uint64_t pos = transcript_.n_pulses;
    while (true) {
      const std::uint64_t skip = p_click >= 1.0 ? 0 : gap(channel_rng_);
      if (skip >= end - pos) break;
      pos += skip;
      PulseRecord r = make_record(pos);
      const bool signal = bernoulli(channel_rng_, p_signal_ / p_click);
      r.outcome = {true, signal ? ClickOrigin::Signal : ClickOrigin::Dark};
      r.decoded_bit = decode(r, drift, bob_bias);
      transcript_.records.push_back(r);
      ++pos;
      if (pos >= end) break;
    }
    transcript_.n_pulses = end;
  }

  LinkParams link_;
  CentralBinPaths paths_;
  Rng alice_rng_;
  Rng bob_rng_;
  Rng channel_rng_;
  double p_signal_ = 0.0;
  SessionTranscript transcript_;
};

inline SessionTranscript run_session(const LinkParams& link, std::uint64_t n_pulses, std::uint64_t seed,
                                     const SessionOptions& options = {}) {
  require(n_pulses > 0, "run_session: n_pulses must be > 0");
  Session s(link, seed, options.mode);
  if (options.signal_probability) s.override_signal_probability(*options.signal_probability);
  s.run(n_pulses, options.drift, options.bob_bias.value_or(s.ideal_bias()));
  return s.take_transcript();
}

/// Matched-basis key material. Bob's bits are the key; Alice's copy is kept
/// alongside so the simulation can score errors.
struct SiftedKey {
  std::vector<std::uint8_t> bits;
  std::vector<std::uint8_t> alice_bits;
  std::vector<std::uint64_t> indices;
  std::vector<std::uint64_t> disclosed_indices;
  double measured_qber = std::numeric_limits<double>::quiet_NaN();
  std::size_t sample_size = 0;
  bool aborted = false;

  std::size_t size() const { return bits.size(); }
  bool empty() const { return bits.empty(); }

  std::size_t errors() const {
    std::size_t e = 0;
    for (std::size_t i = 0; i < bits.size(); ++i) e += bits[i] != alice_bits[i];
    return e;
  }

  // Error rate over every retained bit (simulation-only knowledge).
  double true_qber() const {
    return bits.empty() ? std::numeric_limits<double>::quiet_NaN()
                        : static_cast<double>(errors()) / static_cast<double>(bits.size());
  }

  void append(const SiftedKey& other) {
    bits.insert(bits.end(), other.bits.begin(), other.bits.end());
    alice_bits.insert(alice_bits.end(), other.alice_bits.begin(), other.alice_bits.end());
    indices.insert(indices.end(), other.indices.begin(), other.indices.end());
  }
};

inline SiftedKey sift(const SessionTranscript& transcript) {
  SiftedKey key;
  for (const auto& r : transcript.records) {
    if (!r.sifted()) continue;
    key.bits.push_back(*r.decoded_bit);
    key.alice_bits.push_back(r.alice.bit);
    key.indices.push_back(r.index);
  }
  return key;
}

inline constexpr double kQberLimit = 0.10;

/// Discloses a uniform random sample of the key, measures its error rate
/// against Alice's bits and aborts above limit. Disclosed bits leave the key.
inline SiftedKey estimate_and_gate(const SiftedKey& key, double sample_fraction, Rng& rng,
                                   double limit = kQberLimit) {
  if (key.empty()) throw NoDataError("estimate_and_gate: key is empty");
  require(sample_fraction > 0.0 && sample_fraction < 1.0, "sample_fraction must lie in (0,1)");
  const std::size_t n = key.size();
  const auto m = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(sample_fraction * n)), 1, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Partial Fisher-Yates: the first m positions become the sample.
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<char> disclosed(n, 0);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < m; ++i) {
    disclosed[order[i]] = 1;
    errors += key.bits[order[i]] != key.alice_bits[order[i]];
  }

  SiftedKey out;
  out.sample_size = m;
  out.measured_qber = static_cast<double>(errors) / static_cast<double>(m);
  out.aborted = out.measured_qber > limit;
  for (std::size_t i = 0; i < n; ++i) {
    if (disclosed[i]) {
      out.disclosed_indices.push_back(key.indices.empty() ? i : key.indices[i]);
    } else if (!out.aborted) {
      out.bits.push_back(key.bits[i]);
      out.alice_bits.push_back(key.alice_bits[i]);
      if (!key.indices.empty()) out.indices.push_back(key.indices[i]);
    }
  }
  return out;
}

// --- Trojan-horse monitor -------------------------------------------------

struct TrojanMonitor {
  std::uint64_t window = 10'000'000;  // pulses per observation window
  double threshold = 1.0;             // alarm above this many reverse photons
  std::uint64_t observed = 0;

  /// Threshold at mean + 5 sqrt(mean) of the legitimate reverse count.
  static TrojanMonitor for_background(std::uint64_t window, double legit_per_pulse) {
    require(window > 0, "monitor window must be > 0");
    const double mean = legit_per_pulse * static_cast<double>(window);
    TrojanMonitor m;
    m.window = window;
    m.threshold = mean + 5.0 * std::sqrt(mean);
    require(m.threshold > 0.0, "monitor threshold must be > 0");
    return m;
  }
};

inline bool trojan_check(const TrojanMonitor& monitor) {
  require(monitor.window > 0, "monitor window must be > 0");
  return static_cast<double>(monitor.observed) > monitor.threshold;
}

/// Reverse photons seen in one window: legitimate background plus any
/// injected probe light, Poisson distributed.
inline TrojanMonitor observe_window(TrojanMonitor monitor, Rng& rng, double legit_per_pulse,
                                    double injected_mean = 0.0) {
  const double mean = legit_per_pulse * static_cast<double>(monitor.window) + injected_mean;
  monitor.observed = mean > 0.0 ? std::poisson_distribution<std::uint64_t>(mean)(rng) : 0;
  return monitor;
}

// --- One-time pad ---------------------------------------------------------

using Bytes = std::vector<std::uint8_t>;

/// XOR with key bits, eight per byte, most significant bit first. The same
/// call decrypts.
inline Bytes otp_encrypt(std::span<const std::uint8_t> key_bits, std::span<const std::uint8_t> plaintext) {
  if (key_bits.size() < 8 * plaintext.size())
    throw KeyExhausted("one-time pad needs " + std::to_string(8 * plaintext.size()) + " key bits, have " +
                       std::to_string(key_bits.size()));
  Bytes out(plaintext.size());
  for (std::size_t i = 0; i < plaintext.size(); ++i) {
    std::uint8_t k = 0;
    for (std::size_t b = 0; b < 8; ++b) k = static_cast<std::uint8_t>((k << 1) | (key_bits[8 * i + b] & 1u));
    out[i] = plaintext[i] ^ k;
  }
  return out;
}

inline Bytes otp_decrypt(std::span<const std::uint8_t> key_bits, std::span<const std::uint8_t> ciphertext) {
  return otp_encrypt(key_bits, ciphertext);
}

/// Key material that is spent as it is used.
class KeyPool {
 public:
  explicit KeyPool(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {}

  std::size_t remaining() const { return bits_.size() - used_; }

  Bytes apply(std::span<const std::uint8_t> data) {
    const std::span<const std::uint8_t> rest(bits_.data() + used_, remaining());
    Bytes out = otp_encrypt(rest, data);
    used_ += 8 * data.size();
    return out;
  }

 private:
  std::vector<std::uint8_t> bits_;
  std::size_t used_ = 0;
};

// Packs complete bytes of key bits, MSB first, as lowercase hex. Trailing
// bits that do not fill a byte are dropped.
inline std::string key_to_hex(std::span<const std::uint8_t> bits) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  for (std::size_t i = 0; i + 8 <= bits.size(); i += 8) {
    unsigned v = 0;
    for (std::size_t b = 0; b < 8; ++b) v = (v << 1) | (bits[i + b] & 1u);
    out += digits[v >> 4];
    out += digits[v & 15];
  }
  return out;
}

inline std::vector<std::uint8_t> hex_to_key_bits(const std::string& hex) {
  std::vector<std::uint8_t> bits;
  int pending = -1;
  for (char c : hex) {
    int v;
    if (c >= '0' && c <= '9') v = c - '0';
    else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
    else if (c == ' ' || c == '\n' || c == '\r' || c == '\t') continue;
    else throw ParameterError(std::string("invalid hex digit '") + c + "'");
    if (pending < 0) {
      pending = v;
      continue;
    }
    const int byte = (pending << 4) | v;
    for (int b = 7; b >= 0; --b) bits.push_back(static_cast<std::uint8_t>((byte >> b) & 1));
    pending = -1;
  }
  if (pending >= 0) throw ParameterError("odd number of hex digits");
  return bits;
}

// --- Transcript CSV -------------------------------------------------------

inline constexpr const char* kTranscriptHeader = "index,alice_bit,alice_basis,bob_basis,clicked,origin,decoded_bit";

inline const char* origin_name(ClickOrigin o) {
  switch (o) {
    case ClickOrigin::Signal: return "signal";
    case ClickOrigin::Dark: return "dark";
    default: return "none";
  }
}

inline void write_transcript_csv(std::ostream& os, const SessionTranscript& t) {
  os << kTranscriptHeader << '\n';
  for (const auto& r : t.records) {
    os << r.index << ',' << int(r.alice.bit) << ',' << basis_char(r.alice.basis) << ','
       << basis_char(r.bob_basis) << ',' << (r.outcome.clicked ? 1 : 0) << ',' << origin_name(r.outcome.origin)
       << ',';
    if (r.decoded_bit) os << int(*r.decoded_bit);
    os << '\n';
  }
}

/// Reads records back from transcript CSV. Link, seed and pulse count are not
/// part of the file.
inline std::vector<PulseRecord> read_transcript_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTranscriptHeader) throw ParameterError("not a transcript CSV");
  std::vector<PulseRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() == 6) f.emplace_back();
    if (f.size() != 7) throw ParameterError("malformed transcript row: " + line);
    PulseRecord r;
    r.index = std::stoull(f[0]);
    r.alice.bit = static_cast<std::uint8_t>(std::stoi(f[1]));
    r.alice.basis = f[2] == "X" ? Basis::X : Basis::Z;
    r.alice_phase = alice_phase(r.alice);
    r.bob_basis = f[3] == "X" ? Basis::X : Basis::Z;
    r.bob_phase = bob_phase(r.bob_basis);
    r.outcome.clicked = f[4] == "1";
    r.outcome.origin = f[5] == "signal" ? ClickOrigin::Signal : f[5] == "dark" ? ClickOrigin::Dark : ClickOrigin::None;
    if (!f[6].empty()) r.decoded_bit = static_cast<std::uint8_t>(std::stoi(f[6]));
    out.push_back(r);
  }
  return out;
}

}  // namespace fmqkd
