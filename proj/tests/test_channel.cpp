#include <gtest/gtest.h>

#include <cmath>

#include "fmqkd/channel.hpp"

using namespace fmqkd;

namespace {

double binomial_sigma(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

LinkParams at_length(double km) {
  LinkParams l;
  l.fiber.length_km = km;
  return l;
}

}  // namespace

TEST(Transmittance, TwentySixDbOver125Km) {
  EXPECT_NEAR(transmittance(125.0, 0.208), std::pow(10.0, -2.6), 1e-15);
  EXPECT_NEAR(transmittance(125.0, 0.208), 2.512e-3, 1e-6);
}

TEST(Transmittance, ZeroLengthAndTenDb) {
  EXPECT_EQ(transmittance(0.0, 0.3), 1.0);
  EXPECT_NEAR(transmittance(50.0, 0.2), 0.1, 1e-15);
}

TEST(Transmittance, Multiplicative) {
  for (double a : {0.0, 3.0, 40.0, 125.0})
    for (double b : {1.0, 17.5, 75.0})
      EXPECT_NEAR(transmittance(a + b, 0.208), transmittance(a, 0.208) * transmittance(b, 0.208), 1e-12);
}

TEST(Transmittance, NegativeLengthRejected) { EXPECT_THROW(transmittance(-1.0, 0.2), ParameterError); }

TEST(LinkParams, ValidationNamesTheInvariant) {
  LinkParams l;
  EXPECT_NO_THROW(l.validate());
  l.fiber.length_km = -5.0;
  try {
    l.validate();
    FAIL() << "expected rejection";
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("fiber.length_km"), std::string::npos);
  }
  l = LinkParams{};
  l.e_opt = 0.6;
  EXPECT_THROW(l.validate(), ParameterError);
  l = LinkParams{};
  l.detector.efficiency = 0.0;
  EXPECT_THROW(l.validate(), ParameterError);
  l = LinkParams{};
  l.detector.dark_prob = 1.0;
  EXPECT_THROW(l.validate(), ParameterError);
  l = LinkParams{};
  l.source.mu_unmodulated = 0.05;
  EXPECT_THROW(l.validate(), ParameterError);
  l = LinkParams{};
  l.source.pulse_width_ns = 8.0;
  EXPECT_THROW(l.validate(), ParameterError);
}

TEST(SignalClickProbability, ZeroInterferenceNeverClicks) {
  EXPECT_EQ(signal_click_probability(LinkParams{}, 0.0), 0.0);
}

TEST(SignalClickProbability, FirstOrderInMu) {
  LinkParams l;
  l.source.mu_signal = 1e-4;
  l.source.mu_unmodulated = 1e-4;
  const double eta = fiber_transmittance(l) * std::pow(10.0, -l.bob_insertion_loss_db / 10.0) * l.detector.efficiency;
  for (double p : {0.05, 0.125, 0.25}) {
    const double ratio = signal_click_probability(l, p) / l.source.mu_signal;
    EXPECT_NEAR(ratio, eta * p / 0.25, 0.01 * eta * p / 0.25);
  }
}

TEST(SignalClickProbability, MonteCarloAt125Km) {
  const LinkParams l;
  const double p = signal_click_probability(l, kCentralBinCeiling);
  Rng rng = make_rng(42, Stream::Channel);
  constexpr std::uint64_t n = 10'000'000;
  std::uint64_t clicks = 0;
  for (std::uint64_t i = 0; i < n; ++i) clicks += sample_click(rng, p, 0.0).clicked;
  EXPECT_NEAR(static_cast<double>(clicks) / n, p, 3.0 * binomial_sigma(p, n));
}

TEST(SampleClick, Certainties) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto a = sample_click(rng, 1.0, 0.0);
    EXPECT_TRUE(a.clicked);
    EXPECT_EQ(a.origin, ClickOrigin::Signal);
    const auto b = sample_click(rng, 0.0, 0.0);
    EXPECT_FALSE(b.clicked);
    EXPECT_EQ(b.origin, ClickOrigin::None);
  }
}

TEST(SampleClick, LawOfTotalProbability) {
  Rng rng(2);
  constexpr std::uint64_t n = 1'000'000;
  std::uint64_t clicks = 0, dark = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto c = sample_click(rng, 0.3, 0.1);
    EXPECT_EQ(c.clicked, c.origin != ClickOrigin::None);
    clicks += c.clicked;
    dark += c.origin == ClickOrigin::Dark;
  }
  EXPECT_NEAR(static_cast<double>(clicks) / n, 0.37, 3.0 * binomial_sigma(0.37, n));
  EXPECT_NEAR(static_cast<double>(dark) / n, 0.07, 3.0 * binomial_sigma(0.07, n));
  EXPECT_DOUBLE_EQ(gate_click_probability(0.3, 0.1), 0.37);
}

TEST(SampleClick, DeterministicGivenSeed) {
  Rng a(9), b(9);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_click(a, 0.2, 0.05), sample_click(b, 0.2, 0.05));
}

TEST(ExpectedQber, NoiselessIsZero) {
  LinkParams l;
  l.e_opt = 0.0;
  l.detector.dark_prob = 0.0;
  EXPECT_EQ(expected_qber(l), 0.0);
}

TEST(ExpectedQber, DarkLimitIsHalf) {
  LinkParams l = at_length(5000.0);
  EXPECT_NEAR(expected_qber(l), 0.5, 1e-12);
  EXPECT_EQ(expected_qber(LinkParams{}, false), 0.5);
}

TEST(ExpectedQber, DefaultsAt125KmInBand) {
  const double q = expected_qber(LinkParams{});
  EXPECT_GE(q, 0.04);
  EXPECT_LE(q, 0.06);
}

TEST(ExpectedQber, ClosedFormOracle) {
  // Written out from the click model with the defaults frozen here.
  const double eta = std::pow(10.0, -2.6) * std::pow(10.0, -0.125) * 0.20;
  const double p_sig = 1.0 - std::exp(-0.1 * eta);
  const double p_dark = (1.0 - p_sig) * 8e-7;
  const double q = (0.035 * p_sig + 0.5 * p_dark) / (p_sig + p_dark);
  EXPECT_NEAR(expected_qber(LinkParams{}), q, 1e-12);
  EXPECT_NEAR(q, 0.04466894484, 1e-10);
}

TEST(ExpectedQber, MonotoneInLengthAndDark) {
  double prev = -1.0;
  for (double km = 0.0; km <= 250.0; km += 5.0) {
    const double q = expected_qber(at_length(km));
    EXPECT_GT(q, prev);
    prev = q;
  }
  prev = -1.0;
  for (double d : {0.0, 1e-8, 1e-7, 1e-6, 1e-5}) {
    LinkParams l;
    l.detector.dark_prob = d;
    const double q = expected_qber(l);
    EXPECT_GE(q, prev);
    prev = q;
  }
}

TEST(ExpectedQber, TendsToEoptWithoutDarkCounts) {
  LinkParams l;
  l.detector.dark_prob = 1e-15;
  EXPECT_NEAR(expected_qber(l), l.e_opt, 1e-9);
}

TEST(ExpectedQber, WorkingPointErrorAddsSineSquared) {
  const LinkParams l;
  EXPECT_NEAR(signal_error_probability(0.0, std::numbers::pi), 1.0, 1e-15);
  EXPECT_NEAR(signal_error_probability(0.035, 0.0), 0.035, 1e-15);
  EXPECT_GT(expected_qber(l, true, 0.3), expected_qber(l));
}

TEST(DecodeZeroProbability, PortRatioThenFlip) {
  EXPECT_NEAR(decode_zero_probability(0.25, 0.0, 0.0), 1.0, 1e-15);
  EXPECT_NEAR(decode_zero_probability(0.0, 0.25, 0.0), 0.0, 1e-15);
  EXPECT_NEAR(decode_zero_probability(0.125, 0.125, 0.2), 0.5, 1e-15);
  EXPECT_NEAR(decode_zero_probability(0.25, 0.0, 0.04), 0.96, 1e-15);
}

TEST(ChannelUnitary, SeededAndUnitary) {
  LinkParams a, b;
  b.fiber.birefringence_seed = 2;
  EXPECT_TRUE(channel_unitary(a).is_unitary());
  EXPECT_EQ((channel_unitary(a) - channel_unitary(a)).max_abs(), 0.0);
  EXPECT_GT((channel_unitary(a) - channel_unitary(b)).max_abs(), 1e-3);
}
