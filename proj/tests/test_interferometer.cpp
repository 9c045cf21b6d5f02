#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "fmqkd/channel.hpp"
#include "fmqkd/interferometer.hpp"

using namespace fmqkd;

namespace {

constexpr double kPi = std::numbers::pi;

InterferometerSpec random_coder(Rng& rng, MirrorKind mirror, double phase, double modulator_loss_db = 0.0) {
  InterferometerSpec s = InterferometerSpec::ideal(phase);
  s.short_arm = random_birefringence(rng);
  s.long_arm = random_birefringence(rng);
  s.short_mirror = mirror;
  s.long_mirror = mirror;
  s.modulator_loss_db = modulator_loss_db;
  return s;
}

std::vector<double> scan(const InterferometerSpec& alice, const JonesMatrix& channel, InterferometerSpec bob,
                         std::size_t n = 64) {
  std::vector<double> out;
  out.reserve(n);
  for (double phi : phase_grid(n)) {
    bob.phase = phi;
    out.push_back(end_to_end_field(alice, channel, bob).detector_probability(1));
  }
  return out;
}

// Scan with Alice's phase chosen so the fringe peak falls on Bob's phase 0,
// which puts both extremes on the grid.
std::vector<double> aligned_scan(InterferometerSpec alice, const JonesMatrix& channel, const InterferometerSpec& bob) {
  alice.phase = -central_bin_paths(alice, channel, bob).constructive_bob_phase();
  return scan(alice, channel, bob);
}

// Independent amplitude oracle for ideal coders with identity arms and a
// scalar channel: two paths of amplitude 1/4 each reach the detector in the
// central bin (Alice long then Bob short, Alice short then Bob long). The
// coupler factors give the two paths opposite signs.
double oracle_central(double phi_a, double phi_b, double transmittance) {
  const cplx a = std::polar(0.25, phi_a);
  const cplx b = std::polar(0.25, phi_b);
  return transmittance * std::norm(a - b);
}

}  // namespace

TEST(InterferometerSpec, Validation) {
  InterferometerSpec s = InterferometerSpec::ideal();
  EXPECT_NO_THROW(s.validate(1.0));
  EXPECT_THROW(s.validate(7.5), ParameterError);
  s.coupler_ratio = 1.0;
  EXPECT_THROW(s.validate(1.0), ParameterError);
  s.coupler_ratio = 0.0;
  EXPECT_THROW(s.validate(1.0), ParameterError);
}

TEST(InterferometerTransfer, LosslessConservesPower) {
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const auto spec = random_coder(rng, MirrorKind::Faraday90, 2.0 * kPi * uniform01(rng));
    const auto f = interferometer_transfer(spec, JonesVector::horizontal(), 0);
    EXPECT_NEAR(f.total_power(), 1.0, 1e-12);
  }
}

TEST(InterferometerTransfer, ForwardBinsCarryAQuarterEach) {
  const auto f = interferometer_transfer(InterferometerSpec::ideal(), JonesVector::horizontal(), 0);
  EXPECT_NEAR(f.power(0, Port::Forward), 0.25, 1e-15);
  EXPECT_NEAR(f.power(1, Port::Forward), 0.25, 1e-15);
}

TEST(InterferometerTransfer, ModulatorDoublePassLoss) {
  InterferometerSpec s = InterferometerSpec::ideal();
  s.modulator_loss_db = 3.0;  // 6 dB over the double pass
  const auto f = interferometer_transfer(s, JonesVector::horizontal(), 0);
  EXPECT_NEAR(f.power(1, Port::Forward), 0.25 * std::pow(10.0, -0.6), 1e-15);
  EXPECT_NEAR(f.power(0, Port::Forward), 0.25, 1e-15);
  EXPECT_LE(f.total_power(), 1.0);
}

TEST(InterferometerTransfer, BinsAreShiftedByInputBin) {
  const auto f = interferometer_transfer(InterferometerSpec::ideal(), JonesVector::vertical(), 3);
  EXPECT_NEAR(f.power(3, Port::Forward) + f.power(3, Port::Monitor), 0.5, 1e-15);
  EXPECT_NEAR(f.power(4, Port::Forward) + f.power(4, Port::Monitor), 0.5, 1e-15);
  EXPECT_EQ(f.power(0, Port::Forward), 0.0);
}

TEST(EndToEnd, CentralBinMatchesAmplitudeOracle) {
  for (double pa : phase_grid(12))
    for (double pb : phase_grid(12))
      EXPECT_NEAR(central_bin_probability(pa, pb, 1.0, JonesMatrix::identity()), oracle_central(pa, pb, 1.0), 1e-14);
}

TEST(EndToEnd, ConstructiveAndDestructivePoints) {
  // Peak of the detector fringe sits at alice - bob = pi for this coupler convention.
  EXPECT_NEAR(central_bin_probability(kPi, 0.0, 1.0, JonesMatrix::identity()), 0.25, 1e-15);
  EXPECT_NEAR(central_bin_probability(0.0, 0.0, 1.0, JonesMatrix::identity()), 0.0, 1e-15);
}

TEST(EndToEnd, TwentySixDbChannel) {
  const double eta = transmittance(125.0, 0.208);
  Rng rng(8);
  const JonesMatrix u = random_birefringence(rng);
  LinkParams link;
  const double peak_phase = link_paths(link).constructive_bob_phase();
  EXPECT_NEAR(central_bin_probability(kPi, 0.0, eta, u), 0.25 * std::pow(10.0, -2.6), 1e-15);
  EXPECT_NEAR(central_bin_probability(0.0, peak_phase, link, channel_unitary(link)), 0.25 * std::pow(10.0, -2.6),
              1e-15);
}

TEST(EndToEnd, LosslessFieldSumsToOne) {
  Rng rng(17);
  for (int k = 0; k < 100; ++k) {
    const auto a = random_coder(rng, MirrorKind::Faraday90, 2.0 * kPi * uniform01(rng));
    const auto b = random_coder(rng, k % 2 ? MirrorKind::Faraday90 : MirrorKind::PlainMirror,
                                2.0 * kPi * uniform01(rng));
    const auto f = end_to_end_field(a, random_birefringence(rng), b);
    EXPECT_NEAR(f.total_power(), 1.0, 1e-12);
  }
}

TEST(EndToEnd, LossyFieldSumsBelowOne) {
  Rng rng(18);
  for (int k = 0; k < 50; ++k) {
    const auto a = random_coder(rng, MirrorKind::Faraday90, 0.3, 3.0);
    const auto b = random_coder(rng, MirrorKind::Faraday90, 1.1, 3.0);
    EXPECT_LE(end_to_end_field(a, random_birefringence(rng, 5.0), b).total_power(), 1.0);
  }
}

TEST(EndToEnd, OnlyThreeBinsAtBob) {
  const auto f = end_to_end_field(InterferometerSpec::ideal(), JonesMatrix::identity(), InterferometerSpec::ideal());
  for (const auto& [key, v] : f.bob.cells()) {
    EXPECT_GE(key.first, 0);
    EXPECT_LE(key.first, 2);
  }
  EXPECT_NEAR(f.detector_probability(0), 1.0 / 16.0, 1e-15);
  EXPECT_NEAR(f.detector_probability(2), 1.0 / 16.0, 1e-15);
}

TEST(PolarizationIndependence, FaradayMirrorsMakeCentralBinInvariant) {
  Rng rng(101);
  const auto grid = phase_grid(16);
  std::vector<double> reference;
  for (double d : grid) reference.push_back(central_bin_probability(d, 0.0, 1.0, JonesMatrix::identity()));
  for (int k = 0; k < 100; ++k) {
    const auto a0 = random_coder(rng, MirrorKind::Faraday90, 0.0);
    const auto b0 = random_coder(rng, MirrorKind::Faraday90, 0.0);
    const JonesMatrix u = random_birefringence(rng);
    // Random arms add fixed global phases per arm (det of each arm), so the
    // fringe is compared after aligning its origin with the path phases.
    const auto paths = central_bin_paths(a0, u, b0);
    const double origin = paths.constructive_bob_phase() + kPi;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      InterferometerSpec a = a0, b = b0;
      a.phase = grid[i];
      b.phase = origin;
      EXPECT_NEAR(end_to_end_field(a, u, b).detector_probability(1), reference[i], 1e-12);
    }
    EXPECT_NEAR(visibility(aligned_scan(a0, u, b0)), 1.0, 1e-9);
  }
}

TEST(PolarizationIndependence, ChannelEntersOnlyThroughTransmittance) {
  Rng rng(102);
  for (int k = 0; k < 100; ++k) {
    const JonesMatrix u = random_birefringence(rng);
    for (double d : phase_grid(9))
      EXPECT_NEAR(central_bin_probability(d, 0.0, 0.3, u), central_bin_probability(d, 0.0, 0.3, JonesMatrix::identity()),
                  1e-12);
  }
}

TEST(PolarizationIndependence, PlainMirrorsLoseVisibility) {
  Rng rng(103);
  double vmin = 1.0;
  for (int k = 0; k < 100; ++k) {
    const auto a = random_coder(rng, MirrorKind::PlainMirror, 0.0);
    const auto b = random_coder(rng, MirrorKind::PlainMirror, 0.0);
    vmin = std::min(vmin, visibility(scan(a, random_birefringence(rng), b)));
  }
  EXPECT_LT(vmin, 0.5);
}

TEST(PolarizationIndependence, EqualModulatorLossesKeepFullVisibility) {
  Rng rng(104);
  for (int k = 0; k < 20; ++k) {
    const auto a = random_coder(rng, MirrorKind::Faraday90, 0.0, 3.0);
    const auto b = random_coder(rng, MirrorKind::Faraday90, 0.0, 3.0);
    EXPECT_NEAR(visibility(aligned_scan(a, random_birefringence(rng, 10.0), b)), 1.0, 1e-9);
  }
}

TEST(CentralBinPaths, PortsSplitTheCentralBinPower) {
  Rng rng(105);
  const auto a = random_coder(rng, MirrorKind::Faraday90, 0.0);
  const auto b = random_coder(rng, MirrorKind::Faraday90, 0.0);
  const auto p = central_bin_paths(a, JonesMatrix::identity(), b);
  for (double d : phase_grid(10)) {
    const double sum = p.probability(Port::Monitor, d, 0.0) + p.probability(Port::Forward, d, 0.0);
    EXPECT_NEAR(sum, 0.25, 1e-12);
  }
}

TEST(Visibility, CosineFringe) {
  std::vector<double> v;
  for (double phi : phase_grid(16)) v.push_back((1.0 + std::cos(phi)) / 2.0);
  EXPECT_NEAR(visibility(v), 1.0, 1e-15);
}

TEST(Visibility, ConstantScanIsZero) {
  const std::vector<double> v(16, 0.3);
  EXPECT_EQ(visibility(v), 0.0);
}

TEST(Visibility, PartialFringe) {
  std::vector<double> v;
  for (double phi : phase_grid(16)) v.push_back((1.0 + 0.9 * std::cos(phi)) / 2.0);
  EXPECT_NEAR(visibility(v), 0.9, 1e-9);
}

TEST(Visibility, Errors) {
  EXPECT_THROW(visibility(std::vector<double>(16, 0.0)), UndefinedVisibility);
  EXPECT_THROW(visibility(std::vector<double>(7, 0.5)), ParameterError);
}
