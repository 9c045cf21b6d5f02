/**
 * @file jones.hpp
 * @brief Jones calculus: 2x2 complex polarization operators and amplitudes.
 *
 * A JonesVector holds the two complex field amplitudes of a pulse in the
 * (H, V) basis; its squared norm is the fraction of the launched power it
 * carries. A JonesMatrix is the amplitude transfer of a passive element.
 *
 * Reciprocal media are traversed backwards with the transpose of the forward
 * matrix. Together with the Faraday mirror matrix F this gives the identity
 *
 *     T^T F T = det(T) F      for every 2x2 complex T,
 *
 * which is why a Faraday-mirrored arm looks the same to every input
 * polarization regardless of the birefringence inside it.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "fmqkd/error.hpp"
#include "fmqkd/rng.hpp"

namespace fmqkd {

using cplx = std::complex<double>;

inline constexpr cplx kI{0.0, 1.0};

struct JonesVector {
  std::array<cplx, 2> e{};

  constexpr JonesVector() = default;
  constexpr JonesVector(cplx h, cplx v) : e{h, v} {}

  static constexpr JonesVector horizontal() { return {1.0, 0.0}; }
  static constexpr JonesVector vertical() { return {0.0, 1.0}; }

  cplx& operator[](std::size_t i) { return e[i]; }
  const cplx& operator[](std::size_t i) const { return e[i]; }

  double norm2() const { return std::norm(e[0]) + std::norm(e[1]); }

  JonesVector& operator+=(const JonesVector& o) {
    e[0] += o.e[0];
    e[1] += o.e[1];
    return *this;
  }
  friend JonesVector operator+(JonesVector a, const JonesVector& b) { return a += b; }
  friend JonesVector operator-(const JonesVector& a, const JonesVector& b) {
    return {a.e[0] - b.e[0], a.e[1] - b.e[1]};
  }
  friend JonesVector operator*(cplx s, const JonesVector& v) { return {s * v.e[0], s * v.e[1]}; }
};

// Hermitian inner product <a, b> = a^H b.
inline cplx inner(const JonesVector& a, const JonesVector& b) {
  return std::conj(a.e[0]) * b.e[0] + std::conj(a.e[1]) * b.e[1];
}

/// Row-major 2x2 complex matrix: m[row][col].
struct JonesMatrix {
  std::array<std::array<cplx, 2>, 2> m{};

  constexpr JonesMatrix() = default;
  constexpr JonesMatrix(cplx m00, cplx m01, cplx m10, cplx m11) : m{{{m00, m01}, {m10, m11}}} {}

  static constexpr JonesMatrix identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static constexpr JonesMatrix diagonal(cplx a, cplx b) { return {a, 0.0, 0.0, b}; }

  cplx operator()(std::size_t r, std::size_t c) const { return m[r][c]; }

  cplx det() const { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }

  JonesMatrix transpose() const { return {m[0][0], m[1][0], m[0][1], m[1][1]}; }

  JonesMatrix adjoint() const {
    return {std::conj(m[0][0]), std::conj(m[1][0]), std::conj(m[0][1]), std::conj(m[1][1])};
  }

  friend JonesMatrix operator*(const JonesMatrix& a, const JonesMatrix& b) {
    JonesMatrix r;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) r.m[i][j] = a.m[i][0] * b.m[0][j] + a.m[i][1] * b.m[1][j];
    return r;
  }

  friend JonesVector operator*(const JonesMatrix& a, const JonesVector& v) {
    return {a.m[0][0] * v.e[0] + a.m[0][1] * v.e[1], a.m[1][0] * v.e[0] + a.m[1][1] * v.e[1]};
  }

  friend JonesMatrix operator*(cplx s, const JonesMatrix& a) {
    return {s * a.m[0][0], s * a.m[0][1], s * a.m[1][0], s * a.m[1][1]};
  }

  friend JonesMatrix operator-(const JonesMatrix& a, const JonesMatrix& b) {
    return {a.m[0][0] - b.m[0][0], a.m[0][1] - b.m[0][1], a.m[1][0] - b.m[1][0], a.m[1][1] - b.m[1][1]};
  }

  // Largest entry magnitude.
  double max_abs() const {
    double r = 0.0;
    for (const auto& row : m)
      for (const auto& x : row) r = std::max(r, std::abs(x));
    return r;
  }

  // Singular values, largest first.
  std::array<double, 2> singular_values() const {
    // Eigenvalues of the Hermitian A^H A. The radicand is a sum of squares,
    // so near-degenerate values keep full precision.
    const JonesMatrix g = adjoint() * *this;
    const double mean = (g.m[0][0].real() + g.m[1][1].real()) / 2.0;
    const double half_gap = (g.m[0][0].real() - g.m[1][1].real()) / 2.0;
    const double r = std::sqrt(half_gap * half_gap + std::norm(g.m[0][1]));
    const double hi = std::sqrt(mean + r);
    const double lo = hi > 0.0 ? std::abs(det()) / hi : 0.0;
    return {hi, lo};
  }

  bool is_unitary(double tol = 1e-12) const {
    return (adjoint() * *this - identity()).max_abs() < tol;
  }
};

/// 90 degree Faraday mirror: polarization rotated by 90 degrees on reflection.
inline constexpr JonesMatrix faraday_mirror() { return {0.0, 1.0, -1.0, 0.0}; }

enum class MirrorKind { Faraday90, PlainMirror };

inline JonesMatrix mirror_matrix(MirrorKind kind) {
  return kind == MirrorKind::Faraday90 ? faraday_mirror() : JonesMatrix::identity();
}

// Amplitude factor of a loss given in dB (power).
inline double db_to_amplitude(double loss_db) { return std::pow(10.0, -loss_db / 20.0); }
inline double db_to_power(double loss_db) { return std::pow(10.0, -loss_db / 10.0); }

// Haar-random element of U(2), scaled by the amplitude factor of loss_db.
// Four gaussians normalized onto S^3 give a uniform SU(2) element; an
// independent uniform global phase extends it to U(2).
inline JonesMatrix random_birefringence(Rng& rng, double loss_db = 0.0) {
  require(loss_db >= 0.0, "random_birefringence: loss_db must be >= 0");
  std::normal_distribution<double> gauss(0.0, 1.0);
  double x[4];
  double n = 0.0;
  do {
    n = 0.0;
    for (double& xi : x) {
      xi = gauss(rng);
      n += xi * xi;
    }
  } while (n == 0.0);
  n = std::sqrt(n);
  const cplx a{x[0] / n, x[1] / n};
  const cplx b{x[2] / n, x[3] / n};
  const double alpha = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  const cplx g = std::polar(db_to_amplitude(loss_db), alpha);
  return g * JonesMatrix{a, -std::conj(b), b, std::conj(a)};
}

/// Reflection off the end of an arm: forward through T, mirror, back through
/// T^T, times e^{i extra_phase}.
inline JonesMatrix arm_round_trip(const JonesMatrix& arm, MirrorKind mirror, double extra_phase) {
  return std::polar(1.0, extra_phase) * (arm.transpose() * mirror_matrix(mirror) * arm);
}

}  // namespace fmqkd
