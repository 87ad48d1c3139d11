#pragma once

#include <cstdint>

#include "cltlab/types.hpp"

// Shared fixtures and oracles for the test suites. Everything here is
// deliberately independent of the library's computation paths: dense
// eigensolvers, brute-force series, closed forms.

namespace testsupport {

using cltlab::CMatrix;
using cltlab::Complex;
using cltlab::CVector;
using cltlab::Matrix;
using cltlab::Vector;

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double uniform01(std::uint64_t& state) {
  return (splitmix64(state) >> 11) * 0x1.0p-53;
}

// Random row-stochastic matrix with entries bounded away from zero, so the
// chain is irreducible and aperiodic.
inline Matrix random_stochastic(int n, std::uint64_t seed) {
  std::uint64_t state = seed;
  Matrix P(n, n);
  for (int i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < n; ++j) {
      P(i, j) = 0.05 + uniform01(state);
      row_sum += P(i, j);
    }
    P.row(i) /= row_sum;
  }
  return P;
}

inline Vector random_observable(int n, std::uint64_t seed) {
  std::uint64_t state = seed ^ 0xabcdef12345ULL;
  Vector xi(n);
  for (int i = 0; i < n; ++i) xi[i] = 2.0 * uniform01(state) - 1.0;
  return xi;
}

// Closed-form dominant eigenvalue of the two-state Fourier kernel
// [[(1-a) e^{it x1}, a e^{it x2}], [b e^{it x1}, (1-b) e^{it x2}]]: the
// quadratic-formula branch continuous at lambda(0) = 1.
inline Complex two_state_lambda(double a, double b, double x1, double x2,
                                double t) {
  const Complex e1 = std::exp(Complex(0.0, t * x1));
  const Complex e2 = std::exp(Complex(0.0, t * x2));
  const Complex trace = (1.0 - a) * e1 + (1.0 - b) * e2;
  const Complex det = (1.0 - a - b) * e1 * e2;
  const Complex disc = std::sqrt(trace * trace - 4.0 * det);
  const Complex r1 = 0.5 * (trace + disc);
  const Complex r2 = 0.5 * (trace - disc);
  return std::abs(r1) >= std::abs(r2) ? r1 : r2;
}

}  // namespace testsupport
