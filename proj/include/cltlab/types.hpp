#pragma once

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>

// Core types for finite-state Markov chains viewed as transfer operators:
// a row-stochastic matrix P (row x = Q(x,.)), its invariant law nu, real
// observables xi on the state space, and geometric-ergodicity profiles
//   || Q^n f - nu(f) 1 || <= C kappa0^n || f ||.

namespace cltlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Complex = std::complex<double>;

enum class ErrorCode {
  NegativeEntry,
  RowSumInvalid,
  Reducible,
  NoConvergence,
  DimensionMismatch,
  NoSpectralGap,
  NotCentered,
  EmptyGrid,
  DegenerateVariance,
  SingularResolvent,
  RankNotOne,
  AuditFailed,
  IdentityViolated,
  NotLattice,
  GridTooLarge,
  QuadratureFailure,
  EmptySamples,
  OutOfRange,
  InsufficientSamples,
  BadRadius,
  ParseError,
  ValidationError,
  DegenerateInput,
  IoError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Probability vector. Houses both the invariant law nu and initial laws mu0.
struct Distribution {
  Vector weights;

  int size() const { return static_cast<int>(weights.size()); }

  static Distribution validated(Vector w);
  static Distribution point(int n_states, int state);
  static Distribution uniform(int n_states);
};

// Finite-state transition probability. Optional `labels` carries the state
// values of a discretized continuous model (one row per state); optional `V`
// is a weight function >= 1 for V-weighted sup norms.
struct FiniteChain {
  Matrix P;
  std::optional<Matrix> labels;
  std::optional<Vector> V;

  int n_states() const { return static_cast<int>(P.rows()); }
};

// Real observable xi on the states. `centered` records nu(xi) = 0.
struct Observable {
  Vector values;
  bool centered = false;
};

enum class NormKind { Sup, VWeighted };

// Measured geometric-ergodicity profile: kappa0 is the sub-dominant
// eigenvalue modulus of P, C the smallest constant satisfying the decay
// inequality over the probe basis up to horizon n_max. A bound over the
// probe basis controls the operator constant up to `basis_factor` (= number
// of states).
struct ErgodicityProfile {
  double kappa0 = 0.0;
  double C = 0.0;
  NormKind norm_kind = NormKind::Sup;
  int basis_factor = 0;
  int n_max = 0;
};

// Bilinear pairing <a, b> = sum_x a(x) b(x); no conjugation, matching the
// duality bracket between functionals and functions.
inline Complex bdot(const CVector& a, const CVector& b) {
  return (a.array() * b.array()).sum();
}
inline Complex bdot(const Vector& a, const CVector& b) {
  return (a.cast<Complex>().array() * b.array()).sum();
}
inline double bdot(const Vector& a, const Vector& b) {
  return (a.array() * b.array()).sum();
}

}  // namespace cltlab
