#pragma once

#include <vector>

#include "cltlab/types.hpp"

namespace cltlab {

// Validates a square matrix as a transition probability: entries >= 0 and
// row sums within 1e-12 of 1 (rows are renormalized exactly when inside that
// tolerance, rejected otherwise).
FiniteChain validate_chain(const Matrix& P);
FiniteChain validate_chain(const Matrix& P, std::optional<Matrix> labels,
                           std::optional<Vector> V);

bool is_irreducible(const FiniteChain& chain);

// gcd of return lengths to state 0 up to 2 * n_states equals 1. Only
// meaningful for irreducible chains.
bool is_aperiodic(const FiniteChain& chain);

// Invariant law nu with nu P = nu, solved by Gaussian elimination with
// partial pivoting on the balance system (P^T - I) with a normalization row
// appended, then cross-checked by (damped) power iteration. Residual
// ||nu P - nu||_inf <= 1e-12 is enforced.
Distribution stationary_distribution(const FiniteChain& chain);

// (Qf)(x) = sum_y P(x,y) f(y).
Vector apply_Q(const FiniteChain& chain, const Vector& f);
CVector apply_Q(const FiniteChain& chain, const CVector& f);

// ||f|| in the requested norm; VWeighted requires chain.V.
double observable_norm(const FiniteChain& chain, NormKind kind,
                       const Vector& f);
double observable_norm(const FiniteChain& chain, NormKind kind,
                       const CVector& f);

// kappa0 = sub-dominant eigenvalue modulus of P (deflated power iteration);
// C = smallest constant with ||Q^n f - nu(f) 1|| <= C kappa0^n ||f|| over the
// probe basis (coordinate indicators; V-rescaled coordinates for the
// V-weighted norm) for n <= n_max. Throws NoSpectralGap when the sub-dominant
// modulus exceeds 1 - 1e-9 (periodic chains).
ErgodicityProfile ergodicity_profile(const FiniteChain& chain, NormKind kind,
                                     int n_max);

// xi - nu(xi) 1, flagged centered.
Observable center_observable(const FiniteChain& chain, const Observable& xi);

}  // namespace cltlab
