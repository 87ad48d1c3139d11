#pragma once

#include "cltlab/types.hpp"

// Power-iteration machinery mirroring the operator structure used throughout:
// a simple dominant eigenvalue plus a strictly smaller remainder. The dense
// eigendecomposition is deliberately not used here; it serves as a test
// oracle only.

namespace cltlab {

struct DominantPair {
  Complex value;
  CVector vector;
  int iterations = 0;
};

// Dominant eigenpair of M by power iteration. `start` must have a nonzero
// component on the dominant direction (1 and nu are the natural starts for
// perturbed Markov kernels). Convergence is declared when the pinned-entry
// normalized iterate and the Rayleigh quotient both stabilize within `tol`.
// Throws NoConvergence after `max_iter` steps, and for matrices whose top
// modulus is shared by several eigenvalues.
DominantPair dominant_eigenpair(const CMatrix& M, const CVector& start,
                                double tol = 1e-13, int max_iter = 100000);

// Right and left dominant eigenvectors with a common eigenvalue, normalized
// so that <phi, v> = 1. Left iteration runs on M^T (plain transpose: the
// pairing is bilinear).
struct DominantTriple {
  Complex lambda;
  CVector v;
  CVector phi;
};
DominantTriple dominant_triple(const CMatrix& M, const CVector& start_v,
                               const CVector& start_phi, double tol = 1e-13,
                               int max_iter = 100000);

// Spectral radius estimate by power iteration. Handles conjugate pairs and
// other equal-modulus top pairs through a two-column Krylov extraction:
// fit x_{k+2} + p x_{k+1} + q x_k ~ 0 and take the largest root modulus of
// mu^2 + p mu + q. Deterministic (fixed internal start vector).
double spectral_radius_estimate(const CMatrix& M, double tol = 1e-12,
                                int max_iter = 100000);

}  // namespace cltlab
