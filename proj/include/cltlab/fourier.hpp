#pragma once

#include <vector>

#include "cltlab/types.hpp"

// Fourier kernels Q(t)(x,y) = P(x,y) e^{it xi(y)} and their dominant spectral
// structure Q(t) = lambda(t) v(t) phi(t)^T + N(t) with
//   <phi(t), v(t)> = 1,  <nu, v(t)> = 1,  phi(t) N(t) = 0,  N(t) v(t) = 0,
// plus contour-integral projectors and perturbation audits.

namespace cltlab {

struct FourierKernel {
  double t = 0.0;
  CMatrix M;
};

struct SpectralData {
  double t = 0.0;
  Complex lambda;
  CVector v;
  CVector phi;
  CMatrix N;
  double rho = 0.0;  // spectral radius of N
};

FourierKernel build_kernel(const FiniteChain& chain, const Observable& xi,
                           double t);

// Power iteration on Q(t) and its transpose, normalized as above;
// N = Q(t) - lambda v phi^T, rho by power iteration on N. Throws
// NoSpectralGap when rho / |lambda| > 1 - 1e-6.
SpectralData spectral_decompose(const FiniteChain& chain, const Observable& xi,
                                double t);

struct Circle {
  Complex center;
  double radius = 0.0;
};

// (1/2 pi i) contour integral of the resolvent (z - Q(t))^{-1} over the
// circle, trapezoid rule with quad_points >= 64 nodes. The result is the
// rank-one projector v(t) phi(t)^T when the circle isolates lambda(t).
CMatrix contour_projector(const FiniteChain& chain, const Observable& xi,
                          double t, Complex center, double radius,
                          int quad_points);

// (1/2 pi i) contour integral of z^power (z - Q(t))^{-1} over a circle of the
// given radius centered at 0; equals N(t)^power for power >= 1 when the
// circle separates the remainder spectrum from lambda(t).
CMatrix contour_remainder_power(const FiniteChain& chain, const Observable& xi,
                                double t, double radius, int quad_points,
                                int power);

// Empirical constant of the resolvent-difference bound with tau = 1:
// max over t in the grid, coordinate probes f and quadrature nodes z of
//   nu(|(z - Q(t))^{-1} f - (z - Q)^{-1} f|) / (|t| ||f||_inf).
double resolvent_difference_bound(const FiniteChain& chain,
                                  const Observable& xi,
                                  const std::vector<double>& t_grid,
                                  const Circle& circle, int quad_points = 64);

// Fits log |lambda(u) - 1 + sigma2 u^2 / 2| against log |u|; the slope is
// >= 3 under a third moment (4 when the expansion is even in u).
struct ExpansionFit {
  double slope = 0.0;
  double max_residual = 0.0;
};
ExpansionFit lambda_expansion_check(const FiniteChain& chain,
                                    const Observable& xi,
                                    const std::vector<double>& u_grid);

// Empirical constants with tau = 1 of
//   (b1) <nu, |v(t) - 1|>      <= C |t|
//   (b2) |<phi(t), 1> - 1|     <= C |t|
//   (b3) <nu, |N(t)^n 1|>      <= C rho^n |t|   (rho = max over grid)
struct PerturbationBounds {
  double b1 = 0.0;
  double b2 = 0.0;
  double b3 = 0.0;
};
PerturbationBounds perturbation_bounds(const FiniteChain& chain,
                                       const Observable& xi,
                               const std::vector<double>& t_grid,
                                       int n_max = 20);

// Doeblin-Fortet audit of ||Q(t)^n f||_W <= C kappa^n ||f||_W + C nu(|f|):
// kappa_hat is the largest sub-dominant modulus of Q(t) over the grid
// (including t = 0) -- the smallest geometric rate a horizon-stable constant
// can certify -- and C_hat the smallest constant making the inequality hold
// at that rate over the probe set (W-rescaled coordinates plus 100 seeded
// random unit-norm probes) for n <= n_max. Also reports the drift ratio
// sup_x (QW)(x)/W(x). Throws AuditFailed with the worst witness when no
// kappa < 1 fits.
struct DoeblinFortetResult {
  double kappa_hat = 0.0;
  double C_hat = 0.0;
  double drift_ratio = 0.0;
};
DoeblinFortetResult doeblin_fortet_audit(const FiniteChain& chain,
                                         const Observable& xi, const Vector& W,
                                         const std::vector<double>& t_grid,
                                         int n_max, unsigned seed = 20240901);

}  // namespace cltlab
