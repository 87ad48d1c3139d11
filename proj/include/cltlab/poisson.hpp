#pragma once

#include <utility>
#include <vector>

#include "cltlab/types.hpp"

// The analytical bundle attached to a centered observable xi:
//   xi_breve      solution of the Poisson equation xi_breve - Q xi_breve = xi
//   sigma2        asymptotic variance  nu(xi_breve^2) - nu((Q xi_breve)^2)
//   psi           Q(xi_breve^2) - (Q xi_breve)^2 - sigma2 * 1   (nu(psi) = 0)
//   psi_breve     sum_p Q^p psi
//   h2_value      sum_p nu(|Q^p psi|^{3/2})^{2/3} with certified tail

namespace cltlab {

struct CltDiagnostics {
  Vector xi_breve;
  Vector q_xi_breve;
  double sigma2 = 0.0;
  Vector psi;
  Vector psi_breve;
  double h2_value = 0.0;
  int series_terms_used = 0;
};

// Solves (I - Q + 1 nu^T) xi_breve = xi; the solution automatically has
// nu(xi_breve) = 0 and equals the series sum_n Q^n xi. The Poisson residual
// ||(xi_breve - Q xi_breve) - xi||_inf <= 1e-10 is enforced.
Vector solve_poisson(const FiniteChain& chain, const Observable& xi);

double sigma_squared(const FiniteChain& chain, const Observable& xi);

Vector psi_function(const FiniteChain& chain, const Observable& xi);

// Partial sums until the geometric tail bound drops below 1e-12, then the
// bound is added. Returns (value, explicit terms used).
std::pair<double, int> h2_series(const FiniteChain& chain,
                                 const Observable& xi);

// max over the grid of nu(|e^{it xi} - 1| W) / |t| with W the weight of the
// requested norm (the extremal f with ||f|| <= 1 has |f| = W).
double h3_audit(const FiniteChain& chain, const Observable& xi,
                NormKind weight_kind, const std::vector<double>& t_grid);

CltDiagnostics clt_diagnostics(const FiniteChain& chain, const Observable& xi);

}  // namespace cltlab
