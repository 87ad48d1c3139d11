#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cltlab/poisson.hpp"
#include "cltlab/types.hpp"

// Exact characteristic functions of the additive functional
// S_n = xi(X_1) + ... + xi(X_n) and of its martingale part
// T_n = sum_k U_k, U_k = xi_breve(X_k) - Q xi_breve(X_{k-1}),
// via tilted-kernel powers:  E[e^{is S_n}] = <mu0, Q(s)^n 1>.
// Plus exact lattice laws, Kolmogorov distances and the Esseen
// smoothing bound.

namespace cltlab {

// Chain of consecutive pairs (X_{k-1}, X_k) with kernel
// P2((x,y),(x',y')) = 1{y = x'} P(y,y') and edge observable
// u(x,y) = xi_breve(y) - Q xi_breve(x). Dense construction; intended for
// audits on small chains (n_states <= 64).
struct PairChain {
  FiniteChain chain2;        // n^2 states, index z = x * n + y
  Vector u;                  // edge observable flattened to z
  Distribution initial;      // law of (X_0, X_0) with X_0 ~ nu
  Distribution stationary2;  // nu(x) P(x,y)
};
PairChain build_pair_chain(const FiniteChain& chain,
                           const CltDiagnostics& diag);

struct LatticeAtom {
  double value = 0.0;
  double prob = 0.0;
};

// Exact law of S_n on its lattice, sorted by value.
struct LatticeCdf {
  std::vector<LatticeAtom> atoms;
  int n = 0;
};

// E[e^{is S_n}] with X_0 ~ mu0 (no normalization of s).
Complex exact_cf_sn_raw(const FiniteChain& chain, const Observable& xi,
                        const Distribution& mu0, int n, double s);

// E[e^{it S_n / (sigma sqrt n)}]; throws DegenerateVariance when sigma2 = 0.
Complex exact_cf_sn(const FiniteChain& chain, const Observable& xi,
                    const Distribution& mu0, int n, double t);

// E[e^{it T_n / (sigma sqrt n)}] under the stationary start, computed with
// the edge-tilted kernel K(y,y') = P(y,y') e^{is u(y,y')} (equivalent to the
// pair-chain kernel but n x n).
Complex exact_cf_tn(const FiniteChain& chain, const Observable& xi, int n,
                    double t);

// For each n: sqrt(n) * sup over the grid {+-sqrt(n) k / points_per_side} of
// |cf_n(t) - e^{-t^2/2}| / |t|. Boundedness of this sequence is the
// martingale cf-gap statement.
std::vector<std::pair<int, double>> cf_gap_profile(
    const FiniteChain& chain, const Observable& xi, const Distribution& mu0,
    const std::vector<int>& n_list, int points_per_side = 32);

// Exact (matrix-arithmetic / path-enumeration) verification of the
// martingale structure:
//   (i)   E[U_n | X_{n-1} = x] = 0
//   (ii)  E[W_k | X_{l-1} = x] = (Q^{k-l} psi)(x), W_k = U_k^2 - sigma2,
//         for lags 0..horizon
//   (iii) S_n = T_n + V_n, V_n = Q xi_breve(X_0) - Q xi_breve(X_n),
//         enumerated over all paths of length <= 4
//   (iv)  Z'_l = psi_breve(X_{l-1}) with psi_breve = sum_p Q^p psi
struct MartingaleAudit {
  double mean_increment_max = 0.0;
  double lemma_max_err = 0.0;
  double decomposition_max_err = 0.0;
  double zprime_max_err = 0.0;
  bool pass = false;
  std::string witness;
};
MartingaleAudit martingale_audit(const FiniteChain& chain,
                                 const Observable& xi, int horizon);

// Dynamic program over (state, running sum); xi * scale must be integer
// valued within 1e-9 and n * range(xi * scale) <= 1e6 cells.
LatticeCdf exact_cdf_lattice(const FiniteChain& chain, const Observable& xi,
                             const Distribution& mu0, int n,
                             double scale = 1.0);

// sup_x |P(S_n/(sigma sqrt n) <= x) - Phi(x)| evaluated at the atoms
// (left and right limits).
double kolmogorov_distance_exact(const LatticeCdf& cdf, double sigma);

// Esseen smoothing bound for a characteristic function against the Gaussian:
//   (1/pi) int_{-T}^{T} |cf(t) - e^{-t^2/2}| / |t| dt + 24 / (pi T sqrt(2 pi))
// with adaptive quadrature; the integrand is extended by continuity at 0.
double esseen_smoothing_bound(const std::function<Complex(double)>& cf,
                              double T);

// Bound above applied to the exact cf of S_n / (sigma sqrt n); upper-bounds
// the Kolmogorov distance.
double esseen_bound(const FiniteChain& chain, const Observable& xi,
                    const Distribution& mu0, int n, double T);

// Empirical Kolmogorov distance of samples (already divided by sqrt(n))
// against N(0, sigma^2); statistical floor is O(M^{-1/2}) in the sample
// count M.
double kolmogorov_distance_mc(std::vector<double> samples, double sigma);

}  // namespace cltlab
