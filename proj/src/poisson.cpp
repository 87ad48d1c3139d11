#include "cltlab/poisson.hpp"

#include <cmath>

#include "cltlab/chain.hpp"
#include "cltlab/eigs.hpp"

namespace cltlab {

namespace {

void require_centered(const FiniteChain& chain, const Observable& xi,
                      const Distribution& nu) {
  if (xi.values.size() != chain.n_states())
    throw Error(ErrorCode::DimensionMismatch, "observable size != n_states");
  const double mean = bdot(nu.weights, xi.values);
  if (std::abs(mean) > 1e-10)
    throw Error(ErrorCode::NotCentered, "nu(xi) = " + std::to_string(mean));
}

Vector squared(const Vector& v) { return v.array().square().matrix(); }

// Centered solution of (I - Q) g = rhs via the fundamental matrix
// (I - Q + 1 nu^T); requires nu(rhs) = 0, and then nu(g) = 0 automatically.
Vector fundamental_solve(const FiniteChain& chain, const Distribution& nu,
                         const Vector& rhs) {
  const int n = chain.n_states();
  const Matrix A = Matrix::Identity(n, n) - chain.P +
                   Vector::Ones(n) * nu.weights.transpose();
  return A.partialPivLu().solve(rhs);
}

double variance_from(const Distribution& nu, const Vector& xi_breve,
                     const Vector& q_xi_breve) {
  const double s2 = bdot(nu.weights, squared(xi_breve)) -
                    bdot(nu.weights, squared(q_xi_breve));
  if (s2 < -1e-12)
    throw Error(ErrorCode::NoConvergence,
                "negative variance " + std::to_string(s2));
  return std::max(s2, 0.0);
}

Vector psi_from(const FiniteChain& chain, const Vector& xi_breve,
                const Vector& q_xi_breve, double sigma2) {
  return ((chain.P * squared(xi_breve)).array() -
          q_xi_breve.array().square() - sigma2)
      .matrix();
}

}  // namespace

Vector solve_poisson(const FiniteChain& chain, const Observable& xi) {
  const Distribution nu = stationary_distribution(chain);
  require_centered(chain, xi, nu);

  // The fundamental-matrix solve would succeed on a periodic chain, but the
  // series representation (and everything downstream) needs the gap.
  {
    const int n = chain.n_states();
    const CMatrix deflated =
        chain.P.cast<Complex>() -
        CVector::Ones(n) * nu.weights.transpose().cast<Complex>();
    const double sub = spectral_radius_estimate(deflated);
    if (sub > 1.0 - 1e-9)
      throw Error(ErrorCode::NoSpectralGap,
                  "sub-dominant modulus " + std::to_string(sub));
  }

  const Vector xi_breve = fundamental_solve(chain, nu, xi.values);
  const double residual =
      ((xi_breve - chain.P * xi_breve) - xi.values).cwiseAbs().maxCoeff();
  if (residual > 1e-10)
    throw Error(ErrorCode::NoConvergence,
                "Poisson residual " + std::to_string(residual));
  return xi_breve;
}

double sigma_squared(const FiniteChain& chain, const Observable& xi) {
  const Distribution nu = stationary_distribution(chain);
  const Vector xi_breve = solve_poisson(chain, xi);
  const Vector q_xi_breve = chain.P * xi_breve;
  return variance_from(nu, xi_breve, q_xi_breve);
}

Vector psi_function(const FiniteChain& chain, const Observable& xi) {
  const Distribution nu = stationary_distribution(chain);
  const Vector xi_breve = solve_poisson(chain, xi);
  const Vector q_xi_breve = chain.P * xi_breve;
  const double s2 = variance_from(nu, xi_breve, q_xi_breve);
  const Vector psi = psi_from(chain, xi_breve, q_xi_breve, s2);
  const double mean = bdot(nu.weights, psi);
  if (std::abs(mean) > 1e-10)
    throw Error(ErrorCode::NoConvergence, "nu(psi) = " + std::to_string(mean));
  return psi;
}

std::pair<double, int> h2_series(const FiniteChain& chain,
                                 const Observable& xi) {
  const Distribution nu = stationary_distribution(chain);
  const Vector psi = psi_function(chain, xi);
  const ErgodicityProfile profile =
      ergodicity_profile(chain, NormKind::Sup, 64);

  const double psi_norm = psi.cwiseAbs().maxCoeff();
  double value = 0.0;
  int terms = 0;
  Vector g = psi;
  const int max_terms = 100000;
  while (true) {
    // term_p = nu(|Q^p psi|^{3/2})^{2/3}
    const double moment =
        bdot(nu.weights, Vector(g.cwiseAbs().array().pow(1.5).matrix()));
    value += std::pow(moment, 2.0 / 3.0);
    ++terms;
    // |Q^p psi| <= C kappa0^p ||psi||_inf bounds every remaining term.
    const double tail = profile.C * std::pow(profile.kappa0, terms) *
                        psi_norm / std::max(1.0 - profile.kappa0, 1e-12);
    if (tail < 1e-12) {
      value += tail;
      break;
    }
    if (terms >= max_terms)
      throw Error(ErrorCode::NoConvergence, "h2 series truncation overflow");
    g = chain.P * g;
  }
  return {value, terms};
}

double h3_audit(const FiniteChain& chain, const Observable& xi,
                NormKind weight_kind, const std::vector<double>& t_grid) {
  if (t_grid.empty())
    throw Error(ErrorCode::EmptyGrid, "h3_audit needs a nonempty t grid");
  for (double t : t_grid)
    if (t == 0.0)
      throw Error(ErrorCode::EmptyGrid, "h3_audit grid must exclude t = 0");
  const Distribution nu = stationary_distribution(chain);
  Vector W = Vector::Ones(chain.n_states());
  if (weight_kind == NormKind::VWeighted) {
    if (!chain.V)
      throw Error(ErrorCode::ValidationError, "chain has no weight V");
    W = *chain.V;
  }
  double worst = 0.0;
  for (double t : t_grid) {
    // |e^{it xi} - 1| = 2 |sin(t xi / 2)|
    const Vector gap =
        (2.0 * (0.5 * t * xi.values.array()).sin().abs()).matrix();
    const double value =
        bdot(nu.weights, Vector((gap.array() * W.array()).matrix())) /
        std::abs(t);
    worst = std::max(worst, value);
  }
  return worst;
}

CltDiagnostics clt_diagnostics(const FiniteChain& chain,
                               const Observable& xi) {
  CltDiagnostics diag;
  const Distribution nu = stationary_distribution(chain);
  diag.xi_breve = solve_poisson(chain, xi);
  diag.q_xi_breve = chain.P * diag.xi_breve;
  diag.sigma2 = variance_from(nu, diag.xi_breve, diag.q_xi_breve);
  diag.psi = psi_from(chain, diag.xi_breve, diag.q_xi_breve, diag.sigma2);
  // nu(psi) = 0, so the fundamental matrix also sums the psi series.
  diag.psi_breve = fundamental_solve(chain, nu, diag.psi);
  auto [h2, terms] = h2_series(chain, xi);
  diag.h2_value = h2;
  diag.series_terms_used = terms;
  return diag;
}

}  // namespace cltlab
