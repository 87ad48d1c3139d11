#include "cltlab/cf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "cltlab/chain.hpp"
#include "cltlab/normal.hpp"

namespace cltlab {

namespace {

constexpr double kPi = 3.14159265358979323846264338328;
constexpr double kSqrt2Pi = 2.50662827463100050241576528481;

void check_mu0(const FiniteChain& chain, const Distribution& mu0) {
  if (mu0.size() != chain.n_states())
    throw Error(ErrorCode::DimensionMismatch, "mu0 size != n_states");
}

// <mu, Q(s)^n 1> by n successive kernel applications; the tilted kernel is
// P with column j scaled by e^{i s xi_j}.
Complex tilted_pairing(const Matrix& P, const Vector& xi, const Vector& mu,
                       int n, double s) {
  const int m = static_cast<int>(P.rows());
  CMatrix M = P.cast<Complex>();
  for (int j = 0; j < m; ++j) M.col(j) *= std::exp(Complex(0.0, s * xi[j]));
  CVector g = CVector::Ones(m);
  for (int k = 0; k < n; ++k) g = M * g;
  return bdot(mu, g);
}

double sigma_or_throw(const FiniteChain& chain, const Observable& xi) {
  const double s2 = sigma_squared(chain, xi);
  if (s2 < 1e-12)
    throw Error(ErrorCode::DegenerateVariance, "sigma^2 = 0");
  return std::sqrt(s2);
}

struct SimpsonState {
  const std::function<double(double)>& f;
  long evaluations = 0;
  long budget = 400000;

  double eval(double x) {
    if (++evaluations > budget)
      throw Error(ErrorCode::QuadratureFailure,
                  "adaptive quadrature exceeded its evaluation budget");
    return f(x);
  }
};

double adaptive_simpson(SimpsonState& st, double a, double b, double fa,
                        double fm, double fb, double whole, double tol,
                        int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = st.eval(lm);
  const double frm = st.eval(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0)
    throw Error(ErrorCode::QuadratureFailure,
                "adaptive quadrature hit maximum depth");
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(st, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(st, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
  SimpsonState st{f};
  // Seed panels so oscillations are resolved before the adaptive recursion
  // takes over.
  const int panels = std::max(64, static_cast<int>(std::ceil(8.0 * (b - a))));
  double total = 0.0;
  double x0 = a;
  double f0 = st.eval(a);
  for (int p = 0; p < panels; ++p) {
    const double x1 = a + (b - a) * (p + 1) / panels;
    const double xm = 0.5 * (x0 + x1);
    const double f1 = st.eval(x1);
    const double fm = st.eval(xm);
    const double whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
    total += adaptive_simpson(st, x0, x1, f0, fm, f1, whole, tol / panels, 48);
    x0 = x1;
    f0 = f1;
  }
  return total;
}

}  // namespace

PairChain build_pair_chain(const FiniteChain& chain,
                           const CltDiagnostics& diag) {
  const int n = chain.n_states();
  if (n > 64)
    throw Error(ErrorCode::GridTooLarge,
                "pair chain is dense in n^2 states; n_states must be <= 64");
  const Distribution nu = stationary_distribution(chain);

  Matrix P2 = Matrix::Zero(n * n, n * n);
  Vector u(n * n);
  Vector init = Vector::Zero(n * n);
  Vector stat2(n * n);
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      const int z = x * n + y;
      for (int y2 = 0; y2 < n; ++y2) P2(z, y * n + y2) = chain.P(y, y2);
      u[z] = diag.xi_breve[y] - diag.q_xi_breve[x];
      stat2[z] = nu.weights[x] * chain.P(x, y);
      if (x == y) init[z] = nu.weights[x];
    }
  }
  PairChain pair;
  pair.chain2 = validate_chain(P2);
  pair.u = std::move(u);
  pair.initial = Distribution{std::move(init)};
  pair.stationary2 = Distribution{std::move(stat2)};
  return pair;
}

Complex exact_cf_sn_raw(const FiniteChain& chain, const Observable& xi,
                        const Distribution& mu0, int n, double s) {
  if (n < 1) throw Error(ErrorCode::ValidationError, "n must be >= 1");
  check_mu0(chain, mu0);
  if (xi.values.size() != chain.n_states())
    throw Error(ErrorCode::DimensionMismatch, "observable size != n_states");
  return tilted_pairing(chain.P, xi.values, mu0.weights, n, s);
}

Complex exact_cf_sn(const FiniteChain& chain, const Observable& xi,
                    const Distribution& mu0, int n, double t) {
  const double sigma = sigma_or_throw(chain, xi);
  return exact_cf_sn_raw(chain, xi, mu0, n, t / (sigma * std::sqrt(n)));
}

Complex exact_cf_tn(const FiniteChain& chain, const Observable& xi, int n,
                    double t) {
  if (n < 1) throw Error(ErrorCode::ValidationError, "n must be >= 1");
  const int m = chain.n_states();
  const Distribution nu = stationary_distribution(chain);
  const Vector xi_breve = solve_poisson(chain, xi);
  const Vector q_xi_breve = chain.P * xi_breve;
  const double sigma = sigma_or_throw(chain, xi);
  const double s = t / (sigma * std::sqrt(n));

  // Edge-tilted kernel K(y,y') = P(y,y') e^{is u(y,y')} with
  // u(y,y') = xi_breve(y') - Q xi_breve(y); <nu, K^n 1> sums e^{is T_n}
  // over stationary paths.
  CMatrix K = chain.P.cast<Complex>();
  for (int y = 0; y < m; ++y)
    for (int y2 = 0; y2 < m; ++y2)
      K(y, y2) *= std::exp(Complex(0.0, s * (xi_breve[y2] - q_xi_breve[y])));
  CVector g = CVector::Ones(m);
  for (int k = 0; k < n; ++k) g = K * g;
  return bdot(nu.weights, g);
}

std::vector<std::pair<int, double>> cf_gap_profile(
    const FiniteChain& chain, const Observable& xi, const Distribution& mu0,
    const std::vector<int>& n_list, int points_per_side) {
  if (points_per_side < 1)
    throw Error(ErrorCode::ValidationError, "points_per_side must be >= 1");
  check_mu0(chain, mu0);
  const double sigma = sigma_or_throw(chain, xi);

  std::vector<std::pair<int, double>> out;
  for (int n : n_list) {
    if (n < 1) throw Error(ErrorCode::ValidationError, "n must be >= 1");
    const double sqrt_n = std::sqrt(n);
    double sup = 0.0;
    for (int k = 1; k <= points_per_side; ++k) {
      const double t = sqrt_n * k / points_per_side;
      for (double signed_t : {t, -t}) {
        const Complex cf = exact_cf_sn_raw(chain, xi, mu0, n,
                                           signed_t / (sigma * sqrt_n));
        const double gap =
            std::abs(cf - Complex(std::exp(-0.5 * signed_t * signed_t), 0.0));
        sup = std::max(sup, gap / std::abs(signed_t));
      }
    }
    out.emplace_back(n, sqrt_n * sup);
  }
  return out;
}

MartingaleAudit martingale_audit(const FiniteChain& chain,
                                 const Observable& xi, int horizon) {
  if (horizon < 0)
    throw Error(ErrorCode::ValidationError, "horizon must be >= 0");
  const int n = chain.n_states();
  const CltDiagnostics diag = clt_diagnostics(chain, xi);
  const Distribution nu = stationary_distribution(chain);

  MartingaleAudit audit;
  const double tol = 1e-10;

  // (i) E[U | X_prev = x] = sum_y P(x,y) (xi_breve(y) - Q xi_breve(x)) = 0.
  for (int x = 0; x < n; ++x) {
    double acc = 0.0;
    for (int y = 0; y < n; ++y)
      acc += chain.P(x, y) * (diag.xi_breve[y] - diag.q_xi_breve[x]);
    audit.mean_increment_max =
        std::max(audit.mean_increment_max, std::abs(acc));
  }
  if (audit.mean_increment_max > tol)
    throw Error(ErrorCode::IdentityViolated,
                "E[U | X] != 0, max " +
                    std::to_string(audit.mean_increment_max));

  // (ii) E[W_k | X_{l-1} = x] against (Q^{k-l} psi)(x). The left side is the
  // raw conditional expectation of U^2 - sigma^2 propagated by P.
  Vector w_raw(n);
  for (int x = 0; x < n; ++x) {
    double acc = 0.0;
    for (int y = 0; y < n; ++y) {
      const double u = diag.xi_breve[y] - diag.q_xi_breve[x];
      acc += chain.P(x, y) * u * u;
    }
    w_raw[x] = acc - diag.sigma2;
  }
  Vector lhs = w_raw;
  Vector rhs = diag.psi;
  for (int lag = 0; lag <= horizon; ++lag) {
    const double err = (lhs - rhs).cwiseAbs().maxCoeff();
    audit.lemma_max_err = std::max(audit.lemma_max_err, err);
    if (err > tol)
      throw Error(ErrorCode::IdentityViolated,
                  "conditional variance identity fails at lag " +
                      std::to_string(lag) + ", err " + std::to_string(err));
    lhs = chain.P * lhs;
    rhs = chain.P * rhs;
  }

  // (iii) S_n = T_n + V_n on every path of length <= 4 (sampled for large
  // state spaces).
  const auto path_check = [&](const std::vector<int>& path) {
    const int len = static_cast<int>(path.size()) - 1;
    double s = 0.0, tn = 0.0;
    for (int k = 1; k <= len; ++k) {
      s += xi.values[path[k]];
      tn += diag.xi_breve[path[k]] - diag.q_xi_breve[path[k - 1]];
    }
    const double vn = diag.q_xi_breve[path[0]] - diag.q_xi_breve[path[len]];
    return std::abs(s - tn - vn);
  };
  for (int len = 1; len <= 4; ++len) {
    const double count = std::pow(static_cast<double>(n), len + 1);
    if (count <= 2e6) {
      std::vector<int> path(len + 1, 0);
      while (true) {
        const double err = path_check(path);
        if (err > tol) {
          std::string witness = "path";
          for (int s : path) witness += " " + std::to_string(s);
          throw Error(ErrorCode::IdentityViolated,
                      "S != T + V on " + witness);
        }
        audit.decomposition_max_err =
            std::max(audit.decomposition_max_err, err);
        int pos = len;
        while (pos >= 0 && ++path[pos] == n) path[pos--] = 0;
        if (pos < 0) break;
      }
    } else {
      std::uint64_t state = 0x9e3779b97f4a7c15ULL;
      auto next_state = [&]() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        return static_cast<int>(state % n);
      };
      for (int trial = 0; trial < 10000; ++trial) {
        std::vector<int> path(len + 1);
        for (int& s : path) s = next_state();
        const double err = path_check(path);
        audit.decomposition_max_err =
            std::max(audit.decomposition_max_err, err);
        if (err > tol)
          throw Error(ErrorCode::IdentityViolated, "S != T + V (sampled)");
      }
    }
  }

  // (iv) psi_breve from the fundamental matrix against the truncated series
  // sum_p Q^p psi with a geometric tail below 1e-12.
  const ErgodicityProfile profile =
      ergodicity_profile(chain, NormKind::Sup, 64);
  Vector series = Vector::Zero(n);
  Vector term = diag.psi;
  const double psi_norm = diag.psi.cwiseAbs().maxCoeff();
  for (int p = 0; p < 100000; ++p) {
    series += term;
    const double tail_bound = profile.C * std::pow(profile.kappa0, p + 1) *
                              psi_norm /
                              std::max(1.0 - profile.kappa0, 1e-12);
    if (tail_bound < 1e-12) break;
    term = chain.P * term;
  }
  audit.zprime_max_err = (series - diag.psi_breve).cwiseAbs().maxCoeff();
  if (audit.zprime_max_err > 1e-9)
    throw Error(ErrorCode::IdentityViolated,
                "Z' series disagrees with psi_breve, err " +
                    std::to_string(audit.zprime_max_err));

  audit.pass = true;
  return audit;
}

LatticeCdf exact_cdf_lattice(const FiniteChain& chain, const Observable& xi,
                             const Distribution& mu0, int n, double scale) {
  if (n < 1) throw Error(ErrorCode::ValidationError, "n must be >= 1");
  if (!(scale > 0.0))
    throw Error(ErrorCode::ValidationError, "scale must be > 0");
  check_mu0(chain, mu0);
  const int m = chain.n_states();
  if (xi.values.size() != m)
    throw Error(ErrorCode::DimensionMismatch, "observable size != n_states");

  std::vector<long long> k(m);
  for (int j = 0; j < m; ++j) {
    const double scaled = xi.values[j] * scale;
    k[j] = std::llround(scaled);
    if (std::abs(scaled - static_cast<double>(k[j])) > 1e-9)
      throw Error(ErrorCode::NotLattice,
                  "xi * scale is not integer valued at state " +
                      std::to_string(j));
  }
  const long long kmin = *std::min_element(k.begin(), k.end());
  const long long kmax = *std::max_element(k.begin(), k.end());
  const long long range = kmax - kmin;
  if (static_cast<double>(n) * static_cast<double>(range) > 1e6)
    throw Error(ErrorCode::GridTooLarge,
                "n * range(xi) exceeds 1e6 lattice cells");

  // dist[x][s] = P(X_step = x, sum of shifted increments = s), with shift
  // kmin per step so s >= 0.
  std::vector<std::vector<double>> dist(m, std::vector<double>{1.0});
  for (int x = 0; x < m; ++x) dist[x][0] = mu0.weights[x];

  for (int step = 0; step < n; ++step) {
    const std::size_t width = static_cast<std::size_t>(step) * range + 1;
    const std::size_t next_width = width + range;
    std::vector<std::vector<double>> next(
        m, std::vector<double>(next_width, 0.0));
    for (int x = 0; x < m; ++x) {
      for (std::size_t s = 0; s < width; ++s) {
        const double p = dist[x][s];
        if (p == 0.0) continue;
        for (int y = 0; y < m; ++y) {
          const double q = chain.P(x, y);
          if (q == 0.0) continue;
          next[y][s + static_cast<std::size_t>(k[y] - kmin)] += p * q;
        }
      }
    }
    dist = std::move(next);
  }

  const std::size_t width = static_cast<std::size_t>(n) * range + 1;
  LatticeCdf cdf;
  cdf.n = n;
  double total = 0.0;
  for (std::size_t s = 0; s < width; ++s) {
    double p = 0.0;
    for (int x = 0; x < m; ++x) p += dist[x][s];
    total += p;
    if (p > 0.0) {
      const double value =
          static_cast<double>(static_cast<long long>(s) + n * kmin) / scale;
      cdf.atoms.push_back({value, p});
    }
  }
  if (std::abs(total - 1.0) > 1e-10)
    throw Error(ErrorCode::NoConvergence,
                "lattice DP mass " + std::to_string(total));
  return cdf;
}

double kolmogorov_distance_exact(const LatticeCdf& cdf, double sigma) {
  if (!(sigma > 0.0))
    throw Error(ErrorCode::DegenerateVariance, "sigma must be > 0");
  if (cdf.atoms.empty())
    throw Error(ErrorCode::EmptySamples, "empty lattice law");
  const double denom = sigma * std::sqrt(static_cast<double>(cdf.n));
  double cumulative = 0.0;
  double worst = 0.0;
  for (const LatticeAtom& atom : cdf.atoms) {
    const double phi = normal_cdf(atom.value / denom);
    worst = std::max(worst, std::abs(cumulative - phi));  // left limit
    cumulative += atom.prob;
    worst = std::max(worst, std::abs(cumulative - phi));
  }
  return worst;
}

double esseen_smoothing_bound(const std::function<Complex(double)>& cf,
                              double T) {
  if (!(T > 0.0)) throw Error(ErrorCode::ValidationError, "T must be > 0");
  const double eps = 1e-8;
  const auto integrand = [&](double t) {
    return std::abs(cf(t) - Complex(std::exp(-0.5 * t * t), 0.0)) / t;
  };
  const double body = integrate(integrand, eps, T, 1e-9);
  // The integrand extends continuously to 0; the excluded neighborhood
  // contributes at most eps * integrand(eps) up to lower order.
  const double near_zero = eps * integrand(eps);
  return (2.0 / kPi) * (body + near_zero) + 24.0 / (kPi * T * kSqrt2Pi);
}

double esseen_bound(const FiniteChain& chain, const Observable& xi,
                    const Distribution& mu0, int n, double T) {
  if (n < 1) throw Error(ErrorCode::ValidationError, "n must be >= 1");
  check_mu0(chain, mu0);
  const double sigma = sigma_or_throw(chain, xi);
  const double denom = sigma * std::sqrt(n);

  const int m = chain.n_states();
  const Matrix& P = chain.P;
  const Vector& values = xi.values;
  const Vector& mu = mu0.weights;
  const auto cf = [&, m, n, denom](double t) -> Complex {
    CMatrix M = P.cast<Complex>();
    for (int j = 0; j < m; ++j)
      M.col(j) *= std::exp(Complex(0.0, t / denom * values[j]));
    CVector g = CVector::Ones(m);
    for (int k = 0; k < n; ++k) g = M * g;
    return bdot(mu, g);
  };
  return esseen_smoothing_bound(cf, T);
}

double kolmogorov_distance_mc(std::vector<double> samples, double sigma) {
  if (samples.empty())
    throw Error(ErrorCode::EmptySamples, "no samples");
  if (!(sigma > 0.0))
    throw Error(ErrorCode::DegenerateVariance, "sigma must be > 0");
  std::sort(samples.begin(), samples.end());
  const double M = static_cast<double>(samples.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double phi = normal_cdf(samples[i] / sigma);
    worst = std::max(worst, std::abs((i + 1) / M - phi));
    worst = std::max(worst, std::abs(i / M - phi));
  }
  return worst;
}

}  // namespace cltlab
