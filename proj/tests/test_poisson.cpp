#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cltlab/chain.hpp"
#include "cltlab/poisson.hpp"
#include "test_support.hpp"

using namespace cltlab;
using testsupport::random_observable;
using testsupport::random_stochastic;

namespace {

FiniteChain sym_chain(double p) {
  Matrix P(2, 2);
  P << 1.0 - p, p, p, 1.0 - p;
  return validate_chain(P);
}

FiniteChain asym_chain() {
  Matrix P(2, 2);
  P << 0.75, 0.25, 0.5, 0.5;
  return validate_chain(P);
}

FiniteChain iid_pm1() {
  Matrix P(2, 2);
  P << 0.5, 0.5, 0.5, 0.5;
  return validate_chain(P);
}

Observable pm1() {
  Vector v(2);
  v << 1.0, -1.0;
  return {v, true};
}

// Oracle: truncated series sum_{k<=N} Q^k xi.
Vector series_solution(const FiniteChain& chain, const Vector& xi, int terms) {
  Vector acc = Vector::Zero(chain.n_states());
  Vector term = xi;
  for (int k = 0; k < terms; ++k) {
    acc += term;
    term = chain.P * term;
  }
  return acc;
}

// Oracle: covariance series nu(xi^2) + 2 sum_{k<=N} nu(xi Q^k xi).
double covariance_series(const FiniteChain& chain, const Vector& xi,
                         int terms) {
  const Distribution nu = stationary_distribution(chain);
  double acc = (nu.weights.array() * xi.array() * xi.array()).sum();
  Vector g = xi;
  for (int k = 1; k <= terms; ++k) {
    g = chain.P * g;
    acc += 2.0 * (nu.weights.array() * xi.array() * g.array()).sum();
  }
  return acc;
}

}  // namespace

TEST_CASE("solve_poisson closed forms") {
  SUBCASE("zero observable") {
    const Vector out = solve_poisson(iid_pm1(), {Vector::Zero(2), true});
    CHECK(out.cwiseAbs().maxCoeff() <= 1e-14);
  }
  SUBCASE("symmetric two-state: geometric series xi/(2p)") {
    const double p = 0.25;
    const Vector out = solve_poisson(sym_chain(p), pm1());
    CHECK(out[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(-2.0).epsilon(1e-12));
  }
  SUBCASE("iid chain: xi_breve = xi") {
    const Vector out = solve_poisson(iid_pm1(), pm1());
    CHECK((out - pm1().values).cwiseAbs().maxCoeff() <= 1e-13);
  }
}

TEST_CASE("solve_poisson rejects uncentered observables") {
  Vector v(2);
  v << 1.0, 0.5;
  CHECK_THROWS_WITH_AS(solve_poisson(sym_chain(0.25), {v, false}),
                       doctest::Contains("NotCentered"), Error);
}

TEST_CASE("solve_poisson agrees with the truncated series oracle") {
  for (std::uint64_t seed : {5ull, 17ull, 23ull}) {
    const int n = 3 + static_cast<int>(seed % 4);
    const FiniteChain chain = validate_chain(random_stochastic(n, seed));
    const Observable xi =
        center_observable(chain, {random_observable(n, seed), false});
    const Vector fm = solve_poisson(chain, xi);
    const Vector series = series_solution(chain, xi.values, 400);
    CHECK((fm - series).cwiseAbs().maxCoeff() <= 1e-9);

    // Poisson residual invariant.
    CHECK(((fm - chain.P * fm) - xi.values).cwiseAbs().maxCoeff() <= 1e-10);

    // nu(xi_breve) = 0.
    const Distribution nu = stationary_distribution(chain);
    CHECK(std::abs(bdot(nu.weights, fm)) <= 1e-11);
  }
}

TEST_CASE("solve_poisson refuses periodic chains") {
  Matrix flip(2, 2);
  flip << 0.0, 1.0, 1.0, 0.0;
  CHECK_THROWS_WITH_AS(solve_poisson(validate_chain(flip), pm1()),
                       doctest::Contains("NoSpectralGap"), Error);
}

TEST_CASE("series truncation is stable: 50 extra terms change nothing") {
  const FiniteChain chain = asym_chain();
  Vector raw(2);
  raw << 1.0, 0.0;
  const Observable xi = center_observable(chain, {raw, false});

  const Vector xb = solve_poisson(chain, xi);
  // Truncation long enough that the geometric tail is below 1e-12.
  const int base = 150;
  const Vector s1 = series_solution(chain, xi.values, base);
  const Vector s2 = series_solution(chain, xi.values, base + 50);
  CHECK((s2 - s1).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((xb - s2).cwiseAbs().maxCoeff() < 1e-10);

  const Vector psi = psi_function(chain, xi);
  const Vector pb1 = series_solution(chain, psi, base);
  const Vector pb2 = series_solution(chain, psi, base + 50);
  CHECK((pb2 - pb1).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("sigma_squared closed forms") {
  SUBCASE("iid signs have unit variance") {
    CHECK(sigma_squared(iid_pm1(), pm1()) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("symmetric two-state p = 0.25 gives (1-p)/p = 3") {
    CHECK(sigma_squared(sym_chain(0.25), pm1()) ==
          doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("zero observable") {
    CHECK(sigma_squared(sym_chain(0.25), {Vector::Zero(2), true}) ==
          doctest::Approx(0.0));
  }
}

TEST_CASE("sigma_squared equals the covariance series oracle") {
  for (std::uint64_t seed : {101ull, 202ull, 303ull, 404ull}) {
    const int n = 2 + static_cast<int>(seed % 6);
    const FiniteChain chain = validate_chain(random_stochastic(n, seed));
    const Observable xi =
        center_observable(chain, {random_observable(n, seed), false});
    const double direct = sigma_squared(chain, xi);
    const double series = covariance_series(chain, xi.values, 500);
    CHECK(direct == doctest::Approx(series).epsilon(1e-10));
  }
}

TEST_CASE("psi_function") {
  SUBCASE("symmetric chain: every term is constant, psi = 0") {
    const Vector psi = psi_function(sym_chain(0.25), pm1());
    CHECK(psi.cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("zero observable") {
    const Vector psi = psi_function(sym_chain(0.25), {Vector::Zero(2), true});
    CHECK(psi.cwiseAbs().maxCoeff() <= 1e-13);
  }
  SUBCASE("asymmetric chain: nonzero with nu(psi) = 0") {
    const FiniteChain chain = asym_chain();
    Vector raw(2);
    raw << 1.0, 0.0;
    const Observable xi = center_observable(chain, {raw, false});
    const Vector psi = psi_function(chain, xi);
    CHECK(psi.cwiseAbs().maxCoeff() > 1e-4);

    const Distribution nu = stationary_distribution(chain);
    CHECK(std::abs(bdot(nu.weights, psi)) <= 1e-12);

    // Brute-force matrix arithmetic oracle.
    const Vector xb = series_solution(chain, xi.values, 600);
    const Vector qxb = chain.P * xb;
    const double s2 = (nu.weights.array() * xb.array().square()).sum() -
                      (nu.weights.array() * qxb.array().square()).sum();
    const Vector oracle =
        ((chain.P * Vector(xb.array().square().matrix())).array() -
         qxb.array().square() - s2)
            .matrix();
    CHECK((psi - oracle).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("conditional variance identity Q(xb^2) - (Qxb)^2 = psi + sigma2") {
  const FiniteChain chain = validate_chain(random_stochastic(5, 777));
  const Observable xi =
      center_observable(chain, {random_observable(5, 777), false});
  const Vector xb = solve_poisson(chain, xi);
  const Vector qxb = chain.P * xb;
  const double s2 = sigma_squared(chain, xi);
  const Vector psi = psi_function(chain, xi);
  const Vector lhs =
      ((chain.P * Vector(xb.array().square().matrix())).array() -
       qxb.array().square())
          .matrix();
  const Vector rhs = (psi.array() + s2).matrix();
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("h2_series") {
  SUBCASE("psi = 0 gives (0, 1)") {
    const auto [value, terms] = h2_series(sym_chain(0.25), pm1());
    CHECK(value <= 1e-12);
    CHECK(terms == 1);
  }
  SUBCASE("asymmetric chain matches the 200-term truncation") {
    const FiniteChain chain = asym_chain();
    Vector raw(2);
    raw << 1.0, 0.0;
    const Observable xi = center_observable(chain, {raw, false});
    const auto [value, terms] = h2_series(chain, xi);
    CHECK(value > 0.0);

    const Distribution nu = stationary_distribution(chain);
    const Vector psi = psi_function(chain, xi);
    double oracle = 0.0;
    Vector g = psi;
    for (int p = 0; p < 200; ++p) {
      oracle += std::pow(
          (nu.weights.array() * g.cwiseAbs().array().pow(1.5)).sum(),
          2.0 / 3.0);
      g = chain.P * g;
    }
    CHECK(value == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(terms >= 1);
  }
  SUBCASE("tail stability: extending the truncation is invisible") {
    const FiniteChain chain = asym_chain();
    Vector raw(2);
    raw << 1.0, 0.0;
    const Observable xi = center_observable(chain, {raw, false});
    const auto [value, terms] = h2_series(chain, xi);

    const Distribution nu = stationary_distribution(chain);
    const Vector psi = psi_function(chain, xi);
    double longer = 0.0;
    Vector g = psi;
    for (int p = 0; p < terms + 50; ++p) {
      longer += std::pow(
          (nu.weights.array() * g.cwiseAbs().array().pow(1.5)).sum(),
          2.0 / 3.0);
      g = chain.P * g;
    }
    CHECK(std::abs(longer - value) <= 1e-10);
  }
}

TEST_CASE("h3_audit") {
  SUBCASE("zero observable gives 0") {
    CHECK(h3_audit(sym_chain(0.25), {Vector::Zero(2), true}, NormKind::Sup,
                   {0.1, 0.5}) == doctest::Approx(0.0));
  }
  SUBCASE("iid signs: ratio is |2 sin(t/2)| / |t| <= 1") {
    const double t = 0.7;
    const double ratio = h3_audit(iid_pm1(), pm1(), NormKind::Sup, {t});
    CHECK(ratio ==
          doctest::Approx(2.0 * std::abs(std::sin(0.5 * t)) / t)
              .epsilon(1e-12));
    CHECK(ratio <= 1.0);
  }
  SUBCASE("elementary bound nu(|xi| W) dominates the grid max") {
    const FiniteChain chain = validate_chain(random_stochastic(4, 55));
    const Observable xi =
        center_observable(chain, {random_observable(4, 55), false});
    const Distribution nu = stationary_distribution(chain);
    const double bound =
        (nu.weights.array() * xi.values.cwiseAbs().array()).sum();
    const double ratio =
        h3_audit(chain, xi, NormKind::Sup, {0.01, 0.1, 0.5, 1.0});
    CHECK(ratio <= bound + 1e-9);
  }
  SUBCASE("empty grid") {
    CHECK_THROWS_WITH_AS(h3_audit(iid_pm1(), pm1(), NormKind::Sup, {}),
                         doctest::Contains("EmptyGrid"), Error);
  }
}

TEST_CASE("clt_diagnostics bundle invariants") {
  const FiniteChain chain = validate_chain(random_stochastic(6, 909));
  const Observable xi =
      center_observable(chain, {random_observable(6, 909), false});
  const CltDiagnostics diag = clt_diagnostics(chain, xi);
  const Distribution nu = stationary_distribution(chain);

  CHECK(((diag.xi_breve - chain.P * diag.xi_breve) - xi.values)
            .cwiseAbs()
            .maxCoeff() <= 1e-10);
  CHECK((diag.q_xi_breve - chain.P * diag.xi_breve).cwiseAbs().maxCoeff() <=
        1e-14);
  CHECK(std::abs(bdot(nu.weights, diag.psi)) <= 1e-10);
  CHECK(diag.sigma2 >= 0.0);

  // psi_breve solves (I - Q) g = psi up to the nu-direction.
  CHECK(((diag.psi_breve - chain.P * diag.psi_breve) - diag.psi)
            .cwiseAbs()
            .maxCoeff() <= 1e-10);
}
