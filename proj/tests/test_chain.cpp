#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "cltlab/chain.hpp"
#include "cltlab/chain_io.hpp"
#include "test_support.hpp"

using namespace cltlab;
using testsupport::random_stochastic;

namespace {

Matrix asym_two_state() {
  Matrix P(2, 2);
  P << 0.75, 0.25, 0.5, 0.5;
  return P;
}

Matrix sym_two_state(double p) {
  Matrix P(2, 2);
  P << 1.0 - p, p, p, 1.0 - p;
  return P;
}

}  // namespace

TEST_CASE("validate_chain accepts stochastic matrices") {
  CHECK_NOTHROW(validate_chain(Matrix::Identity(2, 2)));
  CHECK_NOTHROW(validate_chain(asym_two_state()));
}

TEST_CASE("validate_chain rejects bad rows") {
  Matrix bad(2, 2);
  bad << 0.6, 0.5, 0.5, 0.5;
  CHECK_THROWS_WITH_AS(validate_chain(bad), doctest::Contains("RowSumInvalid"),
                       Error);

  Matrix neg(2, 2);
  neg << 1.2, -0.2, 0.5, 0.5;
  CHECK_THROWS_WITH_AS(validate_chain(neg),
                       doctest::Contains("NegativeEntry"), Error);
}

TEST_CASE("validate_chain renormalizes tiny drift only") {
  Matrix P = asym_two_state();
  P(0, 0) += 5e-13;  // inside tolerance
  const FiniteChain chain = validate_chain(P);
  CHECK(chain.P.row(0).sum() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("stationary distribution of the asymmetric two-state chain") {
  const FiniteChain chain = validate_chain(asym_two_state());
  const Distribution nu = stationary_distribution(chain);
  // Balance equations by hand: nu0 * 0.25 = nu1 * 0.5.
  CHECK(nu.weights[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(nu.weights[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("stationary distribution: symmetric and periodic inputs") {
  const Distribution nu =
      stationary_distribution(validate_chain(sym_two_state(0.25)));
  CHECK(nu.weights[0] == doctest::Approx(0.5).epsilon(1e-13));

  CHECK_THROWS_WITH_AS(
      stationary_distribution(validate_chain(Matrix::Identity(2, 2))),
      doctest::Contains("Reducible"), Error);

  // Period-2 chains are irreducible and keep their unique invariant law.
  Matrix flip(2, 2);
  flip << 0.0, 1.0, 1.0, 0.0;
  const Distribution nu_flip =
      stationary_distribution(validate_chain(flip));
  CHECK(nu_flip.weights[0] == doctest::Approx(0.5).epsilon(1e-13));
}

TEST_CASE("stationary distribution matches the dense eigensolver oracle") {
  for (std::uint64_t seed : {11ull, 22ull, 33ull, 44ull}) {
    const int n = 3 + static_cast<int>(seed % 5);
    const FiniteChain chain = validate_chain(random_stochastic(n, seed));
    const Distribution nu = stationary_distribution(chain);
    CHECK((chain.P.transpose() * nu.weights - nu.weights)
              .cwiseAbs()
              .maxCoeff() <= 1e-12);

    Eigen::EigenSolver<Matrix> es(chain.P.transpose());
    int best = 0;
    for (int i = 1; i < n; ++i)
      if (std::abs(es.eigenvalues()[i] - Complex(1.0, 0.0)) <
          std::abs(es.eigenvalues()[best] - Complex(1.0, 0.0)))
        best = i;
    Vector oracle = es.eigenvectors().col(best).real();
    oracle /= oracle.sum();
    CHECK((oracle - nu.weights).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("apply_Q basics") {
  const FiniteChain chain = validate_chain(asym_two_state());

  SUBCASE("stochasticity: Q1 = 1 exactly") {
    const Vector one = Vector::Ones(2);
    CHECK((apply_Q(chain, one) - one).cwiseAbs().maxCoeff() <= 1e-14);
  }
  SUBCASE("indicator reads the first column") {
    Vector e0(2);
    e0 << 1.0, 0.0;
    const Vector out = apply_Q(chain, e0);
    CHECK(out[0] == doctest::Approx(0.75));
    CHECK(out[1] == doctest::Approx(0.5));
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(apply_Q(chain, Vector(Vector::Ones(3))), Error);
  }
}

TEST_CASE("apply_Q eigenvector identity on the symmetric chain") {
  const double p = 0.25;
  const FiniteChain chain = validate_chain(sym_two_state(p));
  Vector f(2);
  f << 1.0, -1.0;
  const Vector out = apply_Q(chain, f);
  CHECK((out - (1.0 - 2.0 * p) * f).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("apply_Q preserves positivity") {
  const FiniteChain chain =
      validate_chain(random_stochastic(5, 99));
  std::uint64_t state = 7;
  Vector f(5);
  for (int i = 0; i < 5; ++i) f[i] = testsupport::uniform01(state);
  CHECK(apply_Q(chain, f).minCoeff() >= 0.0);
}

TEST_CASE("ergodicity profile: sub-dominant modulus") {
  SUBCASE("symmetric two-state p = 0.25 has kappa0 = 0.5") {
    // Eigenvalues are {1, 1 - 2p}.
    const ErgodicityProfile profile =
        ergodicity_profile(validate_chain(sym_two_state(0.25)),
                           NormKind::Sup, 30);
    CHECK(profile.kappa0 == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(profile.C >= 0.0);
  }
  SUBCASE("rank-one chain has kappa0 = 0") {
    Matrix P(2, 2);
    P << 2.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0;
    const ErgodicityProfile profile =
        ergodicity_profile(validate_chain(P), NormKind::Sup, 10);
    CHECK(profile.kappa0 <= 1e-12);
  }
  SUBCASE("period-2 chain has no spectral gap") {
    Matrix flip(2, 2);
    flip << 0.0, 1.0, 1.0, 0.0;
    CHECK_THROWS_WITH_AS(
        ergodicity_profile(validate_chain(flip), NormKind::Sup, 10),
        doctest::Contains("NoSpectralGap"), Error);
  }
}

TEST_CASE("ergodicity profile satisfies its own decay inequality") {
  const FiniteChain chain = validate_chain(random_stochastic(6, 321));
  const Distribution nu = stationary_distribution(chain);
  const ErgodicityProfile profile =
      ergodicity_profile(chain, NormKind::Sup, 25);

  // kappa0 against the dense oracle.
  Eigen::EigenSolver<Matrix> es(chain.P);
  std::vector<double> mods;
  for (int i = 0; i < 6; ++i) mods.push_back(std::abs(es.eigenvalues()[i]));
  std::sort(mods.begin(), mods.end());
  CHECK(profile.kappa0 == doctest::Approx(mods[4]).epsilon(1e-8));

  for (int k = 0; k < 6; ++k) {
    Vector f = Vector::Zero(6);
    f[k] = 1.0;
    Vector g = f;
    for (int step = 1; step <= 25; ++step) {
      g = chain.P * g;
      const double gap =
          (g.array() - nu.weights[k]).abs().maxCoeff();
      CHECK(gap <= profile.C * std::pow(profile.kappa0, step) + 1e-12);
    }
  }
}

TEST_CASE("sub-dominant modulus matches the dense oracle beyond block size") {
  // 30 states exceeds the internal Ritz block, so the estimate must come
  // from genuine subspace iteration.
  for (std::uint64_t seed : {60001ull, 60002ull}) {
    const FiniteChain chain = validate_chain(random_stochastic(30, seed));
    const ErgodicityProfile profile =
        ergodicity_profile(chain, NormKind::Sup, 10);
    Eigen::EigenSolver<Matrix> es(chain.P);
    std::vector<double> mods;
    for (int i = 0; i < 30; ++i) mods.push_back(std::abs(es.eigenvalues()[i]));
    std::sort(mods.rbegin(), mods.rend());
    CHECK(profile.kappa0 == doctest::Approx(mods[1]).epsilon(1e-8));
  }
}

TEST_CASE("V-weighted profile needs V") {
  const FiniteChain chain = validate_chain(sym_two_state(0.25));
  CHECK_THROWS_AS(ergodicity_profile(chain, NormKind::VWeighted, 10), Error);
}

TEST_CASE("center_observable") {
  const FiniteChain chain = validate_chain(asym_two_state());

  SUBCASE("constants center to zero") {
    const Observable xi{Vector::Ones(2), false};
    const Observable centered = center_observable(chain, xi);
    CHECK(centered.values.cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(centered.centered);
  }
  SUBCASE("indicator of state 0 centers to (1/3, -2/3)") {
    Vector v(2);
    v << 1.0, 0.0;
    const Observable centered = center_observable(chain, {v, false});
    CHECK(centered.values[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(centered.values[1] == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("already centered stays put") {
    Vector v(2);
    v << 1.0, -2.0;  // nu = (2/3, 1/3): mean 0
    const Observable centered = center_observable(chain, {v, false});
    CHECK((centered.values - v).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("irreducibility and aperiodicity helpers") {
  CHECK_FALSE(is_irreducible(validate_chain(Matrix::Identity(2, 2))));
  Matrix flip(2, 2);
  flip << 0.0, 1.0, 1.0, 0.0;
  CHECK(is_irreducible(validate_chain(flip)));
  CHECK_FALSE(is_aperiodic(validate_chain(flip)));
  CHECK(is_aperiodic(validate_chain(asym_two_state())));
}

TEST_CASE("chain text round trip") {
  const std::string text =
      "# two-state example\n"
      "2\n"
      "0.75 0.25\n"
      "0.5 0.5\n"
      "labels:\n"
      "-1.0 1.0\n"
      "V:\n"
      "1.0 2.0\n";
  const FiniteChain chain = parse_chain_text(text);
  CHECK(chain.n_states() == 2);
  CHECK(chain.P(0, 1) == doctest::Approx(0.25));
  REQUIRE(chain.labels.has_value());
  CHECK((*chain.labels)(0, 0) == doctest::Approx(-1.0));
  REQUIRE(chain.V.has_value());
  CHECK((*chain.V)[1] == doctest::Approx(2.0));

  const FiniteChain again = parse_chain_text(format_chain_text(chain));
  CHECK((again.P - chain.P).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("chain text errors") {
  CHECK_THROWS_WITH_AS(parse_chain_text("2\n0.5 0.5\n"),
                       doctest::Contains("ParseError"), Error);
  CHECK_THROWS_WITH_AS(parse_chain_text("2\n0.5 0.5\n0.5 0.5\nW:\n1 1\n"),
                       doctest::Contains("ParseError"), Error);
}
