#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cltlab/chain.hpp"
#include "cltlab/models.hpp"
#include "cltlab/normal.hpp"
#include "cltlab/poisson.hpp"

using namespace cltlab;

TEST_CASE("make_two_state") {
  SUBCASE("iid carrier at a = b = 0.5") {
    const FiniteChain chain = make_two_state(0.5, 0.5);
    CHECK(chain.P(0, 0) == doctest::Approx(0.5));
    const Distribution nu = stationary_distribution(chain);
    CHECK(nu.weights[0] == doctest::Approx(0.5));
  }
  SUBCASE("symmetric chain kappa0 = 1 - 2p") {
    const FiniteChain chain = make_two_state(0.25, 0.25);
    const ErgodicityProfile profile =
        ergodicity_profile(chain, NormKind::Sup, 20);
    CHECK(profile.kappa0 == doctest::Approx(0.5).epsilon(1e-9));
  }
  SUBCASE("balance equations for the asymmetric chain") {
    const Distribution nu = stationary_distribution(make_two_state(0.25, 0.5));
    CHECK(nu.weights[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(nu.weights[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("out of range") {
    CHECK_THROWS_WITH_AS(make_two_state(0.0, 0.5),
                         doctest::Contains("OutOfRange"), Error);
    CHECK_THROWS_AS(make_two_state(0.5, 1.5), Error);
  }
}

TEST_CASE("make_v_ergodic_example") {
  SUBCASE("3-state symmetric drift: detailed balance gives uniform nu") {
    const FiniteChain chain = make_v_ergodic_example(3, 1.0);
    Matrix expected(3, 3);
    expected << 0.6, 0.4, 0.0, 0.4, 0.2, 0.4, 0.0, 0.4, 0.6;
    CHECK((chain.P - expected).cwiseAbs().maxCoeff() <= 1e-14);
    const Distribution nu = stationary_distribution(chain);
    for (int i = 0; i < 3; ++i)
      CHECK(nu.weights[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("detailed balance product formula nu(x) ~ drift^x") {
    const double drift = 0.6;
    const FiniteChain chain = make_v_ergodic_example(6, drift);
    const Distribution nu = stationary_distribution(chain);
    for (int x = 0; x + 1 < 6; ++x)
      CHECK(nu.weights[x + 1] / nu.weights[x] ==
            doctest::Approx(drift).epsilon(1e-10));
  }
  SUBCASE("V >= 1 everywhere and the V-norm profile passes") {
    const FiniteChain chain = make_v_ergodic_example(9, 0.6);
    REQUIRE(chain.V.has_value());
    CHECK(chain.V->minCoeff() >= 1.0);
    CHECK_NOTHROW(ergodicity_profile(chain, NormKind::VWeighted, 20));
  }
  SUBCASE("domination constant for |xi|^3 <= c V") {
    const FiniteChain chain = make_v_ergodic_example(9, 0.6);
    // xi(x) = x^(2/3): |xi|^3 = x^2 <= V = 1 + x^2, so c <= 1.
    Vector xi(9);
    for (int x = 0; x < 9; ++x)
      xi[x] = std::pow(static_cast<double>(x), 2.0 / 3.0);
    const double c = dominance_constant(chain, {xi, false});
    CHECK(c <= 1.0);
    CHECK(c == doctest::Approx(64.0 / 65.0).epsilon(1e-12));  // x = 8 max
  }
}

TEST_CASE("simulate_iterative") {
  SUBCASE("A = 0 reproduces the iid noise") {
    Ar1Scalar model{0.0, NoiseLaw::uniform_sign()};
    const auto path =
        simulate_iterative(model.model(), Vector::Zero(1), 100, 7);
    REQUIRE(path.size() == 101);
    for (std::size_t k = 1; k < path.size(); ++k)
      CHECK(std::abs(std::abs(path[k][0]) - 1.0) <= 1e-15);
  }
  SUBCASE("pure contraction decays geometrically") {
    IterativeModel contraction;
    contraction.dim = 1;
    contraction.n0 = 1;
    contraction.x0 = Vector::Zero(1);
    contraction.sample_map = [](std::mt19937_64&) {
      return AffineMap{Matrix::Constant(1, 1, 0.5), Vector::Zero(1)};
    };
    const auto path =
        simulate_iterative(contraction, Vector::Constant(1, 8.0), 10, 1);
    for (int k = 0; k <= 10; ++k)
      CHECK(path[k][0] == doctest::Approx(8.0 * std::pow(0.5, k)));
  }
  SUBCASE("bit reproducibility under a fixed seed") {
    Ar1Scalar model{0.5, NoiseLaw::uniform_interval(-1.0, 1.0)};
    const auto a = simulate_iterative(model.model(), Vector::Zero(1), 50, 99);
    const auto b = simulate_iterative(model.model(), Vector::Zero(1), 50, 99);
    for (int k = 0; k <= 50; ++k) CHECK(a[k][0] == b[k][0]);
  }
  SUBCASE("stationary mean of AR(1) with symmetric noise is 0") {
    Ar1Scalar model{0.5, NoiseLaw::uniform_sign()};
    const auto path =
        simulate_iterative(model.model(), Vector::Zero(1), 1000000, 2024);
    double mean = 0.0;
    for (std::size_t k = 1; k < path.size(); ++k) mean += path[k][0];
    mean /= 1000000.0;
    // sigma^2 of the additive functional is Var_b / (1-a)^2 = 4, so the
    // standard error of the path mean is 2/sqrt(n).
    CHECK(std::abs(mean) <= 3.0 * 2.0 / 1000.0);
  }
  SUBCASE("lag-k autocorrelation of AR(1) decays like a^k") {
    Ar1Scalar model{0.5, NoiseLaw::uniform_sign()};
    const auto path =
        simulate_iterative(model.model(), Vector::Zero(1), 400000, 555);
    const int m = 400000;
    auto corr = [&](int lag) {
      double num = 0.0, den = 0.0;
      for (int k = 1; k + lag <= m; ++k) {
        num += path[k][0] * path[k + lag][0];
        den += path[k][0] * path[k][0];
      }
      return num / den;
    };
    for (int lag : {1, 2, 3})
      CHECK(corr(lag) ==
            doctest::Approx(std::pow(0.5, lag)).epsilon(0.05));
  }
}

TEST_CASE("condition (*) checker") {
  SUBCASE("deterministic contraction: moment2 = sqrt(0.5)") {
    IterativeModel model;
    model.dim = 1;
    model.n0 = 1;
    model.x0 = Vector::Zero(1);
    model.sample_map = [](std::mt19937_64& rng) {
      return AffineMap{Matrix::Constant(1, 1, 0.5),
                       Vector::Constant(1, (rng() & 1u) ? 0.5 : -0.5)};
    };
    const ConditionStar star = check_condition_star(model, 10000, 3);
    CHECK(star.moment2 == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(star.stderr2 <= 1e-12);
    CHECK(star.pass);
  }
  SUBCASE("identity maps sit on the boundary and fail") {
    IterativeModel model;
    model.dim = 1;
    model.n0 = 1;
    model.x0 = Vector::Zero(1);
    model.sample_map = [](std::mt19937_64& rng) {
      return AffineMap{Matrix::Constant(1, 1, 1.0),
                       Vector::Constant(1, (rng() & 1u) ? 1.0 : -1.0)};
    };
    const ConditionStar star = check_condition_star(model, 10000, 3);
    CHECK(star.moment2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(star.pass);
  }
  SUBCASE("heavy-tailed noise is flagged as diverging") {
    IterativeModel model;
    model.dim = 1;
    model.n0 = 1;
    model.x0 = Vector::Zero(1);
    model.sample_map = [](std::mt19937_64& rng) {
      // b Pareto with tail exponent 1.2: finite mean, infinite third moment.
      const double u = ((rng() >> 11) * 0x1.0p-53) + 1e-300;
      const double b = std::pow(u, -1.0 / 1.2);
      return AffineMap{Matrix::Constant(1, 1, 0.5),
                       Vector::Constant(1, b)};
    };
    const ConditionStar star = check_condition_star(model, 200000, 5);
    CHECK(star.diverging);
    CHECK_FALSE(star.pass);
  }
  SUBCASE("too few samples") {
    IterativeModel model = Ar1Scalar{0.5, NoiseLaw::uniform_sign()}.model();
    CHECK_THROWS_WITH_AS(check_condition_star(model, 100, 1),
                         doctest::Contains("InsufficientSamples"), Error);
  }
}

TEST_CASE("noise law moments") {
  CHECK(NoiseLaw::uniform_sign().variance() == doctest::Approx(1.0));
  CHECK(NoiseLaw::uniform_interval(-1.0, 1.0).variance() ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(NoiseLaw::uniform_interval(0.0, 2.0).mean() == doctest::Approx(1.0));
  // Truncated normal variance against a quadrature oracle.
  const NoiseLaw tn = NoiseLaw::trunc_normal(0.0, 1.0, 2.0);
  double quad = 0.0;
  const int steps = 20000;
  const double z = 2.0 * normal_cdf(2.0) - 1.0;
  for (int i = 0; i < steps; ++i) {
    const double x = -2.0 + 4.0 * (i + 0.5) / steps;
    quad += x * x * normal_pdf(x) / z * (4.0 / steps);
  }
  CHECK(tn.variance() == doctest::Approx(quad).epsilon(1e-6));
}

TEST_CASE("discretize_ar1") {
  SUBCASE("A = 0 gives identical rows") {
    const DiscretizedModel dm =
        discretize_ar1(Ar1Scalar{0.0, NoiseLaw::uniform_interval(-1.0, 1.0)},
                       41, 2.5);
    // Trimmed to the noise support; every remaining row is the same law.
    const int m = dm.chain.n_states();
    CHECK(m >= 10);
    for (int i = 1; i < m; ++i)
      CHECK((dm.chain.P.row(i) - dm.chain.P.row(0)).cwiseAbs().maxCoeff() <=
            1e-12);
  }
  SUBCASE("kappa0 tracks the AR coefficient") {
    const DiscretizedModel dm = discretize_ar1(
        Ar1Scalar{0.5, NoiseLaw::uniform_sign()}, 61, 3.0);
    const ErgodicityProfile profile =
        ergodicity_profile(dm.chain, NormKind::Sup, 20);
    CHECK(std::abs(profile.kappa0 - 0.5) <= 0.1);
  }
  SUBCASE("grid refinement moves sigma2 by less than 2 percent") {
    auto sigma2_for = [](int grid_size) {
      const DiscretizedModel dm = discretize_ar1(
          Ar1Scalar{0.5, NoiseLaw::uniform_sign()}, grid_size, 3.0);
      Observable xi{dm.chain.labels->col(0), false};
      return sigma_squared(dm.chain, center_observable(dm.chain, xi));
    };
    const double coarse = sigma2_for(61);
    const double fine = sigma2_for(121);
    CHECK(std::abs(fine - coarse) / fine <= 0.02);
    // Closed form for the linear model with unit-variance noise: 1/(1-a)^2.
    CHECK(fine == doctest::Approx(4.0).epsilon(0.05));
  }
  SUBCASE("radius too small for the stationary law") {
    CHECK_THROWS_WITH_AS(
        discretize_ar1(Ar1Scalar{0.5, NoiseLaw::uniform_sign()}, 41, 1.2),
        doctest::Contains("BadRadius"), Error);
  }
  SUBCASE("|A| >= 1 is rejected") {
    CHECK_THROWS_AS(
        discretize_ar1(Ar1Scalar{1.0, NoiseLaw::uniform_sign()}, 41, 3.0),
        Error);
  }
}
