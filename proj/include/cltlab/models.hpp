#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "cltlab/types.hpp"

// Model generators: canonical two-state chains, a birth-death family with
// weight V(x) = 1 + x^2, and iterative models X_n = A_n X_{n-1} + b_n with
// their contraction/moment condition
//   (*)  E[Gamma(Y)^3 (1 + c(Y)^{1/2})] < inf   and
//        E[c(Y_{n0}...Y_1)^{1/2} max(c,1)^3] < 1,
// where c(g) = ||A|| (exact Lipschitz constant of an affine map) and
// Gamma(g) = 1 + c(g) + ||b||.

namespace cltlab {

enum class NoiseKind { UniformSign, UniformInterval, TruncNormal };

struct NoiseLaw {
  NoiseKind kind = NoiseKind::UniformSign;
  // UniformInterval
  double lo = -1.0;
  double hi = 1.0;
  // TruncNormal: base N(mu, s^2) restricted to [mu - radius, mu + radius]
  double mu = 0.0;
  double s = 1.0;
  double radius = 3.0;

  static NoiseLaw uniform_sign();
  static NoiseLaw uniform_interval(double lo, double hi);
  static NoiseLaw trunc_normal(double mu, double s, double radius);

  double mean() const;
  double variance() const;
  double cdf(double x) const;
  bool discrete() const;
  std::vector<std::pair<double, double>> atoms() const;  // (value, prob)
  double sample(std::mt19937_64& rng) const;
};

struct AffineMap {
  Matrix A;
  Vector b;
};

double lipschitz_constant(const AffineMap& g);  // operator 2-norm of A
double gamma_factor(const AffineMap& g);        // 1 + c(g) + ||b||

struct IterativeModel {
  int dim = 1;
  int n0 = 1;  // iteration count in condition (*)
  Vector x0;   // base point (origin)
  std::function<AffineMap(std::mt19937_64&)> sample_map;
};

struct Ar1Scalar {
  double a = 0.5;
  NoiseLaw noise;
  IterativeModel model() const;
};

struct Ar1Vector {
  Matrix A;
  NoiseLaw noise;  // iid per coordinate
  IterativeModel model() const;
};

// [[1-a, a], [b, 1-b]], nu = (b, a) / (a + b).
FiniteChain make_two_state(double a, double b);

// Birth-death chain on {0..grid_size-1} with inward drift: right rate
// 0.4 * drift_param, left rate 0.4, self loops elsewhere. Carries labels x
// and V(x) = 1 + x^2; detailed balance gives nu(x) proportional to
// drift_param^x. Requires 0 < drift_param <= 1.
FiniteChain make_v_ergodic_example(int grid_size, double drift_param);

// max_x |xi(x)|^3 / V(x): the domination constant of the third-moment
// hypothesis.
double dominance_constant(const FiniteChain& chain_with_V,
                          const Observable& xi);

// Deterministic path X_0 = x_init, X_k = A_k X_{k-1} + b_k under the seed.
std::vector<Vector> simulate_iterative(const IterativeModel& model,
                                       const Vector& x_init, int n,
                                       std::uint64_t seed);

struct ConditionStar {
  double moment1 = 0.0;
  double moment2 = 0.0;
  double stderr2 = 0.0;
  bool pass = false;
  bool diverging = false;
};

// Monte Carlo estimates of the two integrals of (*); pass requires
// moment2 + 2 * stderr2 < 1 and no divergence flag (estimates growing
// across doubling sample sizes).
ConditionStar check_condition_star(const IterativeModel& model, int mc_samples,
                                   std::uint64_t seed);

struct DiscretizedModel {
  Vector grid;
  FiniteChain chain;  // labels = grid, V(x) = 1 + x^2
  double truncation_radius = 0.0;
};

// Projects the scalar AR(1) kernel onto grid_size points spanning
// [-radius, radius]; outside mass is folded into the boundary cells. Fails
// with BadRadius when >= 1e-3 of the simulated stationary mass falls outside
// the radius, and with AuditFailed when the projected chain has no spectral
// gap.
DiscretizedModel discretize_ar1(const Ar1Scalar& model, int grid_size,
                                double radius);

}  // namespace cltlab
