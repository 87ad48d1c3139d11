#include "cltlab/models.hpp"

#include <Eigen/SVD>

#include <cmath>

#include "cltlab/chain.hpp"
#include "cltlab/normal.hpp"

namespace cltlab {

namespace {

// States of the unique closed communicating class (cells outside the
// stationary support are transient feeders and are dropped). Throws when the
// recurrent part splits into several closed classes.
std::vector<int> closed_class(const Matrix& P) {
  const int n = static_cast<int>(P.rows());
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (int i = 0; i < n; ++i) {
    reach[i][i] = true;
    for (int j = 0; j < n; ++j)
      if (P(i, j) > 0.0) reach[i][j] = true;
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) {
      if (!reach[i][k]) continue;
      for (int j = 0; j < n; ++j)
        if (reach[k][j]) reach[i][j] = true;
    }
  std::vector<int> recurrent;
  for (int i = 0; i < n; ++i) {
    bool closed = true;
    for (int j = 0; j < n; ++j)
      if (reach[i][j] && !reach[j][i]) closed = false;
    if (closed) recurrent.push_back(i);
  }
  if (recurrent.empty())
    throw Error(ErrorCode::BadRadius, "no recurrent cell in discretization");
  for (int i : recurrent)
    for (int j : recurrent)
      if (!reach[i][j])
        throw Error(ErrorCode::BadRadius,
                    "discretization splits into several closed classes");
  return recurrent;
}

double uniform01(std::mt19937_64& rng) {
  // 53-bit mantissa; keeps the stream identical across platforms.
  return (rng() >> 11) * 0x1.0p-53;
}

double box_muller(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(6.283185307179586 * u2);
}

}  // namespace

NoiseLaw NoiseLaw::uniform_sign() {
  NoiseLaw law;
  law.kind = NoiseKind::UniformSign;
  return law;
}

NoiseLaw NoiseLaw::uniform_interval(double lo, double hi) {
  if (!(lo < hi))
    throw Error(ErrorCode::ValidationError, "uniform interval needs lo < hi");
  NoiseLaw law;
  law.kind = NoiseKind::UniformInterval;
  law.lo = lo;
  law.hi = hi;
  return law;
}

NoiseLaw NoiseLaw::trunc_normal(double mu, double s, double radius) {
  if (!(s > 0.0) || !(radius > 0.0))
    throw Error(ErrorCode::ValidationError,
                "truncated normal needs s > 0 and radius > 0");
  NoiseLaw law;
  law.kind = NoiseKind::TruncNormal;
  law.mu = mu;
  law.s = s;
  law.radius = radius;
  return law;
}

double NoiseLaw::mean() const {
  switch (kind) {
    case NoiseKind::UniformSign: return 0.0;
    case NoiseKind::UniformInterval: return 0.5 * (lo + hi);
    case NoiseKind::TruncNormal: return mu;  // symmetric truncation
  }
  return 0.0;
}

double NoiseLaw::variance() const {
  switch (kind) {
    case NoiseKind::UniformSign: return 1.0;
    case NoiseKind::UniformInterval: return (hi - lo) * (hi - lo) / 12.0;
    case NoiseKind::TruncNormal: {
      const double alpha = radius / s;
      const double z = 2.0 * normal_cdf(alpha) - 1.0;
      return s * s * (1.0 - 2.0 * alpha * normal_pdf(alpha) / z);
    }
  }
  return 0.0;
}

double NoiseLaw::cdf(double x) const {
  switch (kind) {
    case NoiseKind::UniformSign:
      if (x < -1.0) return 0.0;
      if (x < 1.0) return 0.5;
      return 1.0;
    case NoiseKind::UniformInterval:
      if (x <= lo) return 0.0;
      if (x >= hi) return 1.0;
      return (x - lo) / (hi - lo);
    case NoiseKind::TruncNormal: {
      if (x <= mu - radius) return 0.0;
      if (x >= mu + radius) return 1.0;
      const double alpha = radius / s;
      const double z = 2.0 * normal_cdf(alpha) - 1.0;
      return (normal_cdf((x - mu) / s) - normal_cdf(-alpha)) / z;
    }
  }
  return 0.0;
}

bool NoiseLaw::discrete() const { return kind == NoiseKind::UniformSign; }

std::vector<std::pair<double, double>> NoiseLaw::atoms() const {
  if (kind != NoiseKind::UniformSign)
    throw Error(ErrorCode::ValidationError, "law has no atoms");
  return {{-1.0, 0.5}, {1.0, 0.5}};
}

double NoiseLaw::sample(std::mt19937_64& rng) const {
  switch (kind) {
    case NoiseKind::UniformSign: return (rng() & 1u) ? 1.0 : -1.0;
    case NoiseKind::UniformInterval: return lo + uniform01(rng) * (hi - lo);
    case NoiseKind::TruncNormal: {
      const double alpha = radius / s;
      for (;;) {
        const double z = box_muller(rng);
        if (std::abs(z) <= alpha) return mu + s * z;
      }
    }
  }
  return 0.0;
}

double lipschitz_constant(const AffineMap& g) {
  if (g.A.rows() == 1 && g.A.cols() == 1) return std::abs(g.A(0, 0));
  Eigen::JacobiSVD<Matrix> svd(g.A);
  return svd.singularValues()[0];
}

double gamma_factor(const AffineMap& g) {
  return 1.0 + lipschitz_constant(g) + g.b.norm();
}

IterativeModel Ar1Scalar::model() const {
  IterativeModel m;
  m.dim = 1;
  m.n0 = 1;
  m.x0 = Vector::Zero(1);
  const double coeff = a;
  const NoiseLaw law = noise;
  m.sample_map = [coeff, law](std::mt19937_64& rng) {
    AffineMap g;
    g.A = Matrix::Constant(1, 1, coeff);
    g.b = Vector::Constant(1, law.sample(rng));
    return g;
  };
  return m;
}

IterativeModel Ar1Vector::model() const {
  const int d = static_cast<int>(A.rows());
  if (A.cols() != d)
    throw Error(ErrorCode::DimensionMismatch, "AR(1) matrix not square");
  IterativeModel m;
  m.dim = d;
  m.n0 = 1;
  m.x0 = Vector::Zero(d);
  const Matrix coeff = A;
  const NoiseLaw law = noise;
  m.sample_map = [coeff, law, d](std::mt19937_64& rng) {
    AffineMap g;
    g.A = coeff;
    g.b = Vector(d);
    for (int i = 0; i < d; ++i) g.b[i] = law.sample(rng);
    return g;
  };
  return m;
}

FiniteChain make_two_state(double a, double b) {
  if (!(a > 0.0 && a <= 1.0 && b > 0.0 && b <= 1.0))
    throw Error(ErrorCode::OutOfRange,
                "two-state parameters must lie in (0, 1]");
  Matrix P(2, 2);
  P << 1.0 - a, a, b, 1.0 - b;
  return validate_chain(P);
}

FiniteChain make_v_ergodic_example(int grid_size, double drift_param) {
  if (grid_size < 3)
    throw Error(ErrorCode::ValidationError, "grid_size must be >= 3");
  if (!(drift_param > 0.0 && drift_param <= 1.0))
    throw Error(ErrorCode::OutOfRange, "drift_param must lie in (0, 1]");
  const int n = grid_size;
  const double left = 0.4;
  const double right = 0.4 * drift_param;

  Matrix P = Matrix::Zero(n, n);
  P(0, 1) = right;
  P(0, 0) = 1.0 - right;
  for (int x = 1; x + 1 < n; ++x) {
    P(x, x - 1) = left;
    P(x, x + 1) = right;
    P(x, x) = 1.0 - left - right;
  }
  P(n - 1, n - 2) = left;
  P(n - 1, n - 1) = 1.0 - left;

  Matrix labels(n, 1);
  Vector V(n);
  for (int x = 0; x < n; ++x) {
    labels(x, 0) = static_cast<double>(x);
    V[x] = 1.0 + static_cast<double>(x) * x;
  }
  FiniteChain chain = validate_chain(P, labels, V);
  try {
    ergodicity_profile(chain, NormKind::VWeighted, 32);
  } catch (const Error& e) {
    throw Error(ErrorCode::AuditFailed,
                std::string("birth-death chain failed its V-norm profile: ") +
                    e.what());
  }
  return chain;
}

double dominance_constant(const FiniteChain& chain_with_V,
                          const Observable& xi) {
  if (!chain_with_V.V)
    throw Error(ErrorCode::ValidationError, "chain has no weight V");
  if (xi.values.size() != chain_with_V.n_states())
    throw Error(ErrorCode::DimensionMismatch, "observable size != n_states");
  return (xi.values.cwiseAbs().array().pow(3.0) /
          chain_with_V.V->array())
      .maxCoeff();
}

std::vector<Vector> simulate_iterative(const IterativeModel& model,
                                       const Vector& x_init, int n,
                                       std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::ValidationError, "n must be >= 1");
  if (x_init.size() != model.dim)
    throw Error(ErrorCode::DimensionMismatch, "x_init size != model dim");
  std::mt19937_64 rng(seed);
  std::vector<Vector> path;
  path.reserve(n + 1);
  path.push_back(x_init);
  Vector x = x_init;
  for (int k = 0; k < n; ++k) {
    const AffineMap g = model.sample_map(rng);
    x = g.A * x + g.b;
    path.push_back(x);
  }
  return path;
}

ConditionStar check_condition_star(const IterativeModel& model, int mc_samples,
                                   std::uint64_t seed) {
  if (mc_samples < 10000)
    throw Error(ErrorCode::InsufficientSamples,
                "condition (*) needs at least 1e4 samples");
  std::mt19937_64 rng(seed);

  double sum1 = 0.0;
  double sum2 = 0.0, sum2_sq = 0.0;
  double max1 = 0.0;
  // Quarter/half checkpoints detect estimates that grow with the sample
  // size (infinite moments); the max-share test catches the very heavy
  // tails where a single draw dominates the sum.
  double sum1_q = 0.0, sum1_h = 0.0;
  for (int i = 0; i < mc_samples; ++i) {
    const AffineMap g = model.sample_map(rng);
    const double c = lipschitz_constant(g);
    const double gamma = gamma_factor(g);
    const double term1 = gamma * gamma * gamma * (1.0 + std::sqrt(c));
    sum1 += term1;
    max1 = std::max(max1, term1);
    if (i < mc_samples / 4) sum1_q += term1;
    if (i < mc_samples / 2) sum1_h += term1;

    // Product of n0 independent maps; c of the composition is the norm of
    // the matrix product.
    Matrix prod = g.A;
    for (int j = 1; j < model.n0; ++j) prod = model.sample_map(rng).A * prod;
    const double c_prod = lipschitz_constant(AffineMap{prod, Vector()});
    const double m = std::max(c_prod, 1.0);
    const double term2 = std::sqrt(c_prod) * m * m * m;
    sum2 += term2;
    sum2_sq += term2 * term2;
  }

  ConditionStar out;
  out.moment1 = sum1 / mc_samples;
  out.moment2 = sum2 / mc_samples;
  const double var2 =
      std::max(sum2_sq / mc_samples - out.moment2 * out.moment2, 0.0);
  out.stderr2 = std::sqrt(var2 / mc_samples);

  const double est_q = sum1_q / std::max(mc_samples / 4, 1);
  const double est_h = sum1_h / std::max(mc_samples / 2, 1);
  const bool growing = (est_h > 1.25 * est_q) && (out.moment1 > 1.25 * est_h);
  const bool max_dominated = max1 >= 0.05 * sum1;
  out.diverging = growing || max_dominated;

  out.pass = !out.diverging && (out.moment2 + 2.0 * out.stderr2 < 1.0);
  return out;
}

DiscretizedModel discretize_ar1(const Ar1Scalar& model, int grid_size,
                                double radius) {
  if (grid_size < 3)
    throw Error(ErrorCode::ValidationError, "grid_size must be >= 3");
  if (!(radius > 0.0))
    throw Error(ErrorCode::ValidationError, "radius must be > 0");
  if (!(std::abs(model.a) < 1.0))
    throw Error(ErrorCode::OutOfRange, "|A| must be < 1");

  const int n = grid_size;
  Vector grid(n);
  const double step = 2.0 * radius / (n - 1);
  for (int i = 0; i < n; ++i) grid[i] = -radius + step * i;

  // Cell i covers [grid_i - step/2, grid_i + step/2); boundary cells absorb
  // the folded outside mass.
  Matrix P = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double center = model.a * grid[i];
    if (model.noise.discrete()) {
      // Split each atom between its bracketing cells (mean-preserving,
      // second-order in the cell width).
      for (auto [value, prob] : model.noise.atoms()) {
        const double pos = (center + value + radius) / step;
        const int j0 = static_cast<int>(std::floor(pos));
        const double w = pos - j0;
        P(i, std::clamp(j0, 0, n - 1)) += prob * (1.0 - w);
        P(i, std::clamp(j0 + 1, 0, n - 1)) += prob * w;
      }
    } else {
      for (int j = 0; j < n; ++j) {
        const double lo =
            (j == 0) ? -std::numeric_limits<double>::infinity()
                     : grid[j] - 0.5 * step;
        const double hi = (j == n - 1)
                              ? std::numeric_limits<double>::infinity()
                              : grid[j] + 0.5 * step;
        const double mass_lo =
            std::isinf(lo) ? 0.0 : model.noise.cdf(lo - center);
        const double mass_hi =
            std::isinf(hi) ? 1.0 : model.noise.cdf(hi - center);
        P(i, j) = std::max(mass_hi - mass_lo, 0.0);
      }
    }
    const double row_sum = P.row(i).sum();
    if (row_sum <= 0.0)
      throw Error(ErrorCode::BadRadius, "empty row in discretization");
    P.row(i) /= row_sum;
  }

  // Keep only the closed communicating class: with compactly supported
  // noise, cells outside the stationary support only feed inward and would
  // make the chain reducible.
  const std::vector<int> keep = closed_class(P);
  const int kept = static_cast<int>(keep.size());
  if (kept < 2)
    throw Error(ErrorCode::BadRadius,
                "discretization collapses to a single cell");
  Matrix P_kept(kept, kept);
  Vector grid_kept(kept);
  for (int i = 0; i < kept; ++i) {
    grid_kept[i] = grid[keep[i]];
    for (int j = 0; j < kept; ++j) P_kept(i, j) = P(keep[i], keep[j]);
    const double row_sum = P_kept.row(i).sum();
    if (row_sum < 1.0 - 1e-9)
      throw Error(ErrorCode::BadRadius, "closed class is not closed");
    P_kept.row(i) /= row_sum;
  }
  grid = grid_kept;

  Matrix labels(kept, 1);
  Vector V(kept);
  for (int i = 0; i < kept; ++i) {
    labels(i, 0) = grid[i];
    V[i] = 1.0 + grid[i] * grid[i];
  }
  FiniteChain chain = validate_chain(P_kept, labels, V);

  // Stationary mass outside the radius, estimated by simulation.
  {
    std::mt19937_64 rng(0xD15C0DEULL);
    double x = 0.0;
    int outside = 0;
    const int burn = 1000, steps = 100000;
    for (int k = 0; k < burn; ++k)
      x = model.a * x + model.noise.sample(rng);
    for (int k = 0; k < steps; ++k) {
      x = model.a * x + model.noise.sample(rng);
      if (std::abs(x) > radius) ++outside;
    }
    if (static_cast<double>(outside) / steps >= 1e-3)
      throw Error(ErrorCode::BadRadius,
                  "stationary mass outside radius: " +
                      std::to_string(static_cast<double>(outside) / steps));
  }

  try {
    ergodicity_profile(chain, NormKind::Sup, 32);
  } catch (const Error& e) {
    throw Error(ErrorCode::AuditFailed,
                std::string("discretized chain failed its profile: ") +
                    e.what());
  }
  return DiscretizedModel{std::move(grid), std::move(chain), radius};
}

}  // namespace cltlab
