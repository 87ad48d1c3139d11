#include "cltlab/chain.hpp"

#include <cmath>
#include <numeric>

#include "cltlab/eigs.hpp"

namespace cltlab {

FiniteChain validate_chain(const Matrix& P) {
  return validate_chain(P, std::nullopt, std::nullopt);
}

FiniteChain validate_chain(const Matrix& P, std::optional<Matrix> labels,
                           std::optional<Vector> V) {
  const int n = static_cast<int>(P.rows());
  if (n == 0 || P.cols() != n)
    throw Error(ErrorCode::DimensionMismatch, "transition matrix not square");
  Matrix M = P;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      if (M(i, j) < 0.0)
        throw Error(ErrorCode::NegativeEntry,
                    "P(" + std::to_string(i) + "," + std::to_string(j) +
                        ") < 0");
    const double row_sum = M.row(i).sum();
    if (std::abs(row_sum - 1.0) > 1e-12)
      throw Error(ErrorCode::RowSumInvalid,
                  "row " + std::to_string(i) + " sums to " +
                      std::to_string(row_sum));
    M.row(i) /= row_sum;
  }
  if (labels && labels->rows() != n)
    throw Error(ErrorCode::DimensionMismatch, "labels row count != n_states");
  if (V) {
    if (V->size() != n)
      throw Error(ErrorCode::DimensionMismatch, "V size != n_states");
    for (int i = 0; i < n; ++i)
      if ((*V)[i] < 1.0)
        throw Error(ErrorCode::ValidationError, "V must be >= 1 everywhere");
  }
  return FiniteChain{std::move(M), std::move(labels), std::move(V)};
}

bool is_irreducible(const FiniteChain& chain) {
  const int n = chain.n_states();
  // Boolean reachability closure.
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) reach[i][j] = chain.P(i, j) > 0.0;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) {
      if (!reach[i][k]) continue;
      for (int j = 0; j < n; ++j)
        if (reach[k][j]) reach[i][j] = true;
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && (!reach[i][j] || !reach[j][i])) return false;
  return true;
}

bool is_aperiodic(const FiniteChain& chain) {
  const int n = chain.n_states();
  std::vector<std::vector<bool>> B(n, std::vector<bool>(n, false));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B[i][j] = chain.P(i, j) > 0.0;
  std::vector<std::vector<bool>> power = B;
  int g = 0;
  for (int len = 1; len <= 2 * n; ++len) {
    if (len > 1) {
      std::vector<std::vector<bool>> next(n, std::vector<bool>(n, false));
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
          if (!power[i][k]) continue;
          for (int j = 0; j < n; ++j)
            if (B[k][j]) next[i][j] = true;
        }
      power = std::move(next);
    }
    if (power[0][0]) {
      g = std::gcd(g, len);
      if (g == 1) return true;
    }
  }
  return false;
}

namespace {

// Gaussian elimination with partial pivoting on the (n+1) x (n+1) augmented
// system [(P^T - I); 1^T | e_n]. The balance system has rank n - 1, the
// normalization row makes it rank n; elimination leaves one consistent zero
// row.
Vector solve_balance_system(const Matrix& P) {
  const int n = static_cast<int>(P.rows());
  Matrix A(n + 1, n + 1);
  A.setZero();
  A.block(0, 0, n, n) = P.transpose() - Matrix::Identity(n, n);
  A.row(n).head(n).setOnes();
  A(n, n) = 1.0;  // right-hand side column: b = e_n

  int row = 0;
  for (int col = 0; col < n; ++col) {
    int pivot = row;
    double best = std::abs(A(row, col));
    for (int r = row + 1; r <= n; ++r) {
      if (std::abs(A(r, col)) > best) {
        best = std::abs(A(r, col));
        pivot = r;
      }
    }
    if (best < 1e-300)
      throw Error(ErrorCode::NoConvergence, "balance system is singular");
    if (pivot != row) A.row(pivot).swap(A.row(row));
    for (int r = row + 1; r <= n; ++r) {
      const double factor = A(r, col) / A(row, col);
      if (factor != 0.0) A.row(r) -= factor * A.row(row);
    }
    ++row;
  }
  Vector x(n);
  for (int col = n - 1; col >= 0; --col) {
    double acc = A(col, n);
    for (int j = col + 1; j < n; ++j) acc -= A(col, j) * x[j];
    x[col] = acc / A(col, col);
  }
  return x;
}

}  // namespace

Distribution stationary_distribution(const FiniteChain& chain) {
  const int n = chain.n_states();
  if (!is_irreducible(chain))
    throw Error(ErrorCode::Reducible, "chain is not irreducible");

  Vector nu = solve_balance_system(chain.P);
  for (int i = 0; i < n; ++i) {
    if (nu[i] < -1e-10)
      throw Error(ErrorCode::NoConvergence, "negative stationary weight");
    nu[i] = std::max(nu[i], 0.0);
  }
  nu /= nu.sum();

  const double residual =
      (chain.P.transpose() * nu - nu).cwiseAbs().maxCoeff();
  if (residual > 1e-12)
    throw Error(ErrorCode::NoConvergence,
                "stationary residual " + std::to_string(residual));

  // Cross-check with damped power iteration mu <- mu (I + P)/2, which
  // converges for every irreducible chain (periodic included).
  Vector mu = Vector::Constant(n, 1.0 / n);
  bool converged = false;
  for (int k = 0; k < 100000; ++k) {
    Vector next = 0.5 * (mu + chain.P.transpose() * mu);
    next /= next.sum();
    const double diff = (next - mu).cwiseAbs().maxCoeff();
    mu = next;
    if (diff <= 1e-14) {
      converged = true;
      break;
    }
  }
  if (converged && (mu - nu).cwiseAbs().maxCoeff() > 1e-10)
    throw Error(ErrorCode::NoConvergence,
                "direct solve and power iteration disagree");

  return Distribution{std::move(nu)};
}

Vector apply_Q(const FiniteChain& chain, const Vector& f) {
  if (f.size() != chain.n_states())
    throw Error(ErrorCode::DimensionMismatch, "apply_Q: f size != n_states");
  return chain.P * f;
}

CVector apply_Q(const FiniteChain& chain, const CVector& f) {
  if (f.size() != chain.n_states())
    throw Error(ErrorCode::DimensionMismatch, "apply_Q: f size != n_states");
  return chain.P * f;
}

namespace {

const Vector& weight_vector(const FiniteChain& chain, NormKind kind,
                            Vector& ones_storage) {
  if (kind == NormKind::VWeighted) {
    if (!chain.V)
      throw Error(ErrorCode::ValidationError,
                  "V-weighted norm requested on a chain without V");
    return *chain.V;
  }
  ones_storage = Vector::Ones(chain.n_states());
  return ones_storage;
}

}  // namespace

double observable_norm(const FiniteChain& chain, NormKind kind,
                       const Vector& f) {
  Vector ones;
  const Vector& W = weight_vector(chain, kind, ones);
  return (f.cwiseAbs().array() / W.array()).maxCoeff();
}

double observable_norm(const FiniteChain& chain, NormKind kind,
                       const CVector& f) {
  Vector ones;
  const Vector& W = weight_vector(chain, kind, ones);
  return (f.cwiseAbs().array() / W.array()).maxCoeff();
}

ErgodicityProfile ergodicity_profile(const FiniteChain& chain, NormKind kind,
                                     int n_max) {
  const int n = chain.n_states();
  if (n_max < 1)
    throw Error(ErrorCode::ValidationError, "n_max must be >= 1");
  const Distribution nu = stationary_distribution(chain);

  const CMatrix deflated =
      chain.P.cast<Complex>() -
      CVector::Ones(n) * nu.weights.transpose().cast<Complex>();
  const double kappa0 = spectral_radius_estimate(deflated);
  if (kappa0 > 1.0 - 1e-9)
    throw Error(ErrorCode::NoSpectralGap,
                "sub-dominant modulus " + std::to_string(kappa0));

  Vector ones;
  const Vector& W = weight_vector(chain, kind, ones);

  // Probe basis: coordinate indicators, rescaled to unit norm.
  double C = 0.0;
  for (int k = 0; k < n; ++k) {
    Vector f = Vector::Zero(n);
    f[k] = W[k];  // ||f|| = 1 in the weighted norm
    const double nu_f = bdot(nu.weights, f);
    Vector g = f;
    double kappa_pow = 1.0;
    for (int step = 1; step <= n_max; ++step) {
      g = chain.P * g;
      kappa_pow *= kappa0;
      const Vector centered = (g.array() - nu_f).matrix();
      const double num = observable_norm(chain, kind, centered);
      if (kappa_pow < 1e-250) {
        if (num > 1e-12)
          throw Error(ErrorCode::NoConvergence,
                      "decay slower than kappa0^n (nilpotent remainder)");
        continue;
      }
      C = std::max(C, num / kappa_pow);
    }
  }
  return ErgodicityProfile{kappa0, C, kind, n, n_max};
}

Observable center_observable(const FiniteChain& chain, const Observable& xi) {
  if (xi.values.size() != chain.n_states())
    throw Error(ErrorCode::DimensionMismatch, "observable size != n_states");
  const Distribution nu = stationary_distribution(chain);
  const double mean = bdot(nu.weights, xi.values);
  Observable out;
  out.values = xi.values.array() - mean;
  out.centered = true;
  return out;
}

}  // namespace cltlab
