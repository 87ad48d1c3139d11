#include "cltlab/fourier.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <random>

#include "cltlab/chain.hpp"
#include "cltlab/eigs.hpp"
#include "cltlab/poisson.hpp"

namespace cltlab {

namespace {

constexpr double kGapTolerance = 1e-6;
constexpr double kTwoPi = 6.283185307179586476925286766559;

// Resolvent (z - M)^{-1} with near-singularity detection: the resolvent norm
// exceeds 1/dist(z, spectrum), so a huge norm flags a quadrature node on top
// of an eigenvalue.
CMatrix resolvent(const CMatrix& M, Complex z) {
  const int n = static_cast<int>(M.rows());
  const CMatrix A = z * CMatrix::Identity(n, n) - M;
  Eigen::PartialPivLU<CMatrix> lu(A);
  const CMatrix R = lu.solve(CMatrix::Identity(n, n));
  const double rnorm = R.cwiseAbs().maxCoeff();
  if (!std::isfinite(rnorm) || rnorm > 1e8)
    throw Error(ErrorCode::SingularResolvent,
                "quadrature node too close to the spectrum");
  const double check = (A * R - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff();
  if (!(check < 1e-6 * std::max(1.0, rnorm)))
    throw Error(ErrorCode::SingularResolvent, "resolvent solve lost accuracy");
  return R;
}

Vector nu_of(const FiniteChain& chain) {
  return stationary_distribution(chain).weights;
}

}  // namespace

FourierKernel build_kernel(const FiniteChain& chain, const Observable& xi,
                           double t) {
  if (xi.values.size() != chain.n_states())
    throw Error(ErrorCode::DimensionMismatch, "observable size != n_states");
  const int n = chain.n_states();
  CMatrix M = chain.P.cast<Complex>();
  for (int j = 0; j < n; ++j)
    M.col(j) *= std::exp(Complex(0.0, t * xi.values[j]));
  return FourierKernel{t, std::move(M)};
}

SpectralData spectral_decompose(const FiniteChain& chain, const Observable& xi,
                                double t) {
  const int n = chain.n_states();
  const CMatrix M = build_kernel(chain, xi, t).M;
  const Vector nu = nu_of(chain);

  // v(0) = 1 and phi(0) = nu; for |t| in the gap interval these remain good
  // starts for the dominant pair and its adjoint.
  const DominantTriple triple = dominant_triple(
      M, CVector::Ones(n), nu.cast<Complex>(), 1e-13, 100000);

  CVector v = triple.v;
  CVector phi = triple.phi;
  const Complex nu_v = bdot(nu, v);
  if (std::abs(nu_v) < 1e-12)
    throw Error(ErrorCode::NoConvergence, "<nu, v(t)> vanishes");
  v /= nu_v;
  phi /= bdot(phi, v);

  SpectralData data;
  data.t = t;
  data.lambda = triple.lambda;
  data.v = v;
  data.phi = phi;
  data.N = M - triple.lambda * v * phi.transpose();
  data.rho = spectral_radius_estimate(data.N);
  if (data.rho > (1.0 - kGapTolerance) * std::abs(data.lambda))
    throw Error(ErrorCode::NoSpectralGap,
                "modulus gap ratio " +
                    std::to_string(data.rho / std::abs(data.lambda)) +
                    " at t = " + std::to_string(t));
  return data;
}

CMatrix contour_projector(const FiniteChain& chain, const Observable& xi,
                          double t, Complex center, double radius,
                          int quad_points) {
  if (quad_points < 64)
    throw Error(ErrorCode::ValidationError, "quad_points must be >= 64");
  if (!(radius > 0.0))
    throw Error(ErrorCode::ValidationError, "radius must be > 0");
  const int n = chain.n_states();
  const CMatrix M = build_kernel(chain, xi, t).M;

  // (1/2 pi i) oint R(z) dz over z = c + r e^{i theta}, trapezoid rule:
  // (r/m) sum_j e^{i theta_j} R(z_j).
  CMatrix acc = CMatrix::Zero(n, n);
  for (int j = 0; j < quad_points; ++j) {
    const double theta = kTwoPi * j / quad_points;
    const Complex e = std::exp(Complex(0.0, theta));
    acc += e * resolvent(M, center + radius * e);
  }
  CMatrix proj = (radius / quad_points) * acc;

  Eigen::JacobiSVD<CMatrix> svd(proj);
  if (svd.singularValues().size() > 1 && svd.singularValues()[1] > 1e-6)
    throw Error(ErrorCode::RankNotOne,
                "second singular value " +
                    std::to_string(svd.singularValues()[1]));
  return proj;
}

CMatrix contour_remainder_power(const FiniteChain& chain, const Observable& xi,
                                double t, double radius, int quad_points,
                                int power) {
  if (quad_points < 64)
    throw Error(ErrorCode::ValidationError, "quad_points must be >= 64");
  if (power < 0)
    throw Error(ErrorCode::ValidationError, "power must be >= 0");
  const int n = chain.n_states();
  const CMatrix M = build_kernel(chain, xi, t).M;
  CMatrix acc = CMatrix::Zero(n, n);
  for (int j = 0; j < quad_points; ++j) {
    const double theta = kTwoPi * j / quad_points;
    const Complex e = std::exp(Complex(0.0, theta));
    const Complex z = radius * e;
    acc += e * std::pow(z, power) * resolvent(M, z);
  }
  return (radius / quad_points) * acc;
}

double resolvent_difference_bound(const FiniteChain& chain,
                                  const Observable& xi,
                                  const std::vector<double>& t_grid,
                                  const Circle& circle, int quad_points) {
  if (t_grid.empty())
    throw Error(ErrorCode::EmptyGrid, "empty t grid");
  const int n = chain.n_states();
  const Vector nu = nu_of(chain);
  const CMatrix P = chain.P.cast<Complex>();

  std::vector<CMatrix> base;
  base.reserve(quad_points);
  std::vector<Complex> nodes;
  for (int j = 0; j < quad_points; ++j) {
    const double theta = kTwoPi * j / quad_points;
    const Complex z =
        circle.center + circle.radius * std::exp(Complex(0.0, theta));
    nodes.push_back(z);
    base.push_back(resolvent(P, z));
  }

  double worst = 0.0;
  for (double t : t_grid) {
    if (t == 0.0) continue;
    const CMatrix M = build_kernel(chain, xi, t).M;
    for (int j = 0; j < quad_points; ++j) {
      const CMatrix diff = resolvent(M, nodes[j]) - base[j];
      // Probe basis: coordinate indicators (sup norm 1); column k of diff is
      // the image of e_k.
      for (int k = 0; k < n; ++k) {
        const double weighted = (nu.array() * diff.col(k).cwiseAbs().array()).sum();
        worst = std::max(worst, weighted / std::abs(t));
      }
    }
  }
  return worst;
}

ExpansionFit lambda_expansion_check(const FiniteChain& chain,
                                    const Observable& xi,
                                    const std::vector<double>& u_grid) {
  if (u_grid.empty()) throw Error(ErrorCode::EmptyGrid, "empty u grid");
  const double sigma2 = sigma_squared(chain, xi);
  if (sigma2 < 1e-12)
    throw Error(ErrorCode::DegenerateVariance, "sigma^2 = 0");

  std::vector<double> log_u, log_r;
  double max_residual = 0.0;
  for (double u : u_grid) {
    if (u == 0.0)
      throw Error(ErrorCode::EmptyGrid, "u grid must exclude 0");
    const Complex lambda = spectral_decompose(chain, xi, u).lambda;
    const double r = std::abs(lambda - 1.0 + 0.5 * sigma2 * u * u);
    max_residual = std::max(max_residual, r);
    if (r > 1e-14) {  // below that the eigen solve noise dominates
      log_u.push_back(std::log(std::abs(u)));
      log_r.push_back(std::log(r));
    }
  }
  if (log_u.size() < 2)
    return {std::numeric_limits<double>::infinity(), max_residual};

  const int m = static_cast<int>(log_u.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    sx += log_u[i];
    sy += log_r[i];
    sxx += log_u[i] * log_u[i];
    sxy += log_u[i] * log_r[i];
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return {slope, max_residual};
}

PerturbationBounds perturbation_bounds(const FiniteChain& chain,
                                       const Observable& xi,
                                       const std::vector<double>& t_grid,
                                       int n_max) {
  if (t_grid.empty()) throw Error(ErrorCode::EmptyGrid, "empty t grid");
  const Vector nu = nu_of(chain);
  const CVector ones = CVector::Ones(chain.n_states());

  std::vector<SpectralData> per_t;
  double rho_uniform = 0.0;
  for (double t : t_grid) {
    if (t == 0.0)
      throw Error(ErrorCode::EmptyGrid, "t grid must exclude 0");
    per_t.push_back(spectral_decompose(chain, xi, t));
    rho_uniform = std::max(rho_uniform, per_t.back().rho);
  }

  PerturbationBounds out;
  for (const SpectralData& sd : per_t) {
    const double abs_t = std::abs(sd.t);
    const double b1 =
        (nu.array() * (sd.v - ones).cwiseAbs().array()).sum() / abs_t;
    const double b2 = std::abs(bdot(sd.phi, ones) - 1.0) / abs_t;
    out.b1 = std::max(out.b1, b1);
    out.b2 = std::max(out.b2, b2);

    CVector g = ones;
    double rho_pow = 1.0;
    for (int k = 1; k <= n_max; ++k) {
      g = sd.N * g;
      rho_pow *= rho_uniform;
      const double num = (nu.array() * g.cwiseAbs().array()).sum();
      if (rho_pow < 1e-250) {
        if (num > 1e-12)
          throw Error(ErrorCode::NoConvergence, "remainder decay anomaly");
        break;
      }
      if (num > 1e-300)
        out.b3 = std::max(out.b3, num / (rho_pow * abs_t));
    }
  }
  return out;
}

DoeblinFortetResult doeblin_fortet_audit(const FiniteChain& chain,
                                         const Observable& xi, const Vector& W,
                                         const std::vector<double>& t_grid,
                                         int n_max, unsigned seed) {
  const int n = chain.n_states();
  if (W.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "weight size != n_states");
  if (W.minCoeff() < 1.0 - 1e-12)
    throw Error(ErrorCode::ValidationError, "weight W must be >= 1");
  const Vector nu = nu_of(chain);

  // Drift sufficient condition sup_x (QW)(x)/W(x); always finite on a finite
  // space, reported for the record.
  const Vector qw = chain.P * W;
  const double drift_ratio = (qw.array() / W.array()).maxCoeff();

  // kappa_hat: uniform bound on the sub-dominant modulus of Q(t) over the
  // grid (t = 0 included). A remainder mode of modulus >= 1 means no
  // geometric rate can fit, whatever the constant.
  std::vector<double> ts = {0.0};
  ts.insert(ts.end(), t_grid.begin(), t_grid.end());
  double kappa_hat = 0.0;
  for (double t : ts) {
    const CMatrix M = build_kernel(chain, xi, t).M;
    double sub;
    try {
      const DominantTriple triple = dominant_triple(
          M, CVector::Ones(n), nu.cast<Complex>(), 1e-13, 100000);
      const CMatrix N =
          M - triple.lambda * triple.v * triple.phi.transpose();
      sub = spectral_radius_estimate(N);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NoConvergence)
        throw Error(ErrorCode::AuditFailed,
                    "no isolated dominant eigenvalue at t = " +
                        std::to_string(t));
      throw;
    }
    kappa_hat = std::max(kappa_hat, sub);
    if (kappa_hat > 1.0 - 1e-9)
      throw Error(ErrorCode::AuditFailed,
                  "no kappa < 1 fits: remainder modulus " +
                      std::to_string(kappa_hat) + " at t = " +
                      std::to_string(t));
  }

  // Probes: W-rescaled coordinates (unit W-norm) plus seeded random complex
  // probes normalized to unit W-norm.
  std::vector<CVector> probes;
  for (int k = 0; k < n; ++k) {
    CVector f = CVector::Zero(n);
    f[k] = W[k];
    probes.push_back(std::move(f));
  }
  std::mt19937_64 rng(seed);
  for (int r = 0; r < 100; ++r) {
    CVector f(n);
    for (int i = 0; i < n; ++i) {
      const double re = (rng() >> 11) * 0x1.0p-53 - 0.5;
      const double im = (rng() >> 11) * 0x1.0p-53 - 0.5;
      f[i] = Complex(re, im);
    }
    const double norm_w = (f.cwiseAbs().array() / W.array()).maxCoeff();
    f /= norm_w;
    probes.push_back(std::move(f));
  }

  double c_hat = 0.0;
  for (double t : ts) {
    const CMatrix M = build_kernel(chain, xi, t).M;
    for (const CVector& f : probes) {
      const double norm_f = (f.cwiseAbs().array() / W.array()).maxCoeff();
      const double nu_abs_f = (nu.array() * f.cwiseAbs().array()).sum();
      CVector g = f;
      double kappa_pow = 1.0;
      for (int step = 1; step <= n_max; ++step) {
        g = M * g;
        kappa_pow *= kappa_hat;
        const double lhs = (g.cwiseAbs().array() / W.array()).maxCoeff();
        const double rhs = kappa_pow * norm_f + nu_abs_f;
        if (rhs > 1e-300) c_hat = std::max(c_hat, lhs / rhs);
      }
    }
  }
  return DoeblinFortetResult{kappa_hat, c_hat, drift_ratio};
}

}  // namespace cltlab
