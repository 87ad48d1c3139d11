#include "cltlab/eigs.hpp"

#include <cmath>
#include <cstdint>

namespace cltlab {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

DominantPair dominant_eigenpair(const CMatrix& M, const CVector& start,
                                double tol, int max_iter) {
  const int n = static_cast<int>(M.rows());
  if (M.cols() != n || start.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "dominant_eigenpair");
  if (n == 1) return {M(0, 0), CVector::Ones(1), 0};

  CVector x = start;
  const double x0n = x.cwiseAbs().maxCoeff();
  if (!(x0n > 0.0))
    throw Error(ErrorCode::ValidationError, "zero start vector");
  x /= x0n;

  int pin = -1;
  Complex lambda_prev(0.0, 0.0);
  for (int k = 1; k <= max_iter; ++k) {
    CVector y = M * x;
    const double yn = y.cwiseAbs().maxCoeff();
    if (yn < 1e-300) return {Complex(0.0, 0.0), x, k};  // M x = 0

    if (pin < 0 || std::abs(y[pin]) < 0.5 * yn) {
      Eigen::Index idx = 0;
      y.cwiseAbs().maxCoeff(&idx);
      pin = static_cast<int>(idx);
    }
    const Complex lambda = x.dot(y) / x.dot(x);  // Rayleigh quotient
    y /= y[pin];

    const double vec_diff = (y - x).cwiseAbs().maxCoeff();
    const double val_diff = std::abs(lambda - lambda_prev);
    x = y;
    lambda_prev = lambda;
    if (k > 1 && vec_diff <= tol && val_diff <= tol * std::max(1.0, std::abs(lambda)))
      return {lambda, x, k};
  }
  throw Error(ErrorCode::NoConvergence,
              "power iteration did not converge (no isolated dominant "
              "eigenvalue?)");
}

DominantTriple dominant_triple(const CMatrix& M, const CVector& start_v,
                               const CVector& start_phi, double tol,
                               int max_iter) {
  DominantPair right = dominant_eigenpair(M, start_v, tol, max_iter);
  DominantPair left =
      dominant_eigenpair(M.transpose(), start_phi, tol, max_iter);
  const double scale = std::max(1.0, std::abs(right.value));
  if (std::abs(right.value - left.value) > 1e-9 * scale)
    throw Error(ErrorCode::NoConvergence,
                "left/right dominant eigenvalues disagree");
  CVector v = right.vector;
  CVector phi = left.vector;
  const Complex pairing = bdot(phi, v);
  if (std::abs(pairing) <
      1e-12 * phi.cwiseAbs().maxCoeff() * v.cwiseAbs().maxCoeff() *
          static_cast<double>(v.size()))
    throw Error(ErrorCode::NoConvergence,
                "dominant eigenvalue appears defective (<phi,v> = 0)");
  phi /= pairing;
  return {right.value, v, phi};
}

double spectral_radius_estimate(const CMatrix& M, double tol, int max_iter) {
  const int n = static_cast<int>(M.rows());
  if (n == 0) return 0.0;
  if (n == 1) return std::abs(M(0, 0));

  // Block power iteration with a small Rayleigh-Ritz projection: iterate an
  // orthonormal block, project H = Q^H M Q, read Ritz values off the small
  // matrix. The block absorbs equal-modulus clusters (conjugate pairs,
  // +-kappa pairs, multiplicity) that defeat single-vector iteration. When
  // block == n the projection is exact after one sweep.
  const int block = std::min(n, 12);
  CMatrix X(n, block);
  {
    std::uint64_t s = 0x5eedc0dec0ffee42ULL;
    for (int j = 0; j < block; ++j)
      for (int i = 0; i < n; ++i) {
        const double re = (splitmix64(s) >> 11) * 0x1.0p-53 - 0.5;
        const double im = (splitmix64(s) >> 11) * 0x1.0p-53 - 0.5;
        X(i, j) = Complex(re, im);
      }
    Eigen::HouseholderQR<CMatrix> qr(X);
    X = qr.householderQ() * CMatrix::Identity(n, block);
  }

  const double m_scale = M.cwiseAbs().maxCoeff() * n + 1e-300;
  double prev = -1.0;
  int stable = 0;
  for (int iter = 0; iter < max_iter; ++iter) {
    const CMatrix Y = M * X;
    if (Y.norm() < 1e-280 * std::sqrt(static_cast<double>(block)))
      return 0.0;  // block annihilated: nilpotent tail
    Eigen::HouseholderQR<CMatrix> qr(Y);
    const CMatrix Q = qr.householderQ() * CMatrix::Identity(n, block);
    const CMatrix MQ = M * Q;
    const CMatrix H = Q.adjoint() * MQ;
    Eigen::ComplexEigenSolver<CMatrix> es(H);
    if (es.info() != Eigen::Success)
      throw Error(ErrorCode::NoConvergence, "Ritz projection failed");

    // Largest Ritz modulus with a trustworthy residual ||M y - theta y||.
    double s = 0.0;
    bool any = false;
    for (int j = 0; j < block; ++j) {
      const Complex theta = es.eigenvalues()[j];
      const CVector y = Q * es.eigenvectors().col(j);
      const double residual = (MQ * es.eigenvectors().col(j) - theta * y).norm();
      if (residual <= 1e-9 * m_scale) {
        s = std::max(s, std::abs(theta));
        any = true;
      }
    }
    if (any) {
      if (std::abs(s - prev) <= std::max(tol * s, 1e-13)) {
        if (++stable >= 2) return s;
      } else {
        stable = 0;
      }
      prev = s;
    }
    X = Q;
  }
  throw Error(ErrorCode::NoConvergence, "spectral radius estimate stalled");
}

}  // namespace cltlab
