// hermitian.hpp -- Hermitian positive definite kernels shared by all
// estimators: scalar/matrix divergences, eigen-based matrix functions, the
// geometric mean, and the exact two-matrix joint diagonalizer.
//
// The Hermitian eigendecomposition is the single primitive behind
// matrix_power, geometric_mean and PD projection.  All functions are pure.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "fastfca/types.hpp"

namespace fastfca {

// Eigenvalue floor for PD projection, relative to the mean eigenvalue
// (trace / dim).  Estimators produce near-singular covariances on silent
// frames; clipping keeps them invertible.
constexpr double kPdFloorRel = 1e-10;

template <typename Derived>
using PlainMatrix =
    Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// (A + A^H)/2.  Suppresses conjugate-symmetry drift from accumulated update
// roundoff; applied before every eigendecomposition.
template <typename Derived>
PlainMatrix<Derived> symmetrize(const Eigen::MatrixBase<Derived>& a) {
  return (a.derived() + a.derived().adjoint()) / 2;
}

template <typename Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived>& a, double tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  return (a.derived() - a.derived().adjoint()).cwiseAbs().maxCoeff() <= tol;
}

template <typename Derived>
bool is_positive_definite(const Eigen::MatrixBase<Derived>& a) {
  if (!is_hermitian(a, 1e-10 * (1.0 + a.cwiseAbs().maxCoeff()))) return false;
  Eigen::LLT<PlainMatrix<Derived>> llt(symmetrize(a));
  return llt.info() == Eigen::Success;
}

// Projection onto the PD cone: symmetrize, then clip eigenvalues from below
// at kPdFloorRel * (trace / dim).  Throws if there is no positive spectral
// mass at all (e.g. an all-zero covariance).
template <typename Derived>
PlainMatrix<Derived> project_pd(const Eigen::MatrixBase<Derived>& a) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  PlainMatrix<Derived> s = symmetrize(a);
  const Real mean_eig =
      Eigen::numext::real(s.trace()) / static_cast<Real>(s.rows());
  Eigen::SelfAdjointEigenSolver<PlainMatrix<Derived>> es(s);
  if (es.info() != Eigen::Success)
    throw NumericalError("project_pd: eigendecomposition failed");
  const Real lam_max = es.eigenvalues().maxCoeff();
  if (!(lam_max > Real(0)))
    throw NumericalError("project_pd: matrix has no positive spectral mass");
  // Trace scale per the construction contract; spectral scale as fallback
  // when roundoff has driven the trace nonpositive.
  const Real floor =
      kPdFloorRel * (mean_eig > Real(0) ? mean_eig : lam_max);
  Eigen::Matrix<Real, Eigen::Dynamic, 1> lam =
      es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

// Itakura-Saito divergence of two positive scalars.
inline double is_divergence(double w1, double w2) {
  if (!(w1 > 0.0) || !(w2 > 0.0))
    throw std::domain_error("is_divergence: arguments must be positive");
  const double r = w1 / w2;
  return std::max(0.0, r - std::log(r) - 1.0);
}

// Log-determinant divergence tr(A B^-1) - ln det(A B^-1) - M, the matrix
// extension of the Itakura-Saito divergence (KL between zero-mean complex
// Gaussians).  Zero iff A == B.
template <typename DA, typename DB>
double logdet_divergence(const Eigen::MatrixBase<DA>& a,
                         const Eigen::MatrixBase<DB>& b) {
  static_assert(std::is_same_v<typename DA::Scalar, typename DB::Scalar>);
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
    throw std::invalid_argument("logdet_divergence: dimension mismatch");
  const Eigen::Index m = a.rows();
  Eigen::LLT<PlainMatrix<DA>> llt_a(symmetrize(a));
  Eigen::LLT<PlainMatrix<DB>> llt_b(symmetrize(b));
  if (llt_a.info() != Eigen::Success || llt_b.info() != Eigen::Success)
    throw NumericalError("logdet_divergence: argument not positive definite");
  const double tr =
      Eigen::numext::real(llt_b.solve(PlainMatrix<DA>(a)).trace());
  const double logdet_a =
      2.0 * llt_a.matrixLLT().diagonal().real().array().log().sum();
  const double logdet_b =
      2.0 * llt_b.matrixLLT().diagonal().real().array().log().sum();
  return std::max(0.0, tr - (logdet_a - logdet_b) - static_cast<double>(m));
}

// A^r = U diag(sigma^r) U^H through the Hermitian eigendecomposition, with
// eigenvalues clipped at the PD floor first.
template <typename Derived>
PlainMatrix<Derived> matrix_power(const Eigen::MatrixBase<Derived>& a,
                                  double r) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  PlainMatrix<Derived> s = symmetrize(a);
  const Real mean_eig =
      Eigen::numext::real(s.trace()) / static_cast<Real>(s.rows());
  Eigen::SelfAdjointEigenSolver<PlainMatrix<Derived>> es(s);
  if (es.info() != Eigen::Success)
    throw NumericalError("matrix_power: eigendecomposition failed");
  Eigen::Matrix<Real, Eigen::Dynamic, 1> lam =
      es.eigenvalues().cwiseMax(kPdFloorRel * std::max(mean_eig, Real(0)));
  if (!(lam.minCoeff() > Real(0)))
    throw NumericalError("matrix_power: matrix not positive definite");
  lam = lam.array().pow(static_cast<Real>(r)).matrix();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

// Geometric mean A # B = A^{1/2} (A^{-1/2} B A^{-1/2})^{1/2} A^{1/2}, the
// unique PD solution X of the Riccati equation X A^{-1} X = B.
template <typename DA, typename DB>
PlainMatrix<DA> geometric_mean(const Eigen::MatrixBase<DA>& a,
                               const Eigen::MatrixBase<DB>& b) {
  static_assert(std::is_same_v<typename DA::Scalar, typename DB::Scalar>);
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
    throw std::invalid_argument("geometric_mean: dimension mismatch");
  PlainMatrix<DA> a_half = matrix_power(a, 0.5);
  PlainMatrix<DA> a_half_inv = matrix_power(a, -0.5);
  PlainMatrix<DA> mid = matrix_power(a_half_inv * b * a_half_inv, 0.5);
  return symmetrize(a_half * mid * a_half);
}

// Exact joint diagonalizer of a PD pair.
template <typename Scalar>
struct JdPairT {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> w;  // nonsingular
  Eigen::Matrix<typename Eigen::NumTraits<Scalar>::Real, Eigen::Dynamic, 1>
      d1, d2;  // W^H R1 W = diag(d1), W^H R2 W = diag(d2)
};
using JdPair = JdPairT<Complex>;

// Solves the generalized eigenvalue problem for (R2, R1) by Cholesky
// reduction of R1: with R1 = L L^H, the standard Hermitian eigenproblem on
// L^-1 R2 L^-H yields W = L^-H V, so that W^H R1 W = I and W^H R2 W is the
// diagonal of generalized eigenvalues.
template <typename DA, typename DB>
JdPairT<typename DA::Scalar> exact_jd_pair(const Eigen::MatrixBase<DA>& r1,
                                           const Eigen::MatrixBase<DB>& r2) {
  static_assert(std::is_same_v<typename DA::Scalar, typename DB::Scalar>);
  using Scalar = typename DA::Scalar;
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  using Mat = PlainMatrix<DA>;
  if (r1.rows() != r1.cols() || r2.rows() != r2.cols() ||
      r1.rows() != r2.rows())
    throw std::invalid_argument("exact_jd_pair: dimension mismatch");
  const Eigen::Index m = r1.rows();

  Eigen::LLT<Mat> llt(symmetrize(r1));
  if (llt.info() != Eigen::Success)
    throw NumericalError("exact_jd_pair: first matrix not positive definite");
  const auto chol_diag = llt.matrixLLT().diagonal().real();
  const Real dmin = chol_diag.minCoeff(), dmax = chol_diag.maxCoeff();
  const Real cond_est = (dmax / dmin) * (dmax / dmin);
  if (!(dmin > Real(0)) || cond_est > Real(1e15))
    throw NumericalError("exact_jd_pair: numerically singular reduction "
                         "(condition estimate " +
                         std::to_string(static_cast<double>(cond_est)) + ")");

  Mat tmp = llt.matrixL().solve(symmetrize(r2));       // L^-1 R2
  Mat mid = llt.matrixL().solve(Mat(tmp.adjoint()));   // L^-1 R2 L^-H
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(mid));
  if (es.info() != Eigen::Success)
    throw NumericalError("exact_jd_pair: eigendecomposition failed");
  if (!(es.eigenvalues().minCoeff() > Real(0)))
    throw NumericalError("exact_jd_pair: second matrix not positive definite");

  JdPairT<Scalar> out;
  out.w = llt.matrixU().solve(es.eigenvectors());      // L^-H V
  out.d1 = Eigen::Matrix<Real, Eigen::Dynamic, 1>::Ones(m);
  out.d2 = es.eigenvalues();
  return out;
}

}  // namespace fastfca
