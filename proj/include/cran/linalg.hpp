#pragma once

// Complex Hermitian matrix utilities shared by every compression scheme:
// base-2 log-determinants, the tangent majorizer phi, conditional
// covariances and sorted eigendecompositions.  All rates produced by the
// library are in bits; trace terms carry the 1/ln(2) conversion.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "cran/common.hpp"

namespace cran {

// Absorbs round-off asymmetry accumulated by iterative solvers.
inline CMat symmetrize(const CMat& m) { return 0.5 * (m + m.adjoint()); }

inline double spectral_norm_bound(const CMat& m) {
  // Cheap upper bound (row-sum norm); only used to scale tolerances.
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

inline double pd_tolerance(const CMat& m) {
  return kPdTolFactor * std::max(1.0, spectral_norm_bound(m));
}

struct EigDecomposition {
  RVec eigenvalues;   // descending
  CMat eigenvectors;  // columns, orthonormal
};

// M = V diag(lambda) V' with lambda sorted in non-increasing order.
inline EigDecomposition eig_hermitian_desc(const CMat& m) {
  if (m.rows() != m.cols()) throw ShapeError("eig_hermitian_desc: matrix not square");
  Eigen::SelfAdjointEigenSolver<CMat> es(symmetrize(m));
  const Eigen::Index n = m.rows();
  EigDecomposition out;
  out.eigenvalues = es.eigenvalues().reverse();
  out.eigenvectors.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) out.eigenvectors.col(j) = es.eigenvectors().col(n - 1 - j);
  return out;
}

// log2 det(M) for Hermitian positive definite M.
inline double log2det(const CMat& m) {
  if (m.rows() != m.cols()) throw ShapeError("log2det: matrix not square");
  if (m.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<CMat> es(symmetrize(m), Eigen::EigenvaluesOnly);
  const double tol = pd_tolerance(m);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double lam = es.eigenvalues()(i);
    if (lam <= tol) throw SingularMatrixError("log2det: matrix not positive definite");
    acc += std::log2(lam);
  }
  return acc;
}

inline bool is_positive_definite(const CMat& m) {
  if (m.rows() == 0) return true;
  Eigen::LLT<CMat> llt(symmetrize(m));
  return llt.info() == Eigen::Success;
}

// phi(X, Y) = log2 det(Y) + tr(Y^-1 (X - Y)) / ln 2.
// Tangent of the concave log2 det at Y; phi(X, Y) >= log2 det(X) with
// equality at X = Y.
inline double phi(const CMat& x, const CMat& y) {
  if (x.rows() != x.cols() || y.rows() != y.cols() || x.rows() != y.rows())
    throw ShapeError("phi: dimension mismatch");
  const double ld = log2det(y);  // throws on singular Y
  Eigen::LDLT<CMat> ldlt(symmetrize(y));
  const double tr = (ldlt.solve(x - y)).trace().real();
  return ld + tr / kLn2;
}

// Sigma_a - Sigma_ab Sigma_b^-1 Sigma_ab'; the Schur complement of the
// joint covariance [[Sigma_a, Sigma_ab], [Sigma_ab', Sigma_b]].
inline CMat conditional_covariance(const CMat& sigma_a, const CMat& sigma_ab, const CMat& sigma_b) {
  if (sigma_ab.rows() != sigma_a.rows() || sigma_ab.cols() != sigma_b.rows())
    throw ShapeError("conditional_covariance: nonconformable blocks");
  if (sigma_b.rows() == 0) return sigma_a;
  Eigen::SelfAdjointEigenSolver<CMat> es(symmetrize(sigma_b), Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) <= pd_tolerance(sigma_b))
    throw SingularMatrixError("conditional_covariance: conditioning covariance singular");
  Eigen::LDLT<CMat> ldlt(symmetrize(sigma_b));
  return symmetrize(sigma_a - sigma_ab * ldlt.solve(sigma_ab.adjoint()));
}

// Principal square root of a Hermitian PSD matrix.
inline CMat hermitian_sqrt(const CMat& m) {
  const EigDecomposition ed = eig_hermitian_desc(m);
  RVec lam = ed.eigenvalues.cwiseMax(0.0).cwiseSqrt();
  return ed.eigenvectors * lam.asDiagonal() * ed.eigenvectors.adjoint();
}

inline CMat hermitian_inv_sqrt(const CMat& m) {
  const EigDecomposition ed = eig_hermitian_desc(m);
  const double tol = pd_tolerance(m);
  RVec lam(ed.eigenvalues.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (ed.eigenvalues(i) <= tol)
      throw SingularMatrixError("hermitian_inv_sqrt: matrix not positive definite");
    lam(i) = 1.0 / std::sqrt(ed.eigenvalues(i));
  }
  return ed.eigenvectors * lam.asDiagonal() * ed.eigenvectors.adjoint();
}

namespace detail {

// Water-filling on a raw (signal, noise) split: the rate over the edge is
// spent on the least-noisy directions, meeting the budget with equality.
inline CMat waterfill_core(const CMat& signal, const CMat& noise, double ctilde, double cap) {
  const Eigen::Index d = noise.rows();
  if (ctilde <= 0) return cap * CMat::Identity(d, d);
  const CMat n_reg =
      noise + 1e-12 * CMat::Identity(d, d) * std::max(1.0, spectral_norm_bound(noise));
  const CMat n_half = hermitian_sqrt(n_reg);
  const CMat n_inv_half = hermitian_inv_sqrt(n_reg);
  const CMat s = symmetrize(n_inv_half * signal * n_inv_half.adjoint() + CMat::Identity(d, d));
  const EigDecomposition ed = eig_hermitian_desc(s);
  const RVec& lam = ed.eigenvalues;
  double mu_hi = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) mu_hi = std::max(mu_hi, 1.0 - 1.0 / lam(j));
  RVec alpha = RVec::Zero(d);
  if (mu_hi <= 1e-15) {
    // No dimension carries signal; any covariance achieves zero rate.
    return cap * CMat::Identity(d, d);
  }
  // Unused dimensions receive cap-sized noise (measured on the original,
  // unwhitened scale) and still leak a small residual rate; including it in
  // the bisection keeps the total at exactly ctilde.
  const double t_unused = std::max(1.0, cap / std::max(1.0, spectral_norm_bound(n_reg)));
  auto rate_at = [&](double mu) {
    double r = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      alpha(j) = std::max(0.0, (1.0 / mu) * (1.0 - 1.0 / lam(j)) - 1.0);
      r += alpha(j) > 0 ? std::log2(1.0 + alpha(j) * lam(j)) : std::log2(1.0 + lam(j) / t_unused);
    }
    return r;
  };
  double lo = mu_hi * 1e-18, hi = mu_hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (rate_at(mid) > ctilde ? lo : hi) = mid;
  }
  rate_at(0.5 * (lo + hi));
  RVec inv_alpha(d);
  for (Eigen::Index j = 0; j < d; ++j) inv_alpha(j) = alpha(j) > 0 ? 1.0 / alpha(j) : t_unused;
  const CMat core = ed.eigenvectors * inv_alpha.asDiagonal() * ed.eigenvectors.adjoint();
  return symmetrize(n_half * core * n_half.adjoint());
}

}  // namespace detail

inline CMat block_diag(const std::vector<CMat>& blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const CMat& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  CMat out = CMat::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const CMat& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

inline CMat vstack(const std::vector<CMat>& blocks) {
  if (blocks.empty()) return CMat(0, 0);
  Eigen::Index rows = 0;
  const Eigen::Index cols = blocks.front().cols();
  for (const CMat& b : blocks) {
    if (b.cols() != cols) throw ShapeError("vstack: column mismatch");
    rows += b.rows();
  }
  CMat out(rows, cols);
  Eigen::Index r = 0;
  for (const CMat& b : blocks) {
    out.middleRows(r, b.rows()) = b;
    r += b.rows();
  }
  return out;
}

}  // namespace cran
