#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <complex>
#include <stdexcept>

namespace ttdbeam {

/// Moore-Penrose pseudo-inverse with singular values below
/// rel_tol * sigma_max treated as zero. Sets *rank_deficient when any
/// singular value was dropped.
inline Eigen::MatrixXcd pseudo_inverse(const Eigen::MatrixXcd& a,
                                       double rel_tol = 1e-12,
                                       bool* rank_deficient = nullptr) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(
      a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? sv[0] * rel_tol : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  bool dropped = false;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > cutoff && sv[i] > 0.0)
      inv[i] = 1.0 / sv[i];
    else
      dropped = true;
  }
  if (rank_deficient) *rank_deficient = dropped;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

/// Solves A X + X B = C for X (A: p x p, B: q x q, C: p x q) by reducing
/// both coefficient matrices to triangular Schur form and back-substituting
/// column by column. Throws when the spectra of A and -B overlap, in which
/// case the equation is singular.
inline Eigen::MatrixXcd sylvester_solve(const Eigen::MatrixXcd& a,
                                        const Eigen::MatrixXcd& b,
                                        const Eigen::MatrixXcd& c) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || c.rows() != a.rows() ||
      c.cols() != b.cols())
    throw std::invalid_argument("sylvester_solve: incompatible shapes");

  Eigen::ComplexSchur<Eigen::MatrixXcd> schur_a(a);
  Eigen::ComplexSchur<Eigen::MatrixXcd> schur_b(b);
  if (schur_a.info() != Eigen::Success || schur_b.info() != Eigen::Success)
    throw std::runtime_error("sylvester_solve: Schur decomposition failed");

  const Eigen::MatrixXcd& ta = schur_a.matrixT();
  const Eigen::MatrixXcd& tb = schur_b.matrixT();
  const Eigen::MatrixXcd& ua = schur_a.matrixU();
  const Eigen::MatrixXcd& ub = schur_b.matrixU();

  Eigen::MatrixXcd y = ua.adjoint() * c * ub;
  const Eigen::Index p = a.rows();
  const Eigen::Index q = b.rows();
  const double scale = ta.norm() + tb.norm();

  Eigen::MatrixXcd ta_shift(p, p);
  for (Eigen::Index j = 0; j < q; ++j) {
    Eigen::VectorXcd rhs = y.col(j);
    for (Eigen::Index i = 0; i < j; ++i) rhs -= tb(i, j) * y.col(i);
    ta_shift = ta;
    ta_shift.diagonal().array() += tb(j, j);
    for (Eigen::Index i = 0; i < p; ++i)
      if (std::abs(ta_shift(i, i)) < 1e-14 * (scale + 1.0))
        throw std::runtime_error("sylvester_solve: singular spectrum pairing");
    y.col(j) =
        ta_shift.triangularView<Eigen::Upper>().solve(rhs);
  }
  return ua * y * ub.adjoint();
}

/// Relative residual ||A X + X B - C||_F / ||C||_F.
inline double sylvester_residual(const Eigen::MatrixXcd& a,
                                 const Eigen::MatrixXcd& b,
                                 const Eigen::MatrixXcd& c,
                                 const Eigen::MatrixXcd& x) {
  const double denom = c.norm();
  if (denom == 0.0) return (a * x + x * b).norm();
  return (a * x + x * b - c).norm() / denom;
}

}  // namespace ttdbeam
