#ifndef WEDGEWAVE_LINALG_HPP
#define WEDGEWAVE_LINALG_HPP

#include "wedgewave/common.hpp"

#include <Eigen/SVD>

namespace wedgewave {

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Largest singular value.
inline double operator_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return Eigen::BDCSVD<Matrix>(a).singularValues()(0);
}

// Orthonormal basis of the column space, rank decided at tol * sigma_max.
inline Matrix orthonormal_columns(const Matrix& m, double tol = 1e-12) {
  if (m.cols() == 0) return Matrix(m.rows(), 0);
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double cutoff = (sv.size() > 0 ? sv(0) : 0.0) * tol;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff && sv(i) > 0) ++rank;
  return svd.matrixU().leftCols(rank);
}

// ||(1 - QQ*) M|| for Q with orthonormal columns.
inline double subspace_residual(const Matrix& q, const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Matrix r = m - q * (q.adjoint() * m);
  return operator_norm(r);
}

inline Vector least_squares(const Matrix& a, const Vector& b, double* residual = nullptr) {
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector x = svd.solve(b);
  if (residual) *residual = (a * x - b).norm();
  return x;
}

// f applied to a Hermitian matrix through its spectral decomposition.
inline Matrix hermitian_function(const Matrix& h, const std::function<Complex(double)>& f) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  if (es.info() != Eigen::Success) throw Error("hermitian_function: eigensolver failed");
  const Matrix& u = es.eigenvectors();
  Vector fe(es.eigenvalues().size());
  for (Eigen::Index i = 0; i < fe.size(); ++i) fe[i] = f(es.eigenvalues()[i]);
  return u * fe.asDiagonal() * u.adjoint();
}

}  // namespace wedgewave

#endif  // WEDGEWAVE_LINALG_HPP
