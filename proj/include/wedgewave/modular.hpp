#ifndef WEDGEWAVE_MODULAR_HPP
#define WEDGEWAVE_MODULAR_HPP

#include "wedgewave/linalg.hpp"
#include "wedgewave/net.hpp"

namespace wedgewave {

// ---------------------------------------------------------------------------
// Finite-dimensional *-algebras, commutants and Tomita-Takesaki data.  At
// finite dimension "von Neumann algebra" means: linear span closed under
// products and adjoints, containing the identity (equivalently, equal to its
// double commutant).

struct MatrixAlgebra {
  int dim = 0;
  std::vector<Matrix> generators;
  Matrix basis;  // dim^2 x K, orthonormal vectorized basis of the span
  bool selfadjoint_closed = true;

  int size() const { return static_cast<int>(basis.cols()); }

  Matrix basis_matrix(int i) const {
    Matrix m(dim, dim);
    for (int c = 0; c < dim; ++c)
      for (int r = 0; r < dim; ++r) m(r, c) = basis(c * dim + r, i);
    return m;
  }
};

namespace detail {

inline Vector vectorize(const Matrix& m) {
  Vector v(m.size());
  Eigen::Index k = 0;
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) v[k++] = m(r, c);
  return v;
}

inline Matrix unvectorize(const Vector& v, int dim) {
  Matrix m(dim, dim);
  Eigen::Index k = 0;
  for (int c = 0; c < dim; ++c)
    for (int r = 0; r < dim; ++r) m(r, c) = v[k++];
  return m;
}

// Append the vector to the orthonormal set if it is not already in its span.
inline bool grow_basis(std::vector<Vector>& basis, Vector v, double tol = 1e-11) {
  for (const Vector& b : basis) v -= (b.adjoint() * v).value() * b;
  // re-orthogonalize once, plain Gram-Schmidt loses digits
  for (const Vector& b : basis) v -= (b.adjoint() * v).value() * b;
  const double n = v.norm();
  if (n <= tol) return false;
  basis.push_back(v / n);
  return true;
}

}  // namespace detail

// Close the span of {1, generators, adjoints} under multiplication.
inline MatrixAlgebra build_matrix_algebra(const std::vector<Matrix>& generators,
                                          int max_size = 4096) {
  if (generators.empty()) throw ModularStructureError("build_matrix_algebra: no generators");
  const int dim = static_cast<int>(generators.front().rows());
  for (const Matrix& g : generators)
    if (g.rows() != dim || g.cols() != dim)
      throw ModularStructureError("build_matrix_algebra: generator dimensions differ");

  std::vector<Matrix> words;
  words.push_back(Matrix::Identity(dim, dim));
  for (const Matrix& g : generators) {
    words.push_back(g);
    words.push_back(g.adjoint());
  }
  std::vector<Vector> basis;
  std::vector<Matrix> members;
  for (const Matrix& w : words)
    if (detail::grow_basis(basis, detail::vectorize(w))) members.push_back(w);

  // multiply until the span stabilizes
  std::size_t frontier_start = 0;
  while (true) {
    const std::size_t frontier_end = members.size();
    bool grew = false;
    for (std::size_t i = 0; i < frontier_end; ++i) {
      for (std::size_t j = (i < frontier_start ? frontier_start : 0); j < frontier_end; ++j) {
        Matrix prod = members[i] * members[j];
        if (static_cast<int>(basis.size()) >= std::min(max_size, dim * dim)) break;
        if (detail::grow_basis(basis, detail::vectorize(prod))) {
          members.push_back(std::move(prod));
          grew = true;
        }
      }
    }
    if (!grew || static_cast<int>(basis.size()) >= std::min(max_size, dim * dim)) break;
    frontier_start = frontier_end;
  }

  MatrixAlgebra alg;
  alg.dim = dim;
  alg.generators = generators;
  alg.basis.resize(dim * dim, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i)
    alg.basis.col(static_cast<Eigen::Index>(i)) = basis[i];

  // adjoint closure residual (should be exact: we seeded with adjoints and
  // products of adjoints mirror products)
  double adj_res = 0.0;
  for (int i = 0; i < alg.size(); ++i) {
    Vector va = detail::vectorize(Matrix(alg.basis_matrix(i).adjoint()));
    Vector proj = alg.basis * (alg.basis.adjoint() * va);
    adj_res = std::max(adj_res, (va - proj).norm());
  }
  alg.selfadjoint_closed = adj_res < 1e-9;
  return alg;
}

// Solve [X, G] = 0 for every generator and its adjoint; the solution space is
// then automatically a *-algebra containing the identity.
inline MatrixAlgebra commutant(const MatrixAlgebra& alg) {
  const int dim = alg.dim;
  const Eigen::Index n2 = static_cast<Eigen::Index>(dim) * dim;
  std::vector<Matrix> constraints;
  for (const Matrix& g : alg.generators) {
    constraints.push_back(g);
    constraints.push_back(g.adjoint());
  }
  Matrix system(static_cast<Eigen::Index>(constraints.size()) * n2, n2);
  const Matrix id = Matrix::Identity(dim, dim);
  for (std::size_t k = 0; k < constraints.size(); ++k) {
    // vec(XG - GX) = (G^T (x) 1 - 1 (x) G) vec(X)
    system.block(static_cast<Eigen::Index>(k) * n2, 0, n2, n2) =
        kron(constraints[k].transpose(), id) - kron(id, constraints[k]);
  }
  Eigen::BDCSVD<Matrix> svd(system, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = (sv.size() ? sv(0) : 0.0) * 1e-11 + 1e-13;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  const Eigen::Index null_dim = n2 - rank;

  MatrixAlgebra out;
  out.dim = dim;
  out.basis = svd.matrixV().rightCols(null_dim);
  out.generators.reserve(static_cast<std::size_t>(null_dim));
  for (Eigen::Index i = 0; i < null_dim; ++i)
    out.generators.push_back(detail::unvectorize(out.basis.col(i), dim));
  out.selfadjoint_closed = true;
  return out;
}

inline double span_containment_residual(const Matrix& basis_sub, const Matrix& basis_sup) {
  if (basis_sub.cols() == 0) return 0.0;
  return subspace_residual(basis_sup, basis_sub);
}

inline double span_equality_residual(const MatrixAlgebra& a, const MatrixAlgebra& b) {
  return std::max(span_containment_residual(a.basis, b.basis),
                  span_containment_residual(b.basis, a.basis));
}

// ---------------------------------------------------------------------------
// Modular objects of (alg, Omega) with Omega cyclic and separating: polar
// decomposition of S : A Omega -> A* Omega.  Antiunitaries are stored as
// v -> U conj(v) with U unitary.

struct ModularData {
  Matrix delta;       // positive, Delta Omega = Omega
  Matrix j_unitary;   // unitary part of J_mod
  Vector omega;

  Vector apply_j(const Vector& v) const { return j_unitary * v.conjugate(); }
  Matrix conjugate_by_j(const Matrix& a) const {
    return j_unitary * a.conjugate() * j_unitary.conjugate();
  }

  Matrix delta_power(double t) const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(delta);
    Vector powered(es.eigenvalues().size());
    for (Eigen::Index i = 0; i < powered.size(); ++i)
      powered[i] = std::pow(es.eigenvalues()[i], t);
    return es.eigenvectors() * powered.asDiagonal() * es.eigenvectors().adjoint();
  }

  Matrix delta_it(double t) const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(delta);
    Vector powered(es.eigenvalues().size());
    for (Eigen::Index i = 0; i < powered.size(); ++i)
      powered[i] = std::polar(1.0, t * std::log(es.eigenvalues()[i]));
    return es.eigenvectors() * powered.asDiagonal() * es.eigenvectors().adjoint();
  }
};

struct ModularResiduals {
  double s_fit = 0.0;            // how well C conj(A Omega) = A* Omega was solved
  double delta_omega = 0.0;      // ||Delta Omega - Omega||
  double j_omega = 0.0;          // ||J Omega - Omega||
  double j_squared = 0.0;        // ||J^2 - 1||
  double j_delta_j = 0.0;        // ||J Delta J - Delta^{-1}||
  double tomita_takesaki = 0.0;  // span distance of J alg J from the commutant
};

struct ModularObjects {
  ModularData data;
  ModularResiduals residuals;
  MatrixAlgebra commutant_algebra;
};

inline ModularObjects modular_objects(const MatrixAlgebra& alg, const Vector& omega,
                                      double rank_threshold = 1e-8) {
  const int dim = alg.dim;
  if (omega.size() != dim) throw ModularStructureError("modular_objects: Omega dimension mismatch");

  // cyclicity: alg Omega spans
  Matrix m(dim, alg.size());
  Matrix mstar(dim, alg.size());
  for (int i = 0; i < alg.size(); ++i) {
    const Matrix a = alg.basis_matrix(i);
    m.col(i) = a * omega;
    mstar.col(i) = a.adjoint() * omega;
  }
  {
    Eigen::BDCSVD<Matrix> svd(m);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > rank_threshold * sv(0)) ++rank;
    if (rank < dim)
      throw ModularStructureError("modular_objects: Omega is not cyclic for the algebra (rank " +
                                  std::to_string(rank) + " of " + std::to_string(dim) + ")");
  }
  MatrixAlgebra comm = commutant(alg);
  {
    Matrix mc(dim, comm.size());
    for (int i = 0; i < comm.size(); ++i) mc.col(i) = comm.basis_matrix(i) * omega;
    Eigen::BDCSVD<Matrix> svd(mc);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > rank_threshold * sv(0)) ++rank;
    if (rank < dim)
      throw ModularStructureError(
          "modular_objects: Omega is not separating (not cyclic for the commutant; rank " +
          std::to_string(rank) + " of " + std::to_string(dim) + ")");
  }

  // S (A Omega) = A* Omega, antilinear: solve C conj(M) = Mstar.  The system
  // is consistent exactly when Omega separates, which was just checked.
  Eigen::BDCSVD<Matrix> msvd(m.conjugate(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Matrix c = mstar * msvd.solve(Matrix(Matrix::Identity(dim, dim)));

  ModularObjects out;
  out.commutant_algebra = std::move(comm);
  ModularResiduals& res = out.residuals;
  res.s_fit = operator_norm(Matrix(c * m.conjugate() - mstar));

  Matrix delta = c.transpose() * c.conjugate();
  delta = 0.5 * (delta + Matrix(delta.adjoint()));  // hermitize against roundoff
  Eigen::SelfAdjointEigenSolver<Matrix> es(delta);
  if (es.eigenvalues().minCoeff() <= 0)
    throw ModularStructureError("modular_objects: Delta is not positive definite");
  Vector inv_sqrt(es.eigenvalues().size());
  for (Eigen::Index i = 0; i < inv_sqrt.size(); ++i)
    inv_sqrt[i] = 1.0 / std::sqrt(es.eigenvalues()[i]);
  const Matrix delta_inv_half =
      es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().adjoint();

  ModularData& data = out.data;
  data.delta = delta;
  data.omega = omega;
  data.j_unitary = c * delta_inv_half.conjugate();

  res.delta_omega = (delta * omega - omega).norm();
  res.j_omega = (data.apply_j(omega) - omega).norm();
  res.j_squared = operator_norm(
      Matrix(data.j_unitary * data.j_unitary.conjugate() - Matrix::Identity(dim, dim)));
  Eigen::SelfAdjointEigenSolver<Matrix> esd(delta);
  Vector inv(esd.eigenvalues().size());
  for (Eigen::Index i = 0; i < inv.size(); ++i) inv[i] = 1.0 / esd.eigenvalues()[i];
  const Matrix delta_inv = esd.eigenvectors() * inv.asDiagonal() * esd.eigenvectors().adjoint();
  res.j_delta_j = operator_norm(Matrix(data.conjugate_by_j(delta) - delta_inv));

  // J alg J = alg' as linear spans
  Matrix mapped(dim * dim, alg.size());
  for (int i = 0; i < alg.size(); ++i)
    mapped.col(i) = detail::vectorize(data.conjugate_by_j(alg.basis_matrix(i)));
  const Matrix mapped_basis = orthonormal_columns(mapped, 1e-12);
  res.tomita_takesaki =
      std::max(span_containment_residual(mapped_basis, out.commutant_algebra.basis),
               span_containment_residual(out.commutant_algebra.basis, mapped_basis));
  return out;
}

// ||Delta^{it} alg Delta^{-it} - alg|| as spans, for the flow-invariance checks.
inline double modular_flow_residual(const MatrixAlgebra& alg, const ModularData& data, double t) {
  const Matrix u = data.delta_it(t);
  Matrix mapped(alg.dim * alg.dim, alg.size());
  for (int i = 0; i < alg.size(); ++i)
    mapped.col(i) = detail::vectorize(Matrix(u * alg.basis_matrix(i) * u.adjoint()));
  return span_containment_residual(orthonormal_columns(mapped, 1e-12), alg.basis);
}

// ---------------------------------------------------------------------------
// Geometric-vs-modular diagnostic.  The truncated wedge algebra's Tomita
// conjugation need not coincide with the geometric reflection; the distance
// between the two is reported, never asserted.

struct GeometricModularReport {
  int dim = 0;
  int algebra_size = 0;
  double distance = 0.0;            // ||J_mod - J_geometric|| via the unitary parts
  double tomita_takesaki = 0.0;
  double delta_omega = 0.0;
};

inline GeometricModularReport geometric_vs_modular_report(
    const TwoDNet& net, const std::vector<WedgeElement>& samples, int max_algebra_size = 4096) {
  if (samples.empty())
    throw ModularStructureError("geometric_vs_modular_report: no wedge samples");
  std::vector<Matrix> gens;
  gens.reserve(samples.size());
  for (const WedgeElement& el : samples) gens.push_back(el.op);
  MatrixAlgebra alg = build_matrix_algebra(gens, max_algebra_size);
  ModularObjects mo = modular_objects(alg, net.vacuum());

  GeometricModularReport report;
  report.dim = net.dim;
  report.algebra_size = alg.size();
  // geometric J is plain conjugation: unitary part identity
  report.distance =
      operator_norm(Matrix(mo.data.j_unitary - Matrix::Identity(net.dim, net.dim)));
  report.tomita_takesaki = mo.residuals.tomita_takesaki;
  report.delta_omega = mo.residuals.delta_omega;
  return report;
}

}  // namespace wedgewave

#endif  // WEDGEWAVE_MODULAR_HPP
