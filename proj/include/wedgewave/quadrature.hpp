#ifndef WEDGEWAVE_QUADRATURE_HPP
#define WEDGEWAVE_QUADRATURE_HPP

#include "wedgewave/common.hpp"

#include <Eigen/Eigenvalues>

#include <map>

namespace wedgewave {

struct QuadratureRule {
  RealVector nodes;
  RealVector weights;
};

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix of the monic
// orthogonal polynomials, weights come from the first eigenvector components.
inline QuadratureRule golub_welsch(const RealVector& alpha, const RealVector& beta,
                                   double mu0) {
  const Eigen::Index n = alpha.size();
  RealVector offdiag(n > 0 ? n - 1 : 0);
  for (Eigen::Index k = 0; k + 1 < n; ++k) offdiag[k] = std::sqrt(beta[k]);
  Eigen::SelfAdjointEigenSolver<RealMatrix> es;
  es.computeFromTridiagonal(alpha, offdiag, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw Error("golub_welsch: eigensolver failed");
  QuadratureRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = mu0 * v0 * v0;
  }
  return rule;
}

// Nodes/weights on [-1, 1] for weight 1.
inline QuadratureRule gauss_legendre(int n) {
  RealVector alpha = RealVector::Zero(n);
  RealVector beta(n > 0 ? n - 1 : 0);
  for (int k = 1; k < n; ++k) {
    const double kk = static_cast<double>(k);
    beta[k - 1] = kk * kk / (4.0 * kk * kk - 1.0);
  }
  return golub_welsch(alpha, beta, 2.0);
}

// Weight exp(-z^2/2)/sqrt(2*pi); weights sum to 1.
inline QuadratureRule gauss_hermite_unit(int n) {
  RealVector alpha = RealVector::Zero(n);
  RealVector beta(n > 0 ? n - 1 : 0);
  for (int k = 1; k < n; ++k) beta[k - 1] = static_cast<double>(k);
  return golub_welsch(alpha, beta, 1.0);
}

// Weight exp(-x) on [0, inf); weights sum to 1.
inline QuadratureRule gauss_laguerre(int n) {
  RealVector alpha(n);
  RealVector beta(n > 0 ? n - 1 : 0);
  for (int k = 0; k < n; ++k) alpha[k] = 2.0 * k + 1.0;
  for (int k = 1; k < n; ++k) beta[k - 1] = static_cast<double>(k) * k;
  return golub_welsch(alpha, beta, 1.0);
}

// Rules are pure functions of n; cache them, they get requested repeatedly.
inline const QuadratureRule& cached_gauss_legendre(int n) {
  static std::map<int, QuadratureRule> cache;
  static std::mutex mutex;
  std::scoped_lock lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, gauss_legendre(n)).first;
  return it->second;
}

inline const QuadratureRule& cached_gauss_hermite_unit(int n) {
  static std::map<int, QuadratureRule> cache;
  static std::mutex mutex;
  std::scoped_lock lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, gauss_hermite_unit(n)).first;
  return it->second;
}

inline const QuadratureRule& cached_gauss_laguerre(int n) {
  static std::map<int, QuadratureRule> cache;
  static std::mutex mutex;
  std::scoped_lock lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, gauss_laguerre(n)).first;
  return it->second;
}

// Integrate f over [a, b] with an n-node Legendre rule.
template <class F>
auto integrate_legendre(F&& f, double a, double b, int n)
    -> decltype(f(0.0)) {
  const QuadratureRule& rule = cached_gauss_legendre(n);
  using R = decltype(f(0.0));
  std::vector<R> terms(static_cast<std::size_t>(n));
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < n; ++i)
    terms[static_cast<std::size_t>(i)] = f(mid + half * rule.nodes[i]) * rule.weights[i];
  return pairwise_sum(terms, R(0)) * half;
}

}  // namespace wedgewave

#endif  // WEDGEWAVE_QUADRATURE_HPP
