#ifndef WEDGEWAVE_WARP_HPP
#define WEDGEWAVE_WARP_HPP

#include "wedgewave/asymptotics.hpp"

namespace wedgewave {

// ---------------------------------------------------------------------------
// Warped convolution F_Q = int dE(x) alpha_{Qx}(F).  On the truncated net the
// spectral measure is a finite sum of joint eigenprojections, so the spectral
// form is exact: on the class with momentum p the deformed operator acts as
// U(Qp) F U(Qp)^{-1}.  The oscillatory form evaluates the regularized double
// integral instead and must land on the spectral form after extrapolation.

struct DeformationMatrix {
  double kappa = 0.0;  // >= 0; the opposite wedge uses sign = -1

  void validate() const {
    if (kappa < 0.0) throw ConfigError("DeformationMatrix: kappa must be >= 0");
  }

  // Q (x0, x1) = kappa (x1, x0), times sign.
  std::array<double, 2> apply(double sign, double x0, double x1) const {
    return {sign * kappa * x1, sign * kappa * x0};
  }

  // Antisymmetry residual w.r.t. the Minkowski form, (Qx) . y + x . (Qy) = 0.
  double antisymmetry_residual(double sign, const std::array<double, 2>& x,
                               const std::array<double, 2>& y) const {
    auto qx = apply(sign, x[0], x[1]);
    auto qy = apply(sign, y[0], y[1]);
    const double a = qx[0] * y[0] - qx[1] * y[1];
    const double b = x[0] * qy[0] - x[1] * qy[1];
    return std::abs(a + b);
  }
};

inline Matrix warp_spectral(const TwoDNet& net, const Matrix& f, const DeformationMatrix& q,
                            double sign = 1.0) {
  q.validate();
  Matrix out(net.dim, net.dim);
  std::vector<Matrix> columns(net.classes.size());
  parallel_for(net.classes.size(), [&](std::size_t c) {
    const JointEigenClass& cls = net.classes[c];
    const auto a = q.apply(sign, cls.energy, cls.momentum);
    const SpacetimePoint x{a[0], a[1]};
    const Vector ph = net.translation_phases(x);
    Matrix block(net.dim, static_cast<Eigen::Index>(cls.indices.size()));
    for (std::size_t j = 0; j < cls.indices.size(); ++j) {
      const int col = cls.indices[j];
      block.col(static_cast<Eigen::Index>(j)) =
          ph.asDiagonal() * f.col(col) * std::conj(ph[col]);
    }
    columns[c] = std::move(block);
  });
  for (std::size_t c = 0; c < net.classes.size(); ++c)
    for (std::size_t j = 0; j < net.classes[c].indices.size(); ++j)
      out.col(net.classes[c].indices[j]) = columns[c].col(static_cast<Eigen::Index>(j));
  return out;
}

// Deformed wedge element: R_Q keeps the W tag with sign +1, R'_{-Q} keeps W'
// with sign -1.  Support metadata describes the undeformed generators.
inline WedgeElement warp_element(const TwoDNet& net, const WedgeElement& el,
                                 const DeformationMatrix& q, double sign) {
  WedgeElement out = el;
  out.op = warp_spectral(net, el.op, q, sign);
  out.label = el.label + (sign >= 0 ? " warped(+" : " warped(-") + std::to_string(q.kappa) + ")";
  return out;
}

// ---------------------------------------------------------------------------
// Mollifiers f(x, y) = u(x) v(y) with f(0,0) = 1.  The y integral against
// e^{-ixy} e^{ipy} is carried out in closed form (v has an explicit Fourier
// transform), which reduces the regularized integral on a joint eigenvector
// psi_p to a weighted 2d x-integral around x = p:
//
//   F_Q^{(eps)} psi_p = int d2z rho(z) u(eps p + eps^2 z) alpha_{Q(p+eps z)}(F) psi_p
//
// with rho the normalized FT weight of v (Gaussian, or Laplace for the
// polynomial-damped family).  Both weights are even, so the eps-expansion is
// in eps^2 and Richardson extrapolation applies.

enum class MollifierFamily { product_gaussian, polynomial_damped };

inline const char* to_string(MollifierFamily m) {
  return m == MollifierFamily::product_gaussian ? "product-gaussian" : "polynomial-damped";
}

struct Mollifier {
  MollifierFamily family = MollifierFamily::product_gaussian;

  // x-side factor u, u(0) = 1.
  double u(double x0, double x1) const {
    switch (family) {
      case MollifierFamily::product_gaussian:
        return std::exp(-0.5 * (x0 * x0 + x1 * x1));
      case MollifierFamily::polynomial_damped:
        return 1.0 / ((1.0 + x0 * x0) * (1.0 + x1 * x1));
    }
    return 1.0;
  }

  // 1d nodes/weights of the normalized FT weight rho.
  std::pair<std::vector<double>, std::vector<double>> weight_nodes(int n) const {
    std::vector<double> zs, ws;
    if (family == MollifierFamily::product_gaussian) {
      const QuadratureRule& rule = cached_gauss_hermite_unit(n);
      for (int i = 0; i < n; ++i) {
        zs.push_back(rule.nodes[i]);
        ws.push_back(rule.weights[i]);
      }
    } else {
      // rho(z) = exp(-|z|)/2: Laguerre nodes mirrored onto both half-axes.
      const QuadratureRule& rule = cached_gauss_laguerre(n);
      for (int i = 0; i < n; ++i) {
        zs.push_back(-rule.nodes[n - 1 - i]);
        ws.push_back(0.5 * rule.weights[n - 1 - i]);
      }
      for (int i = 0; i < n; ++i) {
        zs.push_back(rule.nodes[i]);
        ws.push_back(0.5 * rule.weights[i]);
      }
    }
    return {zs, ws};
  }
};

struct OscillatoryOptions {
  std::vector<double> regulator_schedule{0.4, 0.2, 0.1, 0.05};
  int nodes_per_axis = 20;
  int max_nodes_per_axis = 44;
  double target_error = 1e-4;

  void validate() const {
    if (regulator_schedule.size() < 2)
      throw ConfigError("OscillatoryOptions: regulator schedule needs >= 2 entries");
    for (std::size_t i = 1; i < regulator_schedule.size(); ++i)
      if (!(regulator_schedule[i] < regulator_schedule[i - 1]))
        throw ConfigError("OscillatoryOptions: regulator schedule must decrease");
    if (nodes_per_axis < 4 || max_nodes_per_axis < nodes_per_axis)
      throw ConfigError("OscillatoryOptions: bad node counts");
    if (!(target_error > 0)) throw ConfigError("OscillatoryOptions: target_error must be positive");
  }
};

struct OscillatoryResult {
  Matrix op;                    // extrapolated to regulator -> 0
  double error_estimate = 0.0;  // extrapolation tail + node refinement
  std::vector<double> regulators;
  std::vector<Matrix> regulated;  // per-regulator raw integrals
  int nodes_per_axis = 0;
};

namespace detail {

inline Matrix oscillatory_once(const TwoDNet& net, const Matrix& f, const DeformationMatrix& q,
                               double sign, const Mollifier& moll, double eps, int nodes) {
  auto [zs, ws] = moll.weight_nodes(nodes);
  const std::size_t nz = zs.size();
  Matrix out(net.dim, net.dim);
  std::vector<Matrix> columns(net.classes.size());
  parallel_for(net.classes.size(), [&](std::size_t c) {
    const JointEigenClass& cls = net.classes[c];
    const auto width = static_cast<Eigen::Index>(cls.indices.size());
    // fixed-order inner sum per z0 row, pairwise tree over rows
    std::vector<Matrix> rows(nz, Matrix::Zero(net.dim, width));
    for (std::size_t i = 0; i < nz; ++i) {
      Matrix& row = rows[i];
      for (std::size_t j = 0; j < nz; ++j) {
        const double z0 = zs[i], z1 = zs[j];
        const double x0 = cls.energy + eps * z0;
        const double x1 = cls.momentum + eps * z1;
        const double weight =
            ws[i] * ws[j] * moll.u(eps * cls.energy + eps * eps * z0,
                                   eps * cls.momentum + eps * eps * z1);
        const auto a = q.apply(sign, x0, x1);
        const SpacetimePoint xx{a[0], a[1]};
        const Vector ph = net.translation_phases(xx);
        for (std::size_t k = 0; k < cls.indices.size(); ++k) {
          const int col = cls.indices[k];
          row.col(static_cast<Eigen::Index>(k)) +=
              weight * (ph.asDiagonal() * f.col(col) * std::conj(ph[col]));
        }
      }
    }
    columns[c] = pairwise_sum(rows, Matrix(Matrix::Zero(net.dim, width)));
  });
  for (std::size_t c = 0; c < net.classes.size(); ++c)
    for (std::size_t k = 0; k < net.classes[c].indices.size(); ++k)
      out.col(net.classes[c].indices[k]) = columns[c].col(static_cast<Eigen::Index>(k));
  return out;
}

// Neville tableau at eps^2 -> 0 over matrices.
inline Matrix richardson_eps2(const std::vector<double>& eps, const std::vector<Matrix>& vals,
                              double* tail = nullptr) {
  const std::size_t n = vals.size();
  std::vector<Matrix> row = vals;
  Matrix prev_diag = row.back();
  for (std::size_t j = 1; j < n; ++j) {
    std::vector<Matrix> next;
    next.reserve(n - j);
    for (std::size_t i = j; i < n; ++i) {
      const double si = eps[i] * eps[i];
      const double sij = eps[i - j] * eps[i - j];
      // polynomial in s = eps^2 evaluated at s = 0
      next.push_back(row[i - j + 1] + (row[i - j + 1] - row[i - j]) * (si / (sij - si)));
    }
    row = std::move(next);
    if (j + 1 == n && tail) *tail = operator_norm(Matrix(row.back() - prev_diag));
    prev_diag = row.back();
  }
  if (n == 1 && tail) *tail = 0.0;
  return row.back();
}

}  // namespace detail

inline OscillatoryResult warp_oscillatory(const TwoDNet& net, const Matrix& f,
                                          const DeformationMatrix& q, double sign,
                                          const Mollifier& moll,
                                          const OscillatoryOptions& opt = {}) {
  q.validate();
  opt.validate();
  OscillatoryResult res;
  res.regulators = opt.regulator_schedule;

  int nodes = opt.nodes_per_axis;
  double node_error = std::numeric_limits<double>::infinity();
  std::vector<Matrix> regulated;
  while (true) {
    regulated.clear();
    for (double eps : opt.regulator_schedule)
      regulated.push_back(detail::oscillatory_once(net, f, q, sign, moll, eps, nodes));
    const int finer = nodes + nodes / 2;
    if (finer > opt.max_nodes_per_axis) break;
    // refine only the smallest regulator (dominant for the limit) to estimate
    // the node error
    Matrix check = detail::oscillatory_once(net, f, q, sign, moll,
                                            opt.regulator_schedule.back(), finer);
    node_error = operator_norm(Matrix(check - regulated.back()));
    if (node_error <= 0.1 * opt.target_error) break;
    nodes = finer;
  }
  if (!(node_error <= opt.target_error))
    throw QuadratureBudgetError("warp_oscillatory: node refinement stalled at error " +
                                std::to_string(node_error));

  double tail = 0.0;
  res.op = detail::richardson_eps2(opt.regulator_schedule, regulated, &tail);
  res.error_estimate = tail + node_error;
  res.regulated = std::move(regulated);
  res.nodes_per_axis = nodes;
  return res;
}

struct DeformedElement {
  WedgeElement original;
  DeformationMatrix q;
  double sign = 1.0;
  Matrix spectral_form;
  OscillatoryResult oscillatory;
  std::vector<std::pair<double, double>> regulator_trace;  // (eps, distance to spectral)
};

inline DeformedElement deform_element(const TwoDNet& net, const WedgeElement& el,
                                      const DeformationMatrix& q, double sign,
                                      const Mollifier& moll, const OscillatoryOptions& opt = {}) {
  DeformedElement d;
  d.original = el;
  d.q = q;
  d.sign = sign;
  d.spectral_form = warp_spectral(net, el.op, q, sign);
  d.oscillatory = warp_oscillatory(net, el.op, q, sign, moll, opt);
  for (std::size_t i = 0; i < d.oscillatory.regulators.size(); ++i)
    d.regulator_trace.emplace_back(
        d.oscillatory.regulators[i],
        operator_norm(Matrix(d.oscillatory.regulated[i] - d.spectral_form)));
  return d;
}

// ---------------------------------------------------------------------------
// Theorem-3.1-style inclusion diagnostic: residuals of deformed wedge
// locality on probe vectors.  Expected to shrink as truncation grows.

inline double deformed_commutant_check(const TwoDNet& net,
                                       const std::vector<WedgeElement>& r_samples,
                                       const std::vector<WedgeElement>& rp_samples,
                                       double kappa, const std::vector<Vector>& probes) {
  DeformationMatrix q{kappa};
  double worst = 0.0;
  for (const WedgeElement& f : r_samples) {
    if (f.wedge != Wedge::W) throw SupportViolationError("deformed_commutant_check: R sample not in W");
    const Matrix fq = warp_spectral(net, f.op, q, +1.0);
    for (const WedgeElement& g : rp_samples) {
      if (g.wedge != Wedge::Wprime)
        throw SupportViolationError("deformed_commutant_check: R' sample not in W'");
      const Matrix gq = warp_spectral(net, g.op, q, -1.0);
      const Matrix comm = fq * gq - gq * fq;
      for (const Vector& psi : probes)
        worst = std::max(worst, (comm * psi).norm() / std::max(1.0, psi.norm()));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Deformed scattering states and the deformed scattering operator.
// Theorem-3.2-style: the deformed out state is the phase e^{-i kappa M^2 / 2}
// applied to the undeformed one (path i); running the asymptotic pipeline on
// deformed generators (path ii) must agree.

inline Vector mass_squared_phase(const TwoDNet& net, double coefficient, const Vector& v) {
  Vector out(net.dim);
  for (int b = 0; b < net.dim; ++b)
    out[b] = std::polar(1.0, coefficient * net.mass_squared(b)) * v[b];
  return out;
}

struct DeformedStateOptions {
  PipelineOptions pipe{};
  bool cross_check_pipeline = true;  // run path (ii) and compare
  double path_tolerance = 1e-6;
};

struct DeformedState {
  ScatteringState state;      // composed deformed state (path i)
  double path_disagreement = 0.0;  // ||path i - path ii||, 0 if not cross-checked
};

namespace detail {

// Path (ii): asymptotics with deformed generators.  The deformed dictionary
// elements keep their wedge tags; R gets +Q, R' gets -Q.
inline Vector deformed_pipeline_state(const TwoDNet& net, const Vector& psi_plus,
                                      const Vector& psi_minus, StateDirection dir, double kappa,
                                      const PipelineOptions& opt) {
  DeformationMatrix q{kappa};
  const bool out = (dir == StateDirection::out);
  const Wedge plus_wedge = out ? Wedge::W : Wedge::Wprime;
  const Wedge minus_wedge = out ? Wedge::Wprime : Wedge::W;

  auto dict_plus = make_field_dictionary(net, plus_wedge, 1, opt.dict);
  auto dict_minus = make_field_dictionary(net, minus_wedge, 2, opt.dict);
  // Fit against the undeformed generators: P_pm F_Q Omega = P_pm F Omega by
  // vacuum invariance, so the targets are unchanged.
  FitResult plus_fit = fit_wedge_approximant(net, dict_plus, psi_plus, true, opt.approximant_tol);
  FitResult minus_fit =
      fit_wedge_approximant(net, dict_minus, psi_minus, false, opt.approximant_tol);

  const double plus_sign = (plus_wedge == Wedge::W) ? 1.0 : -1.0;
  const double minus_sign = (minus_wedge == Wedge::Wprime) ? -1.0 : 1.0;
  WedgeElement plus_def = warp_element(net, plus_fit.element, q, plus_sign);
  WedgeElement minus_def = warp_element(net, minus_fit.element, q, minus_sign);

  const AsymptoticKind plus_kind = out ? AsymptoticKind::out_plus : AsymptoticKind::in_plus;
  const AsymptoticKind minus_kind = out ? AsymptoticKind::out_minus : AsymptoticKind::in_minus;
  AsymptoticField phi_plus = asymptotic_field(net, plus_def, plus_kind, opt.asym);
  AsymptoticField phi_minus = asymptotic_field(net, minus_def, minus_kind, opt.asym);
  return phi_plus.op * (phi_minus.op * net.vacuum());
}

}  // namespace detail

inline DeformedState deformed_scattering_state(const TwoDNet& net, const Vector& psi_plus,
                                               const Vector& psi_minus, StateDirection dir,
                                               double kappa,
                                               const DeformedStateOptions& opt = {}) {
  if (kappa < 0) throw ConfigError("deformed_scattering_state: kappa must be >= 0");
  DeformedState result;
  ScatteringState base = exact_scattering_state(net, psi_plus, psi_minus, dir);
  const double coeff = (dir == StateDirection::out) ? -0.5 * kappa : 0.5 * kappa;
  result.state = base;
  result.state.composed = mass_squared_phase(net, coeff, base.composed);
  result.state.norm_factorization_residual =
      std::abs(result.state.composed.norm() - psi_plus.norm() * psi_minus.norm());

  if (opt.cross_check_pipeline) {
    const Vector via_pipeline =
        detail::deformed_pipeline_state(net, psi_plus, psi_minus, dir, kappa, opt.pipe);
    result.path_disagreement = (via_pipeline - result.state.composed).norm();
    if (result.path_disagreement > opt.path_tolerance)
      throw PathDisagreementError(
          "deformed_scattering_state: phase route and deformed pipeline differ by " +
          std::to_string(result.path_disagreement));
  }
  return result;
}

struct DeformedSMatrixOptions {
  DeformedStateOptions state{};
  double rank_tol = 1e-10;
};

struct DeformedSMatrix {
  SMatrixResult base;              // S_kappa data (identity_residual is vs 1, informational)
  double kappa = 0.0;
  double formula_residual = 0.0;   // || S_k - e^{i kappa M^2} S || on the span
  std::vector<Complex> pair_eigenphases;       // <chi, S_k chi> for sharp pairs
  std::vector<double> predicted_phase;         // kappa * M^2 per pair
  double max_phase_error = 0.0;
  double interaction_separation = 0.0;  // largest phase gap between two pairs
};

// Pairs of sharp waves: psi_plus an H+ eigenvector, psi_minus an H- one.
inline DeformedSMatrix deformed_scattering_operator(
    const TwoDNet& net, double kappa, const std::vector<std::pair<Vector, Vector>>& pairs,
    const DeformedSMatrixOptions& opt = {}) {
  if (pairs.empty()) throw ConfigError("deformed_scattering_operator: no pairs");
  DeformedSMatrix res;
  res.kappa = kappa;

  const Eigen::Index k = static_cast<Eigen::Index>(pairs.size());
  Matrix outs(net.dim, k), ins(net.dim, k);
  DeformedStateOptions sopt = opt.state;
  for (Eigen::Index i = 0; i < k; ++i) {
    // cross-check a single representative pair; the rest use the phase route
    sopt.cross_check_pipeline = opt.state.cross_check_pipeline && (i == 0);
    const auto& [pp, pm] = pairs[static_cast<std::size_t>(i)];
    outs.col(i) =
        deformed_scattering_state(net, pp, pm, StateDirection::out, kappa, sopt).state.composed;
    ins.col(i) =
        deformed_scattering_state(net, pp, pm, StateDirection::in, kappa, sopt).state.composed;
  }

  SMatrixResult& base = res.base;
  base.out_states = outs;
  base.in_states = ins;
  Eigen::BDCSVD<Matrix> svd(outs, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = (sv.size() ? sv(0) : 0.0) * opt.rank_tol;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff && sv(i) > 0) ++r;
  base.rank = static_cast<int>(r);
  base.rank_deficient = (r < k);
  base.spans_full_space = (r == net.dim);
  base.span_basis = svd.matrixU().leftCols(r);
  Matrix x = base.span_basis.adjoint() * outs;
  Matrix y = base.span_basis.adjoint() * ins;
  Eigen::BDCSVD<Matrix> xsvd(x.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  base.s_span = xsvd.solve(y.transpose()).transpose();
  base.leakage = operator_norm(Matrix(ins - base.span_basis * y));
  base.identity_residual =
      operator_norm(Matrix(base.s_span - Matrix::Identity(r, r))) + base.leakage;
  base.unitarity_residual =
      operator_norm(Matrix(base.s_span.adjoint() * base.s_span - Matrix::Identity(r, r)));

  // Corollary-style formula: S_kappa = e^{i kappa (H^2 - P^2)} S with S = 1
  // here; compare on the span in Q coordinates.
  Matrix phase_q(net.dim, r);
  for (Eigen::Index c = 0; c < r; ++c)
    phase_q.col(c) = mass_squared_phase(net, kappa, base.span_basis.col(c));
  const Matrix formula_span = base.span_basis.adjoint() * phase_q;
  res.formula_residual = operator_norm(Matrix(base.s_span - formula_span)) +
                         operator_norm(Matrix(phase_q - base.span_basis * formula_span));

  // Per-pair eigenphases against kappa * 2 p q (sharp pairs: the composed
  // state is a joint M^2 eigenvector, so <out|in> / (|out||in|) is e^{i k M^2}).
  for (Eigen::Index i = 0; i < k; ++i) {
    const Complex phase =
        (outs.col(i).adjoint() * ins.col(i)).value() / (outs.col(i).norm() * ins.col(i).norm());
    res.pair_eigenphases.push_back(phase);
    Eigen::Index arg_max = 0;
    outs.col(i).cwiseAbs().maxCoeff(&arg_max);
    const double m2 = net.mass_squared(static_cast<int>(arg_max));
    res.predicted_phase.push_back(kappa * m2);
    const Complex predicted = std::polar(1.0, kappa * m2);
    res.max_phase_error = std::max(res.max_phase_error, std::abs(phase - predicted));
  }
  for (std::size_t i = 0; i < res.predicted_phase.size(); ++i)
    for (std::size_t j = i + 1; j < res.predicted_phase.size(); ++j) {
      double gap = std::abs(res.predicted_phase[i] - res.predicted_phase[j]);
      gap = std::fmod(gap, 2.0 * kPi);
      gap = std::min(gap, 2.0 * kPi - gap);
      res.interaction_separation = std::max(res.interaction_separation, gap);
    }
  return res;
}

}  // namespace wedgewave

#endif  // WEDGEWAVE_WARP_HPP
