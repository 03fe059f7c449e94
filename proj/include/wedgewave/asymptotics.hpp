#ifndef WEDGEWAVE_ASYMPTOTICS_HPP
#define WEDGEWAVE_ASYMPTOTICS_HPP

#include "wedgewave/kernel.hpp"
#include "wedgewave/net.hpp"

#include <array>

namespace wedgewave {

// ---------------------------------------------------------------------------
// Light-ray time averaging.
//
// Along the ray t -> (t, +t) only factor 2 is translated (s1 = 0), along
// t -> (t, -t) only factor 1; the conjugated matrix picks up the elementwise
// phase e^{i(w_a - w_b) t} with w_b = sqrt(2) * Delta * m_ray(b).  The time
// integral therefore reduces to one scalar oscillatory integral per distinct
// integer frequency difference.

enum class Ray { plus, minus };

struct QuadratureBudget {
  int initial_nodes = 129;
  int max_nodes = 4097;
  double target_error = 1e-10;

  void validate() const {
    if (initial_nodes < 2 || max_nodes < 2 * initial_nodes - 1)
      throw ConfigError("QuadratureBudget: need max_nodes >= 2*initial_nodes-1");
    if (!(target_error > 0)) throw ConfigError("QuadratureBudget: target_error must be positive");
  }
};

struct SmearResult {
  Matrix op;
  double quad_error = 0.0;  // absolute, includes the window tail
  int nodes = 0;
};

namespace detail {

inline const std::vector<int>& ray_units(const TwoDNet& net, Ray ray) {
  return ray == Ray::plus ? net.m2 : net.m1;
}

inline double ray_frequency_step(const TwoDNet& net, Ray ray) {
  return kSqrt2 * (ray == Ray::plus ? net.factor2.grid.spacing : net.factor1.grid.spacing);
}

// One scalar integral of h_T(t) e^{i w t} per frequency index 0..mmax.
inline std::vector<Complex> kernel_oscillatory_integrals(const AveragingKernel& kernel,
                                                         double freq_step, int mmax, int nodes) {
  auto [a, b] = kernel.window();
  const QuadratureRule& rule = cached_gauss_legendre(nodes);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  std::vector<double> hvals(static_cast<std::size_t>(nodes));
  std::vector<double> ts(static_cast<std::size_t>(nodes));
  for (int i = 0; i < nodes; ++i) {
    ts[static_cast<std::size_t>(i)] = mid + half * rule.nodes[i];
    hvals[static_cast<std::size_t>(i)] =
        kernel.value(ts[static_cast<std::size_t>(i)]) * rule.weights[i] * half;
  }
  std::vector<Complex> out(static_cast<std::size_t>(mmax + 1));
  parallel_for(static_cast<std::size_t>(mmax + 1), [&](std::size_t d) {
    const double w = freq_step * static_cast<double>(d);
    std::vector<Complex> terms(static_cast<std::size_t>(nodes));
    for (int i = 0; i < nodes; ++i)
      terms[static_cast<std::size_t>(i)] =
          hvals[static_cast<std::size_t>(i)] * std::polar(1.0, w * ts[static_cast<std::size_t>(i)]);
    out[d] = pairwise_sum(terms, Complex(0.0));
  });
  return out;
}

}  // namespace detail

inline SmearResult smear_along_ray(const TwoDNet& net, const Matrix& f,
                                   const AveragingKernel& kernel, Ray ray,
                                   const QuadratureBudget& budget = {}) {
  kernel.validate();
  budget.validate();
  const auto& units = detail::ray_units(net, ray);
  const double step = detail::ray_frequency_step(net, ray);
  int mmax = 0;
  for (int u : units) mmax = std::max(mmax, u);

  const double tail = kernel.tail_mass();
  int nodes = budget.initial_nodes;
  std::vector<Complex> cur = detail::kernel_oscillatory_integrals(kernel, step, mmax, nodes);
  double scalar_err = std::numeric_limits<double>::infinity();
  while (true) {
    const int next = 2 * nodes - 1;
    if (next > budget.max_nodes) break;
    std::vector<Complex> fine = detail::kernel_oscillatory_integrals(kernel, step, mmax, next);
    scalar_err = 0.0;
    for (std::size_t d = 0; d < cur.size(); ++d)
      scalar_err = std::max(scalar_err, std::abs(fine[d] - cur[d]));
    cur = std::move(fine);
    nodes = next;
    if (scalar_err + tail <= budget.target_error) break;
  }
  const double fnorm = operator_norm(f);
  if (!(scalar_err + tail <= budget.target_error))
    throw QuadratureBudgetError(
        "smear_along_ray: could not reach target error " + std::to_string(budget.target_error) +
        " within " + std::to_string(budget.max_nodes) + " nodes (got " +
        std::to_string(scalar_err + tail) + ")");

  SmearResult result;
  result.nodes = nodes;
  result.quad_error = (scalar_err + tail) * fnorm;
  result.op.resize(net.dim, net.dim);
  for (int a = 0; a < net.dim; ++a) {
    const int ua = units[static_cast<std::size_t>(a)];
    for (int b = 0; b < net.dim; ++b) {
      const int d = ua - units[static_cast<std::size_t>(b)];
      const Complex i_d = d >= 0 ? cur[static_cast<std::size_t>(d)]
                                 : std::conj(cur[static_cast<std::size_t>(-d)]);
      result.op(a, b) = f(a, b) * i_d;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Asymptotic fields.  The unprimed cases are direct light-ray limits; the
// primed-wedge cases default to conjugation with the geometric J (they also
// admit a direct T -> -/+ infinity limit, which tests compare against).

enum class AsymptoticKind { out_plus, in_minus, in_plus, out_minus };

inline const char* to_string(AsymptoticKind k) {
  switch (k) {
    case AsymptoticKind::out_plus: return "Phi+out";
    case AsymptoticKind::in_minus: return "Phi-in";
    case AsymptoticKind::in_plus: return "Phi+in";
    case AsymptoticKind::out_minus: return "Phi-out";
  }
  return "?";
}

struct AsymptoticOptions {
  std::vector<double> schedule{8.0, 16.0, 32.0, 64.0};  // |T| values, ascending
  KernelProfile profile = KernelProfile::gaussian;
  double kernel_exponent = 0.5;
  double window_halfwidth = 8.0;
  QuadratureBudget budget{};
  bool primed_via_reflection = true;
  bool enforce_monotone = true;

  void validate() const {
    if (schedule.size() < 2) throw ConfigError("AsymptoticOptions: schedule needs >= 2 entries");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      if (!(schedule[i] > 0)) throw ConfigError("AsymptoticOptions: schedule entries must be positive");
      if (i > 0 && !(schedule[i] > schedule[i - 1]))
        throw ConfigError("AsymptoticOptions: schedule must increase");
    }
    budget.validate();
  }
};

struct ConvergenceTrace {
  std::vector<double> T;            // signed schedule actually used
  std::vector<double> residual;     // ||A_j - A_{j-1}||, NaN for the first entry
  std::vector<double> bound;        // kernel-model bound on the vacuum residual
  std::vector<double> vacuum_residual;  // ||A_j Omega - P_pm F Omega||
  double quad_error = 0.0;
  bool monotone_ok = true;
  double final_residual = 0.0;
};

struct AsymptoticField {
  Matrix op;
  ConvergenceTrace trace;
  AsymptoticKind kind;
};

namespace detail {

inline bool plus_kind(AsymptoticKind k) {
  return k == AsymptoticKind::out_plus || k == AsymptoticKind::in_plus;
}

inline bool out_kind(AsymptoticKind k) {
  return k == AsymptoticKind::out_plus || k == AsymptoticKind::out_minus;
}

inline Wedge required_wedge(AsymptoticKind k) {
  return (k == AsymptoticKind::out_plus || k == AsymptoticKind::in_minus) ? Wedge::W
                                                                          : Wedge::Wprime;
}

}  // namespace detail

inline AsymptoticField asymptotic_field(const TwoDNet& net, const WedgeElement& el,
                                        AsymptoticKind kind, const AsymptoticOptions& opt = {}) {
  opt.validate();
  if (el.wedge != detail::required_wedge(kind))
    throw SupportViolationError(std::string("asymptotic_field: ") + to_string(kind) +
                                " needs an element of " +
                                (detail::required_wedge(kind) == Wedge::W ? "R (wedge W)"
                                                                          : "R' (wedge W')"));

  if ((kind == AsymptoticKind::in_plus || kind == AsymptoticKind::out_minus) &&
      opt.primed_via_reflection) {
    // Phi+in(F') = J Phi+out(JF'J) J  and  Phi-out(F') = J Phi-in(JF'J) J.
    const ReflectionJ j = reflection(net);
    const WedgeElement mirrored = reflect(net, j, el);
    const AsymptoticKind inner = (kind == AsymptoticKind::in_plus) ? AsymptoticKind::out_plus
                                                                   : AsymptoticKind::in_minus;
    AsymptoticField f = asymptotic_field(net, mirrored, inner, opt);
    f.op = f.op.conjugate();
    f.kind = kind;
    return f;
  }

  const Ray ray = detail::plus_kind(kind) ? Ray::plus : Ray::minus;
  const double tsign = detail::out_kind(kind) ? 1.0 : -1.0;
  const auto& units = detail::ray_units(net, ray);
  const double step = detail::ray_frequency_step(net, ray);

  // Kernel-model decay data: smallest present off-block frequency and the
  // norms it multiplies.
  int dmin = 0;
  for (int a = 0; a < net.dim; ++a)
    for (int b = 0; b < net.dim; ++b) {
      const int d = std::abs(units[static_cast<std::size_t>(a)] - units[static_cast<std::size_t>(b)]);
      if (d != 0 && std::abs(el.op(a, b)) > 1e-15 && (dmin == 0 || d < dmin)) dmin = d;
    }
  const Vector omega_vec = el.op * net.vacuum();
  const Vector target = detail::plus_kind(kind) ? project_plus(net, omega_vec)
                                                : project_minus(net, omega_vec);
  const double offvac = (omega_vec - target).norm();  // ||(1 - P_pm) F Omega||

  AsymptoticField out;
  out.kind = kind;
  ConvergenceTrace& trace = out.trace;
  const double opnorm = operator_norm(el.op);

  Matrix prev;
  for (std::size_t j = 0; j < opt.schedule.size(); ++j) {
    AveragingKernel kernel;
    kernel.profile = opt.profile;
    kernel.exponent = opt.kernel_exponent;
    kernel.center = tsign * opt.schedule[j];
    kernel.window_halfwidth = opt.window_halfwidth;
    SmearResult s = smear_along_ray(net, el.op, kernel, ray, opt.budget);

    trace.T.push_back(kernel.center);
    trace.quad_error = std::max(trace.quad_error, s.quad_error);
    trace.vacuum_residual.push_back((s.op * net.vacuum() - target).norm());
    trace.bound.push_back(dmin == 0 ? 0.0
                                    : offvac * kernel.base_fourier_abs(kernel.scale() * step * dmin));
    if (j == 0) {
      trace.residual.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      trace.residual.push_back(operator_norm(s.op - prev));
    }
    prev = std::move(s.op);
  }

  // Non-convergence criterion: each consecutive residual must at least halve,
  // unless it is already at the quadrature floor.
  const double floor = 10.0 * trace.quad_error + 1e-13 * opnorm;
  for (std::size_t j = 2; j < trace.residual.size(); ++j) {
    if (trace.residual[j] > std::max(0.5 * trace.residual[j - 1], floor)) {
      trace.monotone_ok = false;
      if (opt.enforce_monotone)
        throw NonConvergenceError(
            std::string("asymptotic_field: residuals stopped contracting for ") +
            to_string(kind) + " (" + std::to_string(trace.residual[j - 1]) + " -> " +
            std::to_string(trace.residual[j]) + ")");
    }
  }
  trace.final_residual =
      (trace.residual.size() > 1 ? trace.residual.back() : 0.0) + trace.quad_error;
  out.op = std::move(prev);
  return out;
}

// ---------------------------------------------------------------------------
// Wedge dictionaries: families of one-factor smeared-field words used to
// approximate target waves by least squares (the constructive stand-in for
// the cyclicity argument).

struct DictionaryOptions {
  int base_functions = 4;
  int max_degree = -1;      // -1: highest quanta count in the factor basis
  double margin = 0.25;     // gap between the support edge and the origin
  double delta_supp = 1e-3;
  std::array<double, 3> widths{0.9, 1.3, 1.8};
};

namespace detail {

inline int max_quanta(const FockSpace& space) {
  int q = 0;
  for (const auto& occ : space.basis) {
    int s = 0;
    for (int n : occ) s += n;
    q = std::max(q, s);
  }
  return q;
}

inline void multisets(int base, int degree, std::vector<int>& cur,
                      std::vector<std::vector<int>>& out, int start) {
  if (static_cast<int>(cur.size()) == degree) {
    out.push_back(cur);
    return;
  }
  for (int i = start; i < base; ++i) {
    cur.push_back(i);
    multisets(base, degree, cur, out, i);
    cur.pop_back();
  }
}

}  // namespace detail

// Elements whose nontrivial factor is `factor` (1 or 2), supported on the
// half-line that wedge membership demands.
inline std::vector<WedgeElement> make_field_dictionary(const TwoDNet& net, Wedge wedge,
                                                       int factor,
                                                       const DictionaryOptions& opt = {}) {
  if (factor != 1 && factor != 2) throw ConfigError("make_field_dictionary: factor must be 1 or 2");
  const FockSpace& space = factor == 1 ? net.factor1 : net.factor2;
  const bool negative_side = (wedge == Wedge::W) == (factor == 1);

  // Base packets centered at 0, then pushed out just past their own radius.
  std::vector<TestFunction> funcs;
  for (int j = 0; j < opt.base_functions; ++j) {
    const double width = opt.widths[static_cast<std::size_t>(j) % opt.widths.size()] *
                         (1.0 + 0.15 * (j / static_cast<int>(opt.widths.size())));
    const double k0 = space.grid.momentum(j % space.grid.count);
    TestFunction f = gaussian_packet(space.grid, 0.0, width, k0, opt.delta_supp);
    const double radius = 0.5 * f.nominal_support.length();
    const double shift = radius + opt.margin + 0.1 * j;
    funcs.push_back(translated(f, negative_side ? -shift : shift));
  }

  const int degree = opt.max_degree > 0 ? opt.max_degree : detail::max_quanta(space);
  std::vector<std::vector<int>> words;
  for (int d = 0; d <= degree; ++d) {
    std::vector<int> cur;
    detail::multisets(opt.base_functions, d, cur, words, 0);
  }

  const Matrix id1 = Matrix::Identity(net.d1, net.d1);
  const Matrix id2 = Matrix::Identity(net.d2, net.d2);
  std::vector<WedgeElement> dict;
  dict.reserve(words.size());
  for (const auto& word : words) {
    Matrix a = Matrix::Identity(space.dim, space.dim);
    WedgeElement el;
    el.wedge = wedge;
    for (int idx : word) {
      a = a * field_operator(space, funcs[static_cast<std::size_t>(idx)]).matrix;
      WedgePair pair;
      if (factor == 1)
        pair.first = funcs[static_cast<std::size_t>(idx)];
      else
        pair.second = funcs[static_cast<std::size_t>(idx)];
      el.pairs.push_back(std::move(pair));
    }
    el.op = factor == 1 ? kron(a, id2) : kron(id1, a);
    el.label = "dict[" + std::to_string(factor) + "]^" + std::to_string(word.size());
    dict.push_back(std::move(el));
  }
  return dict;
}

struct FitResult {
  WedgeElement element;
  Vector coefficients;
  double residual = 0.0;
};

// Least-squares fit of P_pm (sum_a c_a D_a) Omega to the target wave.
inline FitResult fit_wedge_approximant(const TwoDNet& net, const std::vector<WedgeElement>& dict,
                                       const Vector& target, bool plus_side, double tol = 1e-8) {
  if (dict.empty()) throw ApproximantError("fit_wedge_approximant: empty dictionary");
  Matrix columns(net.dim, static_cast<Eigen::Index>(dict.size()));
  const Vector vac = net.vacuum();
  for (std::size_t a = 0; a < dict.size(); ++a) {
    Vector v = dict[a].op * vac;
    columns.col(static_cast<Eigen::Index>(a)) = plus_side ? project_plus(net, v)
                                                          : project_minus(net, v);
  }
  FitResult fit;
  fit.coefficients = least_squares(columns, target, &fit.residual);
  if (fit.residual > tol * std::max(1.0, target.norm()))
    throw ApproximantError("fit_wedge_approximant: best dictionary fit misses target by " +
                           std::to_string(fit.residual));
  WedgeElement el;
  el.wedge = dict.front().wedge;
  el.op = Matrix::Zero(net.dim, net.dim);
  for (std::size_t a = 0; a < dict.size(); ++a)
    el.op += fit.coefficients[static_cast<Eigen::Index>(a)] * dict[a].op;
  el.label = "approximant";
  fit.element = std::move(el);
  return fit;
}

// ---------------------------------------------------------------------------
// Scattering states.

enum class StateDirection { out, in };

struct ScatteringState {
  Vector psi_plus;
  Vector psi_minus;
  StateDirection direction = StateDirection::out;
  Vector composed;
  std::optional<ConvergenceTrace> trace;  // nullopt: exact-chiral route
  double norm_factorization_residual = 0.0;
};

namespace detail {

inline void require_wave(const TwoDNet& net, const Vector& psi, bool plus, const char* who) {
  const Vector proj = plus ? project_plus(net, psi) : project_minus(net, psi);
  if ((psi - proj).norm() > 1e-10 * std::max(1.0, psi.norm()))
    throw Error(std::string(who) + ": wave does not lie in the required lightcone subspace");
}

}  // namespace detail

// In the chiral model the out (and in) state of (psi1 (x) vac2, vac1 (x) psi2)
// is exactly psi1 (x) psi2; this is the cross-checked shortcut.
inline ScatteringState exact_scattering_state(const TwoDNet& net, const Vector& psi_plus,
                                              const Vector& psi_minus, StateDirection dir) {
  detail::require_wave(net, psi_plus, true, "exact_scattering_state");
  detail::require_wave(net, psi_minus, false, "exact_scattering_state");
  const Vector psi1 = extract_plus(net, psi_plus);
  const Vector psi2 = extract_minus(net, psi_minus);
  ScatteringState state;
  state.psi_plus = psi_plus;
  state.psi_minus = psi_minus;
  state.direction = dir;
  state.composed.resize(net.dim);
  for (int i1 = 0; i1 < net.d1; ++i1)
    for (int i2 = 0; i2 < net.d2; ++i2)
      state.composed[net.product_index(i1, i2)] = psi1[i1] * psi2[i2];
  state.norm_factorization_residual =
      std::abs(state.composed.norm() - psi_plus.norm() * psi_minus.norm());
  return state;
}

struct PipelineOptions {
  AsymptoticOptions asym{};
  DictionaryOptions dict{};
  double approximant_tol = 1e-8;
  bool in_via_reflection = true;  // incoming states through J by default
};

inline ScatteringState pipeline_scattering_state(const TwoDNet& net, const Vector& psi_plus,
                                                 const Vector& psi_minus, StateDirection dir,
                                                 const PipelineOptions& opt = {},
                                                 const std::vector<WedgeElement>* plus_dict = nullptr,
                                                 const std::vector<WedgeElement>* minus_dict = nullptr) {
  detail::require_wave(net, psi_plus, true, "pipeline_scattering_state");
  detail::require_wave(net, psi_minus, false, "pipeline_scattering_state");

  if (dir == StateDirection::in && opt.in_via_reflection) {
    // Eq-style duality: in(psi+, psi-) = J out(J psi+, J psi-).
    ScatteringState mirrored = pipeline_scattering_state(
        net, psi_plus.conjugate(), psi_minus.conjugate(), StateDirection::out, opt, plus_dict,
        minus_dict);
    ScatteringState state;
    state.psi_plus = psi_plus;
    state.psi_minus = psi_minus;
    state.direction = StateDirection::in;
    state.composed = mirrored.composed.conjugate();
    state.trace = mirrored.trace;
    state.norm_factorization_residual = mirrored.norm_factorization_residual;
    return state;
  }

  const bool out = (dir == StateDirection::out);
  // out:  F in R (W, factor 1),  F' in R' (W', factor 2)
  // in:   G' in R' (W', factor 1), G in R (W, factor 2)
  const Wedge plus_wedge = out ? Wedge::W : Wedge::Wprime;
  const Wedge minus_wedge = out ? Wedge::Wprime : Wedge::W;
  std::vector<WedgeElement> plus_local, minus_local;
  if (!plus_dict) {
    plus_local = make_field_dictionary(net, plus_wedge, 1, opt.dict);
    plus_dict = &plus_local;
  }
  if (!minus_dict) {
    minus_local = make_field_dictionary(net, minus_wedge, 2, opt.dict);
    minus_dict = &minus_local;
  }

  FitResult plus_fit = fit_wedge_approximant(net, *plus_dict, psi_plus, true, opt.approximant_tol);
  FitResult minus_fit =
      fit_wedge_approximant(net, *minus_dict, psi_minus, false, opt.approximant_tol);

  const AsymptoticKind plus_kind = out ? AsymptoticKind::out_plus : AsymptoticKind::in_plus;
  const AsymptoticKind minus_kind = out ? AsymptoticKind::out_minus : AsymptoticKind::in_minus;
  AsymptoticField phi_plus = asymptotic_field(net, plus_fit.element, plus_kind, opt.asym);
  AsymptoticField phi_minus = asymptotic_field(net, minus_fit.element, minus_kind, opt.asym);

  ScatteringState state;
  state.psi_plus = psi_plus;
  state.psi_minus = psi_minus;
  state.direction = dir;
  state.composed = phi_plus.op * (phi_minus.op * net.vacuum());
  state.trace = (phi_plus.trace.final_residual >= phi_minus.trace.final_residual)
                    ? phi_plus.trace
                    : phi_minus.trace;
  state.norm_factorization_residual =
      std::abs(state.composed.norm() - psi_plus.norm() * psi_minus.norm());
  return state;
}

// ---------------------------------------------------------------------------
// Clustering residual, Eq-style: the two-wave overlap must factorize into
// single-wave overlaps.

inline double check_clustering(const TwoDNet& net, const WedgeElement& f, const WedgeElement& g,
                               const WedgeElement& fp, const WedgeElement& gp,
                               const AsymptoticOptions& opt = {}) {
  AsymptoticField pf = asymptotic_field(net, f, AsymptoticKind::out_plus, opt);
  AsymptoticField pg = asymptotic_field(net, g, AsymptoticKind::out_plus, opt);
  AsymptoticField pfp = asymptotic_field(net, fp, AsymptoticKind::out_minus, opt);
  AsymptoticField pgp = asymptotic_field(net, gp, AsymptoticKind::out_minus, opt);
  const Vector vac = net.vacuum();
  const Complex lhs =
      (pf.op * (pfp.op * vac)).adjoint() * (pg.op * (pgp.op * vac));
  const Complex rhs = ((pf.op * vac).adjoint() * (pg.op * vac)).value() *
                      ((pfp.op * vac).adjoint() * (pgp.op * vac)).value();
  return std::abs(lhs - rhs);
}

// ---------------------------------------------------------------------------
// The scattering operator on the span of two-wave states.

struct ScatteringOperatorOptions {
  bool pipeline = false;          // exact-chiral states by default
  PipelineOptions pipe{};
  double rank_tol = 1e-10;
};

struct SMatrixResult {
  Matrix out_states;  // columns
  Matrix in_states;
  Matrix span_basis;  // Q, orthonormal columns spanning the out states
  Matrix s_span;      // S in Q coordinates
  int rank = 0;
  bool spans_full_space = false;
  bool rank_deficient = false;  // rank < number of pairs (warning, not an error)
  double gram_residual = 0.0;       // isometry vs the tensor Gram
  double identity_residual = 0.0;   // ||S - 1|| on the span
  double unitarity_residual = 0.0;  // ||S*S - 1|| on the span
  double leakage = 0.0;             // in-state mass outside the out span
};

inline SMatrixResult scattering_operator(const TwoDNet& net,
                                         const std::vector<std::pair<Vector, Vector>>& pairs,
                                         const ScatteringOperatorOptions& opt = {}) {
  if (pairs.empty()) throw ConfigError("scattering_operator: no wave pairs given");
  const Eigen::Index k = static_cast<Eigen::Index>(pairs.size());
  SMatrixResult res;
  res.out_states.resize(net.dim, k);
  res.in_states.resize(net.dim, k);

  std::vector<ScatteringState> outs(pairs.size()), ins(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    const auto& [pp, pm] = pairs[i];
    if (opt.pipeline) {
      outs[i] = pipeline_scattering_state(net, pp, pm, StateDirection::out, opt.pipe);
      ins[i] = pipeline_scattering_state(net, pp, pm, StateDirection::in, opt.pipe);
    } else {
      outs[i] = exact_scattering_state(net, pp, pm, StateDirection::out);
      ins[i] = exact_scattering_state(net, pp, pm, StateDirection::in);
    }
  });
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    res.out_states.col(static_cast<Eigen::Index>(i)) = outs[i].composed;
    res.in_states.col(static_cast<Eigen::Index>(i)) = ins[i].composed;
  }

  // Lemma-style isometry: Gram of out states == tensor Gram of the waves.
  Matrix tensor_gram(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      tensor_gram(i, j) = (pairs[static_cast<std::size_t>(i)].first.adjoint() *
                           pairs[static_cast<std::size_t>(j)].first)
                              .value() *
                          (pairs[static_cast<std::size_t>(i)].second.adjoint() *
                           pairs[static_cast<std::size_t>(j)].second)
                              .value();
  res.gram_residual = operator_norm(Matrix(res.out_states.adjoint() * res.out_states) - tensor_gram);

  Eigen::BDCSVD<Matrix> svd(res.out_states, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = (sv.size() ? sv(0) : 0.0) * opt.rank_tol;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff && sv(i) > 0) ++r;
  res.rank = static_cast<int>(r);
  res.rank_deficient = (r < k);
  res.spans_full_space = (r == net.dim);
  res.span_basis = svd.matrixU().leftCols(r);

  // Solve S X = Q* M_in with X = Q* M_out (coordinates of the out states).
  Matrix x = res.span_basis.adjoint() * res.out_states;
  Matrix y = res.span_basis.adjoint() * res.in_states;
  Eigen::BDCSVD<Matrix> xsvd(x.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  res.s_span = xsvd.solve(y.transpose()).transpose();
  res.leakage = operator_norm(Matrix(res.in_states - res.span_basis * y));
  res.identity_residual =
      operator_norm(Matrix(res.s_span - Matrix::Identity(r, r))) + res.leakage;
  res.unitarity_residual =
      operator_norm(Matrix(res.s_span.adjoint() * res.s_span - Matrix::Identity(r, r)));
  return res;
}

// Lemma-style covariance: U(x) (psi+ out psi-) = (U(x)psi+) out (U(x)psi-).
inline double translation_covariance_residual(const TwoDNet& net, const Vector& psi_plus,
                                              const Vector& psi_minus, const SpacetimePoint& x,
                                              bool pipeline = false,
                                              const PipelineOptions& opt = {}) {
  auto build = [&](const Vector& pp, const Vector& pm) {
    return pipeline ? pipeline_scattering_state(net, pp, pm, StateDirection::out, opt)
                    : exact_scattering_state(net, pp, pm, StateDirection::out);
  };
  const Vector lhs = apply_translation(net, build(psi_plus, psi_minus).composed, x);
  const Vector rhs = build(apply_translation(net, psi_plus, x),
                           apply_translation(net, psi_minus, x))
                         .composed;
  return (lhs - rhs).norm();
}

// ---------------------------------------------------------------------------
// The intertwiner between the net and its asymptotic Borchers triple, and the
// asymptotic generators themselves.

struct IntertwinerW {
  Matrix w;  // H+ (x) H- -> H
  double unitarity_residual = 0.0;
  double vacuum_residual = 0.0;
  double covariance_residual = 0.0;  // max over sampled x of ||W U_as(x) - U(x) W||
};

inline IntertwinerW intertwiner_W(const TwoDNet& net) {
  IntertwinerW res;
  res.w = Matrix::Zero(net.dim, net.dim);
  // H+ is ordered like factor 1, H- like factor 2; (alpha, beta) -> alpha*d2+beta.
  for (int alpha = 0; alpha < net.d1; ++alpha) {
    const int i1 = net.factor1_index(net.plus_indices[static_cast<std::size_t>(alpha)]);
    for (int beta = 0; beta < net.d2; ++beta) {
      const int i2 = net.factor2_index(net.minus_indices[static_cast<std::size_t>(beta)]);
      res.w(net.product_index(i1, i2), alpha * net.d2 + beta) = 1.0;
    }
  }
  res.unitarity_residual =
      operator_norm(Matrix(res.w.adjoint() * res.w - Matrix::Identity(net.dim, net.dim)));

  Vector vac_as = Vector::Zero(net.dim);
  vac_as[0] = 1.0;  // vacuum of H+ is index 0 of plus_indices, same on the minus side
  res.vacuum_residual = (res.w * vac_as - net.vacuum()).norm();

  const std::array<SpacetimePoint, 5> xs = {SpacetimePoint{0.0, 0.0}, SpacetimePoint{1.0, 0.0},
                                            SpacetimePoint{0.0, -1.0}, SpacetimePoint{0.6, 0.8},
                                            SpacetimePoint{-1.3, 0.4}};
  for (const auto& x : xs) {
    Vector uas(net.dim);
    for (int alpha = 0; alpha < net.d1; ++alpha) {
      const int bp = net.plus_indices[static_cast<std::size_t>(alpha)];
      for (int beta = 0; beta < net.d2; ++beta) {
        const int bm = net.minus_indices[static_cast<std::size_t>(beta)];
        const double phase = (net.energy[bp] + net.energy[bm]) * x.x0 -
                             (net.momentum[bp] + net.momentum[bm]) * x.x1;
        uas[alpha * net.d2 + beta] = std::polar(1.0, phase);
      }
    }
    const Vector ph = net.translation_phases(x);
    const Matrix lhs = res.w * uas.asDiagonal();
    const Matrix rhs = ph.asDiagonal() * res.w;
    res.covariance_residual = std::max(res.covariance_residual, operator_norm(Matrix(lhs - rhs)));
  }
  return res;
}

// Compress a full-space operator to H+ or H- (with the residual of the claim
// that it leaves the subspace invariant).
inline Matrix restrict_plus(const TwoDNet& net, const Matrix& a, double* invariance = nullptr) {
  Matrix m(net.d1, net.d1);
  for (int i = 0; i < net.d1; ++i)
    for (int j = 0; j < net.d1; ++j)
      m(i, j) = a(net.plus_indices[static_cast<std::size_t>(i)],
                  net.plus_indices[static_cast<std::size_t>(j)]);
  if (invariance) {
    double leak = 0.0;
    for (int j : net.plus_indices) {
      double col = 0.0;
      for (int b = 0; b < net.dim; ++b)
        if (net.m2[static_cast<std::size_t>(b)] != 0) col += std::norm(a(b, j));
      leak = std::max(leak, std::sqrt(col));
    }
    *invariance = std::max(*invariance, leak);
  }
  return m;
}

inline Matrix restrict_minus(const TwoDNet& net, const Matrix& a, double* invariance = nullptr) {
  Matrix m(net.d2, net.d2);
  for (int i = 0; i < net.d2; ++i)
    for (int j = 0; j < net.d2; ++j)
      m(i, j) = a(net.minus_indices[static_cast<std::size_t>(i)],
                  net.minus_indices[static_cast<std::size_t>(j)]);
  if (invariance) {
    double leak = 0.0;
    for (int j : net.minus_indices) {
      double col = 0.0;
      for (int b = 0; b < net.dim; ++b)
        if (net.m1[static_cast<std::size_t>(b)] != 0) col += std::norm(a(b, j));
      leak = std::max(leak, std::sqrt(col));
    }
    *invariance = std::max(*invariance, leak);
  }
  return m;
}

struct AsymptoticTriple {
  IntertwinerW intertwiner;
  std::vector<Matrix> unprimed;  // Phi+out(F)|H+ (x) Phi-in(G)|H-
  std::vector<Matrix> primed;    // Phi+in(F')|H+ (x) Phi-out(G')|H-
  double invariance_residual = 0.0;
  double max_cross_commutator = 0.0;
  double conjugation_residual = 0.0;          // Eq-(W)-style check on product samples
  double scattering_identity_residual = 0.0;  // out = in = tensor for generator waves
};

// Samples are product pairs: unprimed (F, G) with F = A1 (x) A2, G = B1 (x) B2
// both in R, primed likewise in R'.
inline AsymptoticTriple asymptotic_triple_generators(
    const TwoDNet& net, const std::vector<std::pair<WedgePair, WedgePair>>& unprimed_samples,
    const std::vector<std::pair<WedgePair, WedgePair>>& primed_samples,
    const AsymptoticOptions& opt = {}) {
  AsymptoticTriple triple;
  triple.intertwiner = intertwiner_W(net);
  const Matrix& w = triple.intertwiner.w;

  auto factor_matrix = [&](const std::optional<TestFunction>& f, const FockSpace& space) {
    return f ? field_operator(space, *f).matrix
             : Matrix(Matrix::Identity(space.dim, space.dim));
  };

  for (const auto& [fp, gp] : unprimed_samples) {
    WedgeElement f = wedge_factor(net, fp, Wedge::W);
    WedgeElement g = wedge_factor(net, gp, Wedge::W);
    AsymptoticField af = asymptotic_field(net, f, AsymptoticKind::out_plus, opt);
    AsymptoticField ag = asymptotic_field(net, g, AsymptoticKind::in_minus, opt);
    Matrix gen = kron(restrict_plus(net, af.op, &triple.invariance_residual),
                      restrict_minus(net, ag.op, &triple.invariance_residual));
    // Eq-(W)-style conjugation: W gen W* = <B1> <A2> A1 (x) B2 for products.
    const Matrix a1 = factor_matrix(fp.first, net.factor1);
    const Matrix a2 = factor_matrix(fp.second, net.factor2);
    const Matrix b1 = factor_matrix(gp.first, net.factor1);
    const Matrix b2 = factor_matrix(gp.second, net.factor2);
    const Complex ea2 = a2(net.factor2.vacuum_index, net.factor2.vacuum_index);
    const Complex eb1 = b1(net.factor1.vacuum_index, net.factor1.vacuum_index);
    const Matrix closed = ea2 * eb1 * kron(a1, b2);
    triple.conjugation_residual =
        std::max(triple.conjugation_residual, operator_norm(Matrix(w * gen * w.adjoint() - closed)));
    triple.unprimed.push_back(std::move(gen));
  }

  for (const auto& [fp, gp] : primed_samples) {
    WedgeElement f = wedge_factor(net, fp, Wedge::Wprime);
    WedgeElement g = wedge_factor(net, gp, Wedge::Wprime);
    AsymptoticField af = asymptotic_field(net, f, AsymptoticKind::in_plus, opt);
    AsymptoticField ag = asymptotic_field(net, g, AsymptoticKind::out_minus, opt);
    triple.primed.push_back(kron(restrict_plus(net, af.op, &triple.invariance_residual),
                                 restrict_minus(net, ag.op, &triple.invariance_residual)));
  }

  for (const Matrix& a : triple.unprimed)
    for (const Matrix& b : triple.primed)
      triple.max_cross_commutator =
          std::max(triple.max_cross_commutator, operator_norm(Matrix(a * b - b * a)));

  // Scattering in the asymptotic triple is the identity: out, in and tensor
  // composition coincide for waves generated from the samples.
  for (const auto& [fp, gp] : unprimed_samples) {
    WedgeElement f = wedge_factor(net, fp, Wedge::W);
    (void)gp;
    const Vector psi_plus = project_plus(net, f.op * net.vacuum());
    for (const auto& [fq, gq] : primed_samples) {
      WedgeElement gprime = wedge_factor(net, gq, Wedge::Wprime);
      (void)fq;
      const Vector psi_minus = project_minus(net, gprime.op * net.vacuum());
      if (psi_plus.norm() < 1e-12 || psi_minus.norm() < 1e-12) continue;
      const ScatteringState tensor =
          exact_scattering_state(net, psi_plus, psi_minus, StateDirection::out);
      PipelineOptions popt;
      popt.asym = opt;
      const ScatteringState out =
          pipeline_scattering_state(net, psi_plus, psi_minus, StateDirection::out, popt);
      const ScatteringState in =
          pipeline_scattering_state(net, psi_plus, psi_minus, StateDirection::in, popt);
      triple.scattering_identity_residual =
          std::max({triple.scattering_identity_residual, (out.composed - tensor.composed).norm(),
                    (in.composed - tensor.composed).norm()});
    }
  }
  return triple;
}

}  // namespace wedgewave

#endif  // WEDGEWAVE_ASYMPTOTICS_HPP
