#ifndef WEDGEWAVE_FOCK_HPP
#define WEDGEWAVE_FOCK_HPP

#include "wedgewave/common.hpp"
#include "wedgewave/interval.hpp"
#include "wedgewave/linalg.hpp"

#include <limits>
#include <map>
#include <optional>
#include <sstream>

namespace wedgewave {

// ---------------------------------------------------------------------------
// One chiral factor: bosonic modes on a strictly positive momentum grid,
// truncated by a per-mode occupation cap and a total-energy cap.

struct ModeGrid {
  double spacing = 1.0;  // momentum step
  int count = 1;         // number of modes

  double momentum(int mode) const { return spacing * (mode + 1); }

  std::vector<double> momenta() const {
    std::vector<double> ks(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) ks[static_cast<std::size_t>(k)] = momentum(k);
    return ks;
  }

  bool operator==(const ModeGrid& o) const {
    return spacing == o.spacing && count == o.count;
  }

  void validate() const {
    if (!(spacing > 0.0)) throw ConfigError("ModeGrid: spacing must be positive");
    if (count < 1) throw ConfigError("ModeGrid: count must be positive");
  }
};

using Occupation = std::vector<int>;

struct FockSpace {
  ModeGrid grid;
  int per_mode_cap = 1;
  double energy_cap = std::numeric_limits<double>::infinity();

  std::vector<Occupation> basis;  // graded by total momentum, see build_fock_space
  std::vector<int> total_units;   // sum_k n_k * (k+1), i.e. momentum / spacing
  int dim = 0;
  int vacuum_index = 0;
  std::map<Occupation, int> index_of;

  double momentum_eigenvalue(int b) const { return total_units[static_cast<std::size_t>(b)] * grid.spacing; }

  int lookup(const Occupation& occ) const {
    auto it = index_of.find(occ);
    return it == index_of.end() ? -1 : it->second;
  }

  Vector vacuum() const {
    Vector v = Vector::Zero(dim);
    v[vacuum_index] = 1.0;
    return v;
  }
};

// Basis order: graded by total momentum, then lexicographically decreasing,
// so low modes fill first within a grade.  (0,0) < (1,0) < (2,0) < (0,1) ...
inline FockSpace build_fock_space(const ModeGrid& grid, int per_mode_cap,
                                  double energy_cap = std::numeric_limits<double>::infinity(),
                                  int dim_bound = 20000) {
  grid.validate();
  if (per_mode_cap < 1) throw ConfigError("build_fock_space: per_mode_cap must be positive");
  if (!(energy_cap > 0.0)) throw ConfigError("build_fock_space: energy_cap must be positive");

  FockSpace space;
  space.grid = grid;
  space.per_mode_cap = per_mode_cap;
  space.energy_cap = energy_cap;

  long long max_units_ll = std::numeric_limits<long long>::max();
  if (std::isfinite(energy_cap))
    max_units_ll = static_cast<long long>(std::floor(energy_cap / grid.spacing + 1e-9));

  // Depth-first enumeration with pruning on the running momentum total.
  Occupation occ(static_cast<std::size_t>(grid.count), 0);
  std::vector<std::pair<int, Occupation>> admitted;  // (total units, tuple)
  std::function<void(int, long long)> visit = [&](int mode, long long units) {
    if (mode == grid.count) {
      if (static_cast<int>(admitted.size()) >= dim_bound)
        throw DimensionOverflowError(
            "build_fock_space: dimension exceeds bound " + std::to_string(dim_bound));
      admitted.emplace_back(static_cast<int>(units), occ);
      return;
    }
    const long long unit = mode + 1;
    for (int n = 0; n <= per_mode_cap; ++n) {
      const long long next = units + unit * n;
      if (next > max_units_ll) break;
      occ[static_cast<std::size_t>(mode)] = n;
      visit(mode + 1, next);
    }
    occ[static_cast<std::size_t>(mode)] = 0;
  };
  visit(0, 0);

  std::sort(admitted.begin(), admitted.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first < b.first;
              return a.second > b.second;  // descending lexicographic within a grade
            });

  space.dim = static_cast<int>(admitted.size());
  space.basis.reserve(admitted.size());
  space.total_units.reserve(admitted.size());
  for (int i = 0; i < space.dim; ++i) {
    space.basis.push_back(admitted[static_cast<std::size_t>(i)].second);
    space.total_units.push_back(admitted[static_cast<std::size_t>(i)].first);
    space.index_of.emplace(admitted[static_cast<std::size_t>(i)].second, i);
  }
  space.vacuum_index = space.lookup(Occupation(static_cast<std::size_t>(grid.count), 0));
  if (space.vacuum_index != 0) throw Error("build_fock_space: vacuum not first in graded order");
  if (space.dim < 2)
    throw DimensionOverflowError("build_fock_space: truncation leaves dim < 2");
  return space;
}

// ---------------------------------------------------------------------------
// Operators on one factor.

struct ChiralOperator {
  Matrix matrix;
  std::string label;
  std::optional<Interval> support;
};

struct LadderPair {
  ChiralOperator annihilator;
  ChiralOperator creator;
};

// Matrix elements sqrt(n+1); transitions leaving the truncated basis drop out,
// so creator is exactly the adjoint of annihilator.
inline LadderPair ladder_matrices(const FockSpace& space, int mode) {
  if (mode < 0 || mode >= space.grid.count)
    throw GridMismatchError("ladder_matrices: mode index out of range");
  Matrix a = Matrix::Zero(space.dim, space.dim);
  for (int b = 0; b < space.dim; ++b) {
    const Occupation& occ = space.basis[static_cast<std::size_t>(b)];
    const int n = occ[static_cast<std::size_t>(mode)];
    if (n == 0) continue;
    Occupation lower = occ;
    lower[static_cast<std::size_t>(mode)] = n - 1;
    const int target = space.lookup(lower);
    if (target < 0) throw Error("ladder_matrices: admitted set not downward closed");
    a(target, b) = std::sqrt(static_cast<double>(n));
  }
  LadderPair pair;
  pair.annihilator = {a, "a[" + std::to_string(mode) + "]", std::nullopt};
  pair.creator = {a.adjoint(), "adag[" + std::to_string(mode) + "]", std::nullopt};
  return pair;
}

// Diagonal generator of lightline translations; eigenvalue sum_k n_k k Delta.
inline ChiralOperator chiral_momentum(const FockSpace& space) {
  Matrix p = Matrix::Zero(space.dim, space.dim);
  for (int b = 0; b < space.dim; ++b) p(b, b) = space.momentum_eigenvalue(b);
  return {p, "P", std::nullopt};
}

// ---------------------------------------------------------------------------
// Test functions: complex momentum profiles on the grid, with a measured
// nominal support.  With profile fhat(k) = amp(k) e^{-ikc} the position-space
// signal p(x) = sum_k fhat(k) e^{ikx} peaks at x = c and is periodic with
// period 2*pi/spacing; the support radius is grown until the mass outside
// drops below the requested leakage tolerance.

struct TestFunction {
  ModeGrid grid;
  double center = 0.0;
  double width = 1.0;
  Vector momentum_profile;
  Interval nominal_support;
  double leakage = 0.0;            // measured mass fraction outside nominal_support
  double support_tolerance = 1e-3; // the delta_supp it was computed for
};

namespace detail {

// Measure the smallest symmetric window about `center` holding all but
// delta_supp of the position-space mass over one period.
inline void measure_support(TestFunction& f, double delta_supp, int samples = 4096) {
  f.support_tolerance = delta_supp;
  const double total_profile = f.momentum_profile.squaredNorm();
  if (total_profile <= 0.0) {
    f.nominal_support = {f.center, f.center};
    f.leakage = 0.0;
    return;
  }
  const double period = 2.0 * kPi / f.grid.spacing;
  std::vector<double> mass(static_cast<std::size_t>(samples));
  double total = 0.0;
  for (int j = 0; j < samples; ++j) {
    const double u = (static_cast<double>(j) / samples - 0.5) * period;
    Complex p = 0.0;
    for (int k = 0; k < f.grid.count; ++k)
      p += f.momentum_profile[k] * std::polar(1.0, f.grid.momentum(k) * (f.center + u));
    mass[static_cast<std::size_t>(j)] = std::norm(p);
    total += std::norm(p);
  }
  // accumulate outward from the center
  std::vector<std::pair<double, double>> by_radius;  // (|u|, mass)
  by_radius.reserve(mass.size());
  for (int j = 0; j < samples; ++j) {
    const double u = (static_cast<double>(j) / samples - 0.5) * period;
    by_radius.emplace_back(std::abs(u), mass[static_cast<std::size_t>(j)]);
  }
  std::sort(by_radius.begin(), by_radius.end());
  double inside = 0.0;
  double radius = 0.5 * period;
  for (const auto& [r, m] : by_radius) {
    inside += m;
    if (inside >= (1.0 - delta_supp) * total) {
      radius = r;
      break;
    }
  }
  f.nominal_support = {f.center - radius, f.center + radius};
  f.leakage = std::max(0.0, 1.0 - inside / total);
}

}  // namespace detail

inline TestFunction gaussian_packet(const ModeGrid& grid, double center, double width,
                                    double momentum_center, double delta_supp = 1e-3) {
  grid.validate();
  if (!(width > 0.0)) throw ConfigError("gaussian_packet: width must be positive");
  TestFunction f;
  f.grid = grid;
  f.center = center;
  f.width = width;
  f.momentum_profile.resize(grid.count);
  for (int k = 0; k < grid.count; ++k) {
    const double kk = grid.momentum(k);
    const double amp = std::exp(-0.5 * width * width * (kk - momentum_center) * (kk - momentum_center));
    f.momentum_profile[k] = amp * std::polar(1.0, -kk * center);
  }
  const double norm = f.momentum_profile.norm();
  if (norm > 0) f.momentum_profile /= norm;
  detail::measure_support(f, delta_supp);
  return f;
}

inline TestFunction test_function_from_profile(const ModeGrid& grid, const Vector& profile,
                                               double center = 0.0, double delta_supp = 1e-3) {
  grid.validate();
  if (profile.size() != grid.count)
    throw GridMismatchError("test_function_from_profile: profile length != mode count");
  TestFunction f;
  f.grid = grid;
  f.center = center;
  f.width = 0.0;
  f.momentum_profile = profile;
  detail::measure_support(f, delta_supp);
  return f;
}

// Translate by s: profile picks up e^{-iks}, support shifts right by s.
inline TestFunction translated(const TestFunction& f, double s) {
  TestFunction g = f;
  for (int k = 0; k < g.grid.count; ++k)
    g.momentum_profile[k] *= std::polar(1.0, -g.grid.momentum(k) * s);
  g.center += s;
  g.nominal_support = f.nominal_support.shifted(s);
  return g;
}

// Spatial reflection x -> -x: conjugate profile, mirrored support.
inline TestFunction reflected(const TestFunction& f) {
  TestFunction g = f;
  g.momentum_profile = f.momentum_profile.conjugate();
  g.center = -f.center;
  g.nominal_support = f.nominal_support.reflected();
  return g;
}

// ---------------------------------------------------------------------------
// Smeared fields and interval-localized elements.

// phi(f) = sum_k fhat(k) a_k + conj(fhat(k)) adag_k; Hermitian by construction.
inline ChiralOperator field_operator(const FockSpace& space, const TestFunction& f) {
  if (!(f.grid == space.grid))
    throw GridMismatchError("field_operator: test function lives on a different grid");
  Matrix phi = Matrix::Zero(space.dim, space.dim);
  for (int k = 0; k < space.grid.count; ++k) {
    if (f.momentum_profile[k] == Complex(0.0)) continue;
    LadderPair lad = ladder_matrices(space, k);
    phi += f.momentum_profile[k] * lad.annihilator.matrix +
           std::conj(f.momentum_profile[k]) * lad.creator.matrix;
  }
  std::ostringstream label;
  label << "phi(c=" << f.center << ",w=" << f.width << ")";
  return {phi, label.str(), f.nominal_support};
}

// Weyl variant exp(i phi(f)), for configs that prefer bounded generators of
// unit norm over the fields themselves.
inline ChiralOperator weyl_operator(const FockSpace& space, const TestFunction& f) {
  ChiralOperator phi = field_operator(space, f);
  Matrix w = hermitian_function(phi.matrix, [](double x) { return std::polar(1.0, x); });
  return {w, "weyl " + phi.label, f.nominal_support};
}

inline ChiralOperator translate_chiral(const FockSpace& space, const ChiralOperator& a, double s) {
  Vector phases(space.dim);
  for (int b = 0; b < space.dim; ++b)
    phases[b] = std::polar(1.0, space.momentum_eigenvalue(b) * s);
  ChiralOperator out;
  out.matrix = phases.asDiagonal() * a.matrix * phases.conjugate().asDiagonal();
  out.label = a.label + " shifted " + std::to_string(s);
  if (a.support) out.support = a.support->shifted(s);
  return out;
}

struct LocalityProfile {
  double commutator_norm = 0.0;
  double norm_product = 0.0;      // ||phi(f)|| * ||phi(g)|| for scale
  bool supports_overlap = false;  // reported as a warning, value still valid
};

// Truncation-leakage diagnostic: ||[phi(f), phi(g)]||.  Never asserted to be
// zero; exact locality is lost at finite truncation.
inline LocalityProfile local_commutator_profile(const FockSpace& space,
                                                const TestFunction& f,
                                                const TestFunction& g) {
  ChiralOperator pf = field_operator(space, f);
  ChiralOperator pg = field_operator(space, g);
  LocalityProfile out;
  out.commutator_norm = operator_norm(pf.matrix * pg.matrix - pg.matrix * pf.matrix);
  out.norm_product = operator_norm(pf.matrix) * operator_norm(pg.matrix);
  out.supports_overlap = f.nominal_support.intersects(g.nominal_support);
  return out;
}

}  // namespace wedgewave

#endif  // WEDGEWAVE_FOCK_HPP
