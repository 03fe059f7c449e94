#ifndef WEDGEWAVE_NET_HPP
#define WEDGEWAVE_NET_HPP

#include "wedgewave/fock.hpp"

#include <array>
#include <map>

namespace wedgewave {

// ---------------------------------------------------------------------------
// Tensor product of two chiral factors.  Lightline coordinates:
//   s1 = (x0 - x1)/sqrt(2),  s2 = (x0 + x1)/sqrt(2),
//   U(x) = U1(s1) (x) U2(s2),
//   H = (P1 + P2)/sqrt(2),   P = (P1 - P2)/sqrt(2),
// so factor-1 excitations are the right-movers: ker(H - P) = H1 (x) [vac2].
// Both H and P are diagonal in the product occupation basis; the joint
// spectrum is indexed exactly by the integer pair (m1, m2).

struct SpacetimePoint {
  double x0 = 0.0;
  double x1 = 0.0;

  SpacetimePoint operator+(const SpacetimePoint& o) const { return {x0 + o.x0, x1 + o.x1}; }
  SpacetimePoint operator-() const { return {-x0, -x1}; }
  double s1() const { return (x0 - x1) / kSqrt2; }
  double s2() const { return (x0 + x1) / kSqrt2; }
  bool in_wedge() const { return x1 >= std::abs(x0); }        // W
  bool in_opposite_wedge() const { return -x1 >= std::abs(x0); }  // W'
};

struct JointEigenClass {
  int m1 = 0;
  int m2 = 0;
  double energy = 0.0;
  double momentum = 0.0;
  std::vector<int> indices;
};

struct TwoDNet {
  FockSpace factor1;
  FockSpace factor2;
  int d1 = 0, d2 = 0, dim = 0;

  std::vector<int> m1, m2;   // integer momentum units per product index
  RealVector energy;         // E_b
  RealVector momentum;       // P_b
  int vacuum_index = 0;

  std::vector<JointEigenClass> classes;  // sorted by (m1, m2)
  std::vector<int> class_index;          // product index -> class position

  std::vector<int> plus_indices;   // m2 == 0 (ran P+), ordered like factor1
  std::vector<int> minus_indices;  // m1 == 0 (ran P-), ordered like factor2

  int product_index(int i1, int i2) const { return i1 * d2 + i2; }
  int factor1_index(int b) const { return b / d2; }
  int factor2_index(int b) const { return b % d2; }

  double mass_squared(int b) const {
    return energy[b] * energy[b] - momentum[b] * momentum[b];
  }

  Vector vacuum() const {
    Vector v = Vector::Zero(dim);
    v[vacuum_index] = 1.0;
    return v;
  }

  // e^{i(E_b x0 - P_b x1)} per basis index
  Vector translation_phases(const SpacetimePoint& x) const {
    Vector ph(dim);
    for (int b = 0; b < dim; ++b)
      ph[b] = std::polar(1.0, energy[b] * x.x0 - momentum[b] * x.x1);
    return ph;
  }

  Matrix hamiltonian() const {
    Matrix h = Matrix::Zero(dim, dim);
    for (int b = 0; b < dim; ++b) h(b, b) = energy[b];
    return h;
  }

  Matrix momentum_operator() const {
    Matrix p = Matrix::Zero(dim, dim);
    for (int b = 0; b < dim; ++b) p(b, b) = momentum[b];
    return p;
  }
};

inline TwoDNet build_two_d_net(const FockSpace& f1, const FockSpace& f2,
                               long long dim_bound = 1 << 16) {
  TwoDNet net;
  net.factor1 = f1;
  net.factor2 = f2;
  net.d1 = f1.dim;
  net.d2 = f2.dim;
  const long long dim_ll = static_cast<long long>(f1.dim) * f2.dim;
  if (dim_ll > dim_bound)
    throw DimensionOverflowError("build_two_d_net: product dimension " +
                                 std::to_string(dim_ll) + " exceeds bound");
  net.dim = static_cast<int>(dim_ll);

  net.m1.resize(static_cast<std::size_t>(net.dim));
  net.m2.resize(static_cast<std::size_t>(net.dim));
  net.energy.resize(net.dim);
  net.momentum.resize(net.dim);
  net.class_index.assign(static_cast<std::size_t>(net.dim), -1);

  std::map<std::pair<int, int>, std::vector<int>> grouping;
  for (int i1 = 0; i1 < net.d1; ++i1) {
    for (int i2 = 0; i2 < net.d2; ++i2) {
      const int b = net.product_index(i1, i2);
      const int u1 = f1.total_units[static_cast<std::size_t>(i1)];
      const int u2 = f2.total_units[static_cast<std::size_t>(i2)];
      net.m1[static_cast<std::size_t>(b)] = u1;
      net.m2[static_cast<std::size_t>(b)] = u2;
      const double p1 = u1 * f1.grid.spacing;
      const double p2 = u2 * f2.grid.spacing;
      net.energy[b] = (p1 + p2) / kSqrt2;
      net.momentum[b] = (p1 - p2) / kSqrt2;
      grouping[{u1, u2}].push_back(b);
      if (u2 == 0) net.plus_indices.push_back(b);
      if (u1 == 0) net.minus_indices.push_back(b);
    }
  }
  net.vacuum_index = net.product_index(f1.vacuum_index, f2.vacuum_index);

  for (auto& [key, indices] : grouping) {
    JointEigenClass cls;
    cls.m1 = key.first;
    cls.m2 = key.second;
    cls.energy = (key.first * f1.grid.spacing + key.second * f2.grid.spacing) / kSqrt2;
    cls.momentum = (key.first * f1.grid.spacing - key.second * f2.grid.spacing) / kSqrt2;
    cls.indices = std::move(indices);
    for (int b : cls.indices) net.class_index[static_cast<std::size_t>(b)] = static_cast<int>(net.classes.size());
    net.classes.push_back(std::move(cls));
  }

  // Spectrum condition and vacuum uniqueness hold by integer arithmetic;
  // check them anyway, they are the structural axioms everything rests on.
  for (int b = 0; b < net.dim; ++b) {
    if (net.m1[static_cast<std::size_t>(b)] < 0 || net.m2[static_cast<std::size_t>(b)] < 0)
      throw Error("build_two_d_net: joint spectrum left the forward lightcone");
  }
  const auto& zero_class = net.classes.front();
  if (zero_class.m1 != 0 || zero_class.m2 != 0 || zero_class.indices.size() != 1 ||
      zero_class.indices.front() != net.vacuum_index)
    throw Error("build_two_d_net: vacuum eigenspace is not one-dimensional");

  // plus_indices came out ordered i1*d2 + 0 with i1 ascending, i.e. in
  // factor-1 basis order; same for minus_indices.  The asymptotic-triple and
  // intertwiner code relies on this.
  return net;
}

// ---------------------------------------------------------------------------
// Translations

inline Vector apply_translation(const TwoDNet& net, const Vector& v, const SpacetimePoint& x) {
  return net.translation_phases(x).asDiagonal() * v;
}

inline Matrix apply_translation(const TwoDNet& net, const Matrix& a, const SpacetimePoint& x) {
  Vector ph = net.translation_phases(x);
  return ph.asDiagonal() * a * ph.conjugate().asDiagonal();
}

// ---------------------------------------------------------------------------
// Lightcone subspaces

struct LightconeProjections {
  Matrix plus;
  Matrix minus;
};

inline LightconeProjections lightcone_projections(const TwoDNet& net) {
  LightconeProjections p;
  p.plus = Matrix::Zero(net.dim, net.dim);
  p.minus = Matrix::Zero(net.dim, net.dim);
  for (int b : net.plus_indices) p.plus(b, b) = 1.0;
  for (int b : net.minus_indices) p.minus(b, b) = 1.0;
  return p;
}

inline Vector project_plus(const TwoDNet& net, const Vector& v) {
  Vector out = Vector::Zero(net.dim);
  for (int b : net.plus_indices) out[b] = v[b];
  return out;
}

inline Vector project_minus(const TwoDNet& net, const Vector& v) {
  Vector out = Vector::Zero(net.dim);
  for (int b : net.minus_indices) out[b] = v[b];
  return out;
}

// ran(P+) carried to the factor-1 space and back.
inline Vector extract_plus(const TwoDNet& net, const Vector& v) {
  Vector out(net.d1);
  for (int i = 0; i < net.d1; ++i) out[i] = v[net.plus_indices[static_cast<std::size_t>(i)]];
  return out;
}

inline Vector embed_plus(const TwoDNet& net, const Vector& psi1) {
  Vector out = Vector::Zero(net.dim);
  for (int i = 0; i < net.d1; ++i) out[net.plus_indices[static_cast<std::size_t>(i)]] = psi1[i];
  return out;
}

inline Vector extract_minus(const TwoDNet& net, const Vector& v) {
  Vector out(net.d2);
  for (int i = 0; i < net.d2; ++i) out[i] = v[net.minus_indices[static_cast<std::size_t>(i)]];
  return out;
}

inline Vector embed_minus(const TwoDNet& net, const Vector& psi2) {
  Vector out = Vector::Zero(net.dim);
  for (int i = 0; i < net.d2; ++i) out[net.minus_indices[static_cast<std::size_t>(i)]] = psi2[i];
  return out;
}

// ---------------------------------------------------------------------------
// Wedge algebra elements.  W demands factor-1 supports on the negative and
// factor-2 supports on the positive lightline half-axis; W' is mirrored.

enum class Wedge { W, Wprime };

inline Wedge opposite(Wedge w) { return w == Wedge::W ? Wedge::Wprime : Wedge::W; }

struct WedgePair {
  std::optional<TestFunction> first;   // factor 1 smearing, nullopt = identity
  std::optional<TestFunction> second;  // factor 2 smearing
};

struct WedgeElement {
  Matrix op;
  Wedge wedge = Wedge::W;
  std::vector<WedgePair> pairs;
  std::string label;
};

namespace detail {

inline void check_pair_support(const WedgePair& pair, Wedge wedge, std::size_t pair_index) {
  const bool is_w = (wedge == Wedge::W);
  if (pair.first) {
    const Interval& s = pair.first->nominal_support;
    const bool ok = is_w ? s.in_negative_halfline() : s.in_positive_halfline();
    if (!ok)
      throw SupportViolationError(
          "wedge_element: pair " + std::to_string(pair_index) + " factor-1 support " + s.str() +
          (is_w ? " not in R_- (wedge W)" : " not in R_+ (wedge W')"));
  }
  if (pair.second) {
    const Interval& s = pair.second->nominal_support;
    const bool ok = is_w ? s.in_positive_halfline() : s.in_negative_halfline();
    if (!ok)
      throw SupportViolationError(
          "wedge_element: pair " + std::to_string(pair_index) + " factor-2 support " + s.str() +
          (is_w ? " not in R_+ (wedge W)" : " not in R_- (wedge W')"));
  }
}

}  // namespace detail

inline WedgeElement wedge_identity(const TwoDNet& net, Wedge wedge) {
  return {Matrix::Identity(net.dim, net.dim), wedge, {}, "1"};
}

// phi1(f) (x) phi2(g), identity on a factor whose smearing is absent.
inline WedgeElement wedge_factor(const TwoDNet& net, const WedgePair& pair, Wedge wedge) {
  detail::check_pair_support(pair, wedge, 0);
  Matrix a1 = pair.first ? field_operator(net.factor1, *pair.first).matrix
                         : Matrix(Matrix::Identity(net.d1, net.d1));
  Matrix a2 = pair.second ? field_operator(net.factor2, *pair.second).matrix
                          : Matrix(Matrix::Identity(net.d2, net.d2));
  WedgeElement el;
  el.op = kron(a1, a2);
  el.wedge = wedge;
  el.pairs = {pair};
  el.label = std::string(pair.first ? "phi1" : "1") + "(x)" + (pair.second ? "phi2" : "1");
  return el;
}

inline WedgeElement wedge_product(const WedgeElement& a, const WedgeElement& b) {
  if (a.wedge != b.wedge) throw SupportViolationError("wedge_product: mixed wedges");
  WedgeElement el;
  el.op = a.op * b.op;
  el.wedge = a.wedge;
  el.pairs = a.pairs;
  el.pairs.insert(el.pairs.end(), b.pairs.begin(), b.pairs.end());
  el.label = a.label + "*" + b.label;
  return el;
}

inline WedgeElement wedge_scale(const WedgeElement& a, Complex c) {
  WedgeElement el = a;
  el.op *= c;
  return el;
}

inline WedgeElement wedge_sum(const WedgeElement& a, const WedgeElement& b) {
  if (a.wedge != b.wedge) throw SupportViolationError("wedge_sum: mixed wedges");
  WedgeElement el;
  el.op = a.op + b.op;
  el.wedge = a.wedge;
  el.pairs = a.pairs;
  el.pairs.insert(el.pairs.end(), b.pairs.begin(), b.pairs.end());
  el.label = a.label + "+" + b.label;
  return el;
}

// A formal word in the factors: sum of coefficient * product of pair indices.
struct WordTerm {
  Complex coeff{1.0, 0.0};
  std::vector<int> factors;  // indices into the pair list; empty = identity
};

using WedgeWord = std::vector<WordTerm>;

inline WedgeElement wedge_element(const TwoDNet& net, const std::vector<WedgePair>& pairs,
                                  const WedgeWord& word, Wedge wedge) {
  for (std::size_t i = 0; i < pairs.size(); ++i) detail::check_pair_support(pairs[i], wedge, i);
  std::vector<Matrix> factor_ops;
  factor_ops.reserve(pairs.size());
  for (const auto& p : pairs) factor_ops.push_back(wedge_factor(net, p, wedge).op);

  WedgeElement el;
  el.wedge = wedge;
  el.pairs = pairs;
  if (word.empty()) {  // empty word: the identity, in every wedge algebra
    el.op = Matrix::Identity(net.dim, net.dim);
    el.label = "1";
    return el;
  }
  el.op = Matrix::Zero(net.dim, net.dim);
  for (const WordTerm& term : word) {
    Matrix m = Matrix::Identity(net.dim, net.dim);
    for (int idx : term.factors) {
      if (idx < 0 || idx >= static_cast<int>(factor_ops.size()))
        throw ConfigError("wedge_element: word refers to missing pair " + std::to_string(idx));
      m = m * factor_ops[static_cast<std::size_t>(idx)];
    }
    el.op += term.coeff * m;
  }
  el.label = "word(" + std::to_string(word.size()) + " terms)";
  return el;
}

// Translating a wedge element shifts every recorded support along its
// lightline; for x in W a W-element stays a W-element.
inline WedgeElement apply_translation(const TwoDNet& net, const WedgeElement& el,
                                      const SpacetimePoint& x) {
  WedgeElement out = el;
  out.op = apply_translation(net, el.op, x);
  for (auto& pair : out.pairs) {
    if (pair.first) *pair.first = translated(*pair.first, x.s1());
    if (pair.second) *pair.second = translated(*pair.second, x.s2());
  }
  out.label = el.label + " @x";
  return out;
}

inline bool satisfies_wedge_constraint(const WedgeElement& el) {
  try {
    for (std::size_t i = 0; i < el.pairs.size(); ++i)
      detail::check_pair_support(el.pairs[i], el.wedge, i);
  } catch (const SupportViolationError&) {
    return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Geometric reflection J: complex conjugation in the occupation product
// basis.  JU(x)J = U(-x) holds because H and P are real diagonal.

struct ReflectionJ {
  double verification_residual = 0.0;

  Vector apply(const Vector& v) const { return v.conjugate(); }
  Matrix conjugate_operator(const Matrix& a) const { return a.conjugate(); }
};

inline ReflectionJ reflection(const TwoDNet& net) {
  ReflectionJ j;
  const std::array<SpacetimePoint, 5> samples = {
      SpacetimePoint{1.0, 0.0}, SpacetimePoint{0.0, 1.0}, SpacetimePoint{0.7, -0.3},
      SpacetimePoint{-2.5, 1.25}, SpacetimePoint{kSqrt2, kPi / 3.0}};
  double worst = 0.0;
  for (const auto& x : samples) {
    Vector lhs = net.translation_phases(x).conjugate();  // J U(x) J on basis vectors
    Vector rhs = net.translation_phases(-x);
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
  }
  j.verification_residual = worst;
  if (worst > 1e-12)
    throw Error("reflection: JU(x)J != U(-x); occupation basis is not real");
  return j;
}

// J maps a wedge element to one of the opposite wedge (supports mirrored).
inline WedgeElement reflect(const TwoDNet& net, const ReflectionJ& j, const WedgeElement& el) {
  (void)net;
  WedgeElement out;
  out.op = j.conjugate_operator(el.op);
  out.wedge = opposite(el.wedge);
  out.pairs.reserve(el.pairs.size());
  for (const auto& pair : el.pairs) {
    WedgePair q;
    if (pair.first) q.first = reflected(*pair.first);
    if (pair.second) q.second = reflected(*pair.second);
    out.pairs.push_back(std::move(q));
  }
  out.label = "J(" + el.label + ")J";
  return out;
}

}  // namespace wedgewave

#endif  // WEDGEWAVE_NET_HPP
