#include "nluq/nonlocal_fem.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "nluq/errors.hpp"
#include "nluq/quadrature.hpp"

namespace nluq {

namespace {

// Accumulator layout: entries 0..3 hold the theta-free part of local
// combination (a, b) at index 2a + b, entries 4..7 the part multiplying theta.
using Acc = Eigen::Matrix<double, 8, 1>;

constexpr std::array<double, 2> kSBreaks{2.0 * kForcingBreaks[0], 2.0 * kForcingBreaks[1]};

template <typename R>
R zero_of() {
  if constexpr (std::is_arithmetic_v<R>) {
    return R(0);
  } else {
    return R::Zero();
  }
}

// Up to this many breakpoints per integral; the callers below never exceed 14.
constexpr int kMaxBreaks = 16;

struct Breaks {
  std::array<double, kMaxBreaks> v{};
  int n = 0;

  void add(double x) { v[n++] = x; }
};

constexpr int kMaxCachedOrder = 32;

const QuadratureRule<double>& legendre(int n) {
  static const std::vector<QuadratureRule<double>> table = [] {
    std::vector<QuadratureRule<double>> out(kMaxCachedOrder + 1);
    for (int k = 1; k <= kMaxCachedOrder; ++k) {
      out[k] = gauss_legendre<double>(k);
    }
    return out;
  }();
  if (n < 1 || n > kMaxCachedOrder) {
    throw ConfigError("quadrature order must lie in [1, " + std::to_string(kMaxCachedOrder) + "]");
  }
  return table[n];
}

// Integrates |t|^-exponent g(t) over (lo, hi) where g is a polynomial of
// degree <= 5 between consecutive kinks. Panels touching t = 0 use a
// Gauss-Jacobi rule; the others Gauss-Legendre on geometrically graded
// sub-panels whose distance to the singularity is at least their length.
class WeightedIntegrator {
 public:
  WeightedIntegrator(double exponent, const QuadratureOrders& orders)
      : exponent_(exponent),
        regular_(legendre(orders.regular)),
        singular_(left_singular_rule<double>(orders.singular, exponent)),
        inner_(legendre(orders.inner)) {}

  const QuadratureRule<double>& inner() const { return inner_; }

  template <typename R, typename Fn>
  R integrate(double lo, double hi, const Breaks& kinks, Fn&& g) const {
    R acc = zero_of<R>();
    if (!(hi > lo)) {
      return acc;
    }
    Breaks pts;
    pts.add(lo);
    pts.add(hi);
    if (lo < 0.0 && hi > 0.0) {
      pts.add(0.0);
    }
    for (int i = 0; i < kinks.n; ++i) {
      if (kinks.v[i] > lo && kinks.v[i] < hi) {
        pts.add(kinks.v[i]);
      }
    }
    std::sort(pts.v.begin(), pts.v.begin() + pts.n);
    for (int i = 0; i + 1 < pts.n; ++i) {
      const double a = pts.v[i];
      const double b = pts.v[i + 1];
      if (!(b > a)) {
        continue;
      }
      if (a >= 0.0) {
        acc += positive_panel<R>(a, b, 1.0, g);
      } else {
        acc += positive_panel<R>(-b, -a, -1.0, g);
      }
    }
    return acc;
  }

 private:
  // int_a^b t^-exponent g(sign * t) dt for 0 <= a < b.
  template <typename R, typename Fn>
  R positive_panel(double a, double b, double sign, Fn& g) const {
    R acc = zero_of<R>();
    if (a == 0.0) {
      const double scale = std::pow(b, 1.0 - exponent_);
      for (Eigen::Index q = 0; q < singular_.size(); ++q) {
        acc += (singular_.weights(q) * scale) * g(sign * b * singular_.nodes(q));
      }
      return acc;
    }
    int guard = 0;
    while (a < b) {
      const double c = (a >= b - a || ++guard > 200) ? b : std::min(b, 2.0 * a);
      const double half = 0.5 * (c - a);
      const double mid = 0.5 * (c + a);
      for (Eigen::Index q = 0; q < regular_.size(); ++q) {
        const double t = mid + half * regular_.nodes(q);
        acc += (regular_.weights(q) * half * std::pow(t, -exponent_)) * g(sign * t);
      }
      a = c;
    }
    return acc;
  }

  double exponent_;
  QuadratureRule<double> regular_;
  QuadratureRule<double> singular_;
  QuadratureRule<double> inner_;
};

// Coefficients of f on one of its three pieces, as polynomials in z:
// f_base = c[0] + c[1] z + c[2] z^2, f_theta = theta_coeff.
struct Piece {
  double lo;
  double hi;
  std::array<double, 3> c;
  double theta_coeff;
};

std::array<Piece, 3> pieces_of(FVariant variant) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double b0 = kForcingBreaks[0];
  const double b1 = kForcingBreaks[1];
  Piece third = variant == FVariant::kLiteral
                    ? Piece{b1, inf, {14.4 + 2.0 - b1, 1.0, 0.0}, 0.0}
                    : Piece{b1, inf, {14.4 * b1 * b1 + 2.0, -2.0 * 14.4 * b1, 14.4}, 0.0};
  return {Piece{-inf, b0, {0.2 + b0 * b0, -2.0 * b0, 1.0}, 0.0}, Piece{b0, b1, {0.0, 1.0, 0.0}, 1.0},
          third};
}

// Index of the piece containing [zlo, zhi], or -1 if a jump of f lies inside.
int piece_index(double zlo, double zhi) {
  if (zhi <= kForcingBreaks[0]) {
    return 0;
  }
  if (zlo >= kForcingBreaks[0] && zhi <= kForcingBreaks[1]) {
    return 1;
  }
  if (zlo >= kForcingBreaks[1]) {
    return 2;
  }
  return -1;
}

// Values multiplied into the basis products at one quadrature point.
struct FWeights {
  FVariant variant;
  bool cut = true;  // split the inner integral at the jumps of f
  std::array<double, 2> operator()(double z) const {
    return {eval_f_base(z, variant), eval_f_theta(z)};
  }
};

struct MonomialWeights {
  bool cut = false;
  std::array<double, 3> operator()(double z) const { return {1.0, z, z * z}; }
};

template <int K>
using Moments = Eigen::Matrix<double, 4 * K, 1>;

// Pair term in rotated coordinates s = x + x', t = x - x' (dx dx' = ds dt / 2).
// The horizon cut, the singularity and the jumps of f are all axis-aligned
// there; the s-integral is exact and leaves a piecewise polynomial in t.
// Entry 4k + 2a + b holds the k-th weight of local combination (a, b).
template <int K, typename Weigh>
Moments<K> pair_quad(const Interval& ei, const Interval& ej, double delta, const WeightedIntegrator& integ,
                     const Weigh& weigh) {
  const double a0 = ei.lo;
  const double a1 = ei.hi;
  const double c0 = ej.lo;
  const double c1 = ej.hi;
  const double lo = std::max(a0 - c1, -delta);
  const double hi = std::min(a1 - c0, delta);
  if (!(hi > lo)) {
    return Moments<K>::Zero();
  }
  Breaks kinks;
  kinks.add(a0 - c0);
  kinks.add(a1 - c1);
  if (weigh.cut) {
    for (const double sb : kSBreaks) {
      kinks.add(2.0 * a0 - sb);
      kinks.add(2.0 * a1 - sb);
      kinks.add(sb - 2.0 * c0);
      kinks.add(sb - 2.0 * c1);
    }
  }
  const auto& rule = integ.inner();
  auto g = [&](double t) -> Moments<K> {
    Moments<K> acc = Moments<K>::Zero();
    const double l = std::max(2.0 * a0 - t, 2.0 * c0 + t);
    const double u = std::min(2.0 * a1 - t, 2.0 * c1 + t);
    if (!(u > l)) {
      return acc;
    }
    std::array<double, 4> cuts{l, 0.0, 0.0, 0.0};
    int nc = 1;
    if (weigh.cut) {
      for (const double sb : kSBreaks) {
        if (sb > l && sb < u) {
          cuts[nc++] = sb;
        }
      }
    }
    cuts[nc++] = u;
    for (int p = 0; p + 1 < nc; ++p) {
      const double half = 0.5 * (cuts[p + 1] - cuts[p]);
      const double mid = 0.5 * (cuts[p + 1] + cuts[p]);
      for (Eigen::Index q = 0; q < rule.size(); ++q) {
        const double s = mid + half * rule.nodes(q);
        const double w = 0.5 * half * rule.weights(q);
        const double x = 0.5 * (s + t);
        const double xp = 0.5 * (s - t);
        const auto fw = weigh(0.5 * s);
        const std::array<double, 2> pa{1.0, DGSpace::local_basis(1, ei, x)};
        const std::array<double, 2> pb{1.0, DGSpace::local_basis(1, ej, xp)};
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) {
            const double wab = w * pa[a] * pb[b];
            for (int k = 0; k < K; ++k) {
              acc(4 * k + 2 * a + b) += wab * fw[k];
            }
          }
        }
      }
    }
    return acc;
  };
  return integ.integrate<Moments<K>>(lo, hi, kinks, g) / (delta * delta);
}

// int_elem phi_a phi_b kappa dx written as int |t|^-exponent H(t) dt with
// H(t) = int_elem phi_a(x) phi_b(x) w(x - t/2) dx.
template <int K, typename Weigh>
Moments<K> collision_quad(const Interval& e, double delta, const WeightedIntegrator& integ,
                          const Weigh& weigh) {
  Breaks kinks;
  if (weigh.cut) {
    for (const double zb : kForcingBreaks) {
      kinks.add(2.0 * (e.lo - zb));
      kinks.add(2.0 * (e.hi - zb));
    }
  }
  const auto& rule = integ.inner();
  auto g = [&](double t) -> Moments<K> {
    Moments<K> acc = Moments<K>::Zero();
    std::array<double, 4> cuts{e.lo, 0.0, 0.0, 0.0};
    int nc = 1;
    if (weigh.cut) {
      for (const double zb : kForcingBreaks) {
        const double xb = zb + 0.5 * t;
        if (xb > e.lo && xb < e.hi) {
          cuts[nc++] = xb;
        }
      }
    }
    cuts[nc++] = e.hi;
    for (int p = 0; p + 1 < nc; ++p) {
      const double half = 0.5 * (cuts[p + 1] - cuts[p]);
      const double mid = 0.5 * (cuts[p + 1] + cuts[p]);
      for (Eigen::Index q = 0; q < rule.size(); ++q) {
        const double x = mid + half * rule.nodes(q);
        const double w = half * rule.weights(q);
        const auto fw = weigh(x - 0.5 * t);
        const std::array<double, 2> ph{1.0, DGSpace::local_basis(1, e, x)};
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) {
            const double wab = w * ph[a] * ph[b];
            for (int k = 0; k < K; ++k) {
              acc(4 * k + 2 * a + b) += wab * fw[k];
            }
          }
        }
      }
    }
    return acc;
  };
  return integ.integrate<Moments<K>>(-delta, delta, kinks, g) / (delta * delta);
}

Acc pair_acc(const Interval& ei, const Interval& ej, double delta, FVariant variant,
             const WeightedIntegrator& integ) {
  return pair_quad<2>(ei, ej, delta, integ, FWeights{variant});
}

Acc collision_acc(const Interval& e, double delta, FVariant variant, const WeightedIntegrator& integ) {
  return collision_quad<2>(e, delta, integ, FWeights{variant});
}

// Moments taken with z measured from the left end of the first element;
// a pair or element whose z-range sits inside one piece of f is the
// reference geometry shifted by `shift`.
Acc from_moments(const Moments<3>& mom, const Piece& piece, double shift) {
  const auto& c = piece.c;
  const std::array<double, 3> cs{c[0] + shift * (c[1] + shift * c[2]), c[1] + 2.0 * shift * c[2], c[2]};
  Acc acc;
  for (int ab = 0; ab < 4; ++ab) {
    acc(ab) = cs[0] * mom(ab) + cs[1] * mom(4 + ab) + cs[2] * mom(8 + ab);
    acc(4 + ab) = piece.theta_coeff * mom(ab);
  }
  return acc;
}

Eigen::Matrix2d combine(const Acc& acc, double theta) {
  Eigen::Matrix2d out;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      out(a, b) = acc(2 * a + b) + theta * acc(4 + 2 * a + b);
    }
  }
  return out;
}

std::string describe(const KernelParams& p) {
  std::ostringstream os;
  os.precision(17);
  os << "theta=" << p.theta << " exponent=" << p.exponent << " delta=" << p.delta;
  return os.str();
}

}  // namespace

Mesh build_mesh(int level, double delta, int k) {
  if (level < 0) {
    throw ConfigError("build_mesh: level must be non-negative");
  }
  Mesh mesh;
  mesh.level = level;
  mesh.k = k;
  mesh.n_elements = 1 << (k + level);
  mesh.h = std::ldexp(1.0, -(k + level));
  mesh.gamma_extent = delta;
  if (!(mesh.h < delta)) {
    std::ostringstream os;
    os << "horizon violation: h = " << mesh.h << " is not below delta = " << delta;
    throw HorizonViolation(os.str());
  }
  return mesh;
}

Eigen::Matrix2d pair_block(const Interval& elem_i, const Interval& elem_j, const KernelParams& params,
                           FVariant variant, const QuadratureOrders& orders) {
  const WeightedIntegrator integ(params.exponent, orders);
  return combine(pair_acc(elem_i, elem_j, params.delta, variant, integ), params.theta);
}

double pair_integral(const Interval& elem_i, const Interval& elem_j, int local_a, int local_b,
                     const KernelParams& params, FVariant variant, const QuadratureOrders& orders) {
  return pair_block(elem_i, elem_j, params, variant, orders)(local_a, local_b);
}

Eigen::Matrix2d collision_block(const Interval& elem, const KernelParams& params, FVariant variant,
                                const QuadratureOrders& orders) {
  const WeightedIntegrator integ(params.exponent, orders);
  return combine(collision_acc(elem, params.delta, variant, integ), params.theta);
}

double interaction_mass(double x, const KernelParams& params, FVariant variant,
                        const QuadratureOrders& orders) {
  const WeightedIntegrator integ(params.exponent, orders);
  Breaks kinks;
  for (const double zb : kForcingBreaks) {
    kinks.add(2.0 * (x - zb));
  }
  auto g = [&](double t) { return eval_f(x - 0.5 * t, params.theta, variant); };
  return integ.integrate<double>(-params.delta, params.delta, kinks, g) /
         (params.delta * params.delta);
}

AssembledSystem AffineSystem::at(double theta) const {
  AssembledSystem sys;
  sys.space = space;
  sys.params = {theta, exponent, delta};
  sys.matrix = base;
  sys.matrix.data() += theta * theta_part.data();
  sys.rhs = rhs;
  return sys;
}

namespace {

AffineSystem assemble_affine_below_one(double exponent, double delta, int level, const ModelSpec& spec) {
  AffineSystem sys;
  sys.space.mesh = build_mesh(level, delta, spec.k);
  sys.exponent = exponent;
  sys.delta = delta;
  const Mesh& mesh = sys.space.mesh;
  const int n = mesh.n_elements;
  const int m = sys.space.dof_count();
  const int block_band = std::min(n - 1, static_cast<int>(std::ceil(delta / mesh.h)));
  const int kd = 2 * block_band + 1;
  sys.base = SymmetricBandMatrix<double>(m, kd);
  sys.theta_part = SymmetricBandMatrix<double>(m, kd);

  const WeightedIntegrator integ(exponent, spec.quadrature);
  const auto pieces = pieces_of(spec.f_variant);
  const double h = mesh.h;
  const Interval ref{0.0, h};
  std::vector<Moments<3>> pair_mom(block_band + 1);
  for (int m = 0; m <= block_band; ++m) {
    pair_mom[m] = pair_quad<3>(ref, {m * h, (m + 1) * h}, delta, integ, MonomialWeights{});
  }
  const Moments<3> coll_mom = collision_quad<3>(ref, delta, integ, MonomialWeights{});

  for (int i = 0; i < n; ++i) {
    const Interval ei = mesh.element(i);
    for (int j = i; j <= std::min(n - 1, i + block_band); ++j) {
      const int pi = piece_index(0.5 * (i + j) * h, 0.5 * (i + j + 2) * h);
      Acc acc = pi >= 0 ? from_moments(pair_mom[j - i], pieces[pi], ei.lo)
                        : pair_acc(ei, mesh.element(j), delta, spec.f_variant, integ);
      if (j == i) {
        const int ci = piece_index(ei.lo - 0.5 * delta, ei.hi + 0.5 * delta);
        acc -= ci >= 0 ? from_moments(coll_mom, pieces[ci], ei.lo)
                       : collision_acc(ei, delta, spec.f_variant, integ);
      }
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          const int row = DGSpace::dof(j, b);
          const int col = DGSpace::dof(i, a);
          if (row < col) {
            continue;  // upper half of a diagonal block
          }
          sys.base.lower(row, col) = acc(2 * a + b);
          sys.theta_part.lower(row, col) = acc(4 + 2 * a + b);
        }
      }
    }
  }

  sys.rhs = Eigen::VectorXd::Zero(m);
  for (int e = 0; e < n; ++e) {
    sys.rhs(DGSpace::dof(e, 0)) = spec.forcing * mesh.h;
  }
  return sys;
}

}  // namespace

// At exponent 1 the pair and collision terms diverge separately while the
// matrix stays finite, so exponents within kLimitShift of 1 are obtained by
// linear extrapolation from 1 - kLimitShift and 1 - 2 kLimitShift (the
// entries are smooth in the exponent there, error O(kLimitShift^2)).
AffineSystem assemble_affine(double exponent, double delta, int level, const ModelSpec& spec) {
  constexpr double kLimitShift = 1e-6;
  if (!(exponent > 0.0 && exponent <= 1.0)) {
    throw ConfigError("kernel exponent must lie in (0, 1], got " + std::to_string(exponent));
  }
  if (exponent < 1.0 - kLimitShift) {
    return assemble_affine_below_one(exponent, delta, level, spec);
  }
  AffineSystem a = assemble_affine_below_one(1.0 - kLimitShift, delta, level, spec);
  const AffineSystem b = assemble_affine_below_one(1.0 - 2.0 * kLimitShift, delta, level, spec);
  const double t = (exponent - (1.0 - kLimitShift)) / kLimitShift;
  a.base.data() += t * (a.base.data() - b.base.data());
  a.theta_part.data() += t * (a.theta_part.data() - b.theta_part.data());
  a.exponent = exponent;
  return a;
}

AssembledSystem assemble(const KernelParams& params, int level, const ModelSpec& spec) {
  return assemble_affine(params.exponent, params.delta, level, spec).at(params.theta);
}

double modeled_cost(int level, const ModelSpec& spec) { return std::exp2(spec.zeta * level); }

SolutionField solve(const AssembledSystem& system, const ModelSpec& spec) {
  SolutionField sol;
  sol.space = system.space;
  sol.params = system.params;
  sol.cost = modeled_cost(system.space.mesh.level, spec);
  if (spec.solver == SolverKind::kDense) {
    const Eigen::MatrixXd neg = -system.matrix.to_dense();
    Eigen::LLT<Eigen::MatrixXd> llt(neg);
    if (llt.info() != Eigen::Success) {
      throw CoercivityLoss("dense Cholesky of -A failed (" + describe(system.params) + ")");
    }
    sol.coeffs = llt.solve(-system.rhs);
    return sol;
  }
  const BandCholesky<double> chol(-system.matrix);
  if (chol.info() >= 0) {
    throw CoercivityLoss("band Cholesky of -A failed at pivot " + std::to_string(chol.info()) +
                         " (" + describe(system.params) + ")");
  }
  sol.coeffs = chol.solve(-system.rhs);
  return sol;
}

double evaluate(const SolutionField& sol, double x) {
  const Mesh& mesh = sol.space.mesh;
  if (x < 0.0 || x > 1.0) {
    return 0.0;
  }
  const auto value = [&](int e, double local) {
    return sol.coeffs(DGSpace::dof(e, 0)) + sol.coeffs(DGSpace::dof(e, 1)) * local;
  };
  const double r = x / mesh.h;
  const double node = std::round(r);
  const int n = mesh.n_elements;
  if (std::abs(r - node) <= 1e-12 * std::max(1.0, r)) {
    const int i = static_cast<int>(node);
    if (i <= 0) {
      return value(0, -1.0);
    }
    if (i >= n) {
      return value(n - 1, 1.0);
    }
    return 0.5 * (value(i - 1, 1.0) + value(i, -1.0));
  }
  const int e = std::clamp(static_cast<int>(std::floor(r)), 0, n - 1);
  return value(e, DGSpace::local_basis(1, mesh.element(e), x));
}

Eigen::VectorXd observe(const SolutionField& sol, const std::vector<double>& locations) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(locations.size()));
  for (std::size_t i = 0; i < locations.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = evaluate(sol, locations[i]);
  }
  return out;
}

double l2_norm(const SolutionField& sol) {
  const double h = sol.space.mesh.h;
  double acc = 0.0;
  for (int e = 0; e < sol.space.mesh.n_elements; ++e) {
    const double c0 = sol.coeffs(DGSpace::dof(e, 0));
    const double c1 = sol.coeffs(DGSpace::dof(e, 1));
    acc += h * (c0 * c0 + c1 * c1 / 3.0);
  }
  return std::sqrt(acc);
}

ForwardResult forward(const KernelParams& params, int level, const ModelSpec& spec) {
  const SolutionField sol = solve(assemble(params, level, spec), spec);
  ForwardResult out;
  out.qoi = evaluate(sol, spec.qoi_location);
  out.obs = observe(sol, spec.obs_locations);
  out.cost = sol.cost;
  return out;
}

}  // namespace nluq
