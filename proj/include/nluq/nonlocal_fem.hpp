#pragma once

// Discontinuous piecewise-linear Galerkin discretization of the volume
// constrained nonlocal problem
//
//   int [u(x') - u(x)] B(x, x') dx' = b(x)  on Omega = [0, 1],
//   u = 0                                   on Gamma = [-delta, 0) U (1, 1 + delta],
//
// with the stiffness matrix A(j, k) = B(phi_k, phi_j) assembled as written
// (negative definite) and solved through a band Cholesky of -A.

#include <Eigen/Dense>
#include <vector>

#include "nluq/banded.hpp"
#include "nluq/kernel_model.hpp"

namespace nluq {

enum class SolverKind { kBanded, kDense };

struct QuadratureOrders {
  int regular = 6;   // Gauss-Legendre points per regular t-panel
  int singular = 3;  // Gauss-Jacobi points on panels touching t = 0 (exact for degree 5)
  int inner = 3;     // Gauss-Legendre points per smooth s-piece (exact for degree 5)
};

// Everything about the forward model that is fixed across samples.
struct ModelSpec {
  PriorSpec prior;
  FVariant f_variant = FVariant::kLiteral;
  double forcing = 5.0;
  std::vector<double> obs_locations{0.25, 0.75};
  double qoi_location = 0.5;
  int k = 3;  // h_l = 2^-(k + l)
  QuadratureOrders quadrature;
  double zeta = 3.0;  // modeled cost exponent
  SolverKind solver = SolverKind::kBanded;
};

struct Mesh {
  int level = 0;
  int k = 3;
  double h = 0.125;
  int n_elements = 8;
  double gamma_extent = 0.5;  // horizon delta; Gamma carries no unknowns

  Interval element(int e) const { return {e * h, (e + 1) * h}; }
};

// Throws HorizonViolation if 2^-(k + level) >= delta.
Mesh build_mesh(int level, double delta, int k = 3);

struct DGSpace {
  static constexpr int kPolyOrder = 1;
  static constexpr int kLocalDofs = 2;

  Mesh mesh;

  int dof_count() const { return kLocalDofs * mesh.n_elements; }
  static int dof(int element, int local) { return kLocalDofs * element + local; }

  // Local Legendre-type basis on one element: 1 and 2(x - x_mid)/h.
  static double local_basis(int local, const Interval& elem, double x) {
    return local == 0 ? 1.0 : (2.0 * x - (elem.lo + elem.hi)) / (elem.hi - elem.lo);
  }
};

struct AssembledSystem {
  DGSpace space;
  KernelParams params;
  SymmetricBandMatrix<double> matrix;  // negative definite
  Eigen::VectorXd rhs;

  Eigen::Index bandwidth() const { return matrix.bandwidth(); }
};

// A = base + theta * theta_part; rhs does not depend on theta.
struct AffineSystem {
  DGSpace space;
  double exponent = 0.5;
  double delta = 0.5;
  SymmetricBandMatrix<double> base;
  SymmetricBandMatrix<double> theta_part;
  Eigen::VectorXd rhs;

  AssembledSystem at(double theta) const;
};

struct SolutionField {
  DGSpace space;
  Eigen::VectorXd coeffs;
  KernelParams params;
  double cost = 0.0;  // modeled cost of the solve
};

struct ForwardResult {
  double qoi = 0.0;
  Eigen::VectorXd obs;
  double cost = 0.0;
};

// int_{elem_i} int_{elem_j} B(x, x') phi_b(x') phi_a(x) dx' dx with phi_a local
// to elem_i (test, x) and phi_b local to elem_j (trial, x').
double pair_integral(const Interval& elem_i, const Interval& elem_j, int local_a, int local_b,
                     const KernelParams& params, FVariant variant = FVariant::kLiteral,
                     const QuadratureOrders& orders = {});

// All four local combinations at once; entry (a, b) as in pair_integral.
Eigen::Matrix2d pair_block(const Interval& elem_i, const Interval& elem_j, const KernelParams& params,
                           FVariant variant = FVariant::kLiteral, const QuadratureOrders& orders = {});

// int_elem phi_a(x) phi_b(x) kappa(x) dx with kappa(x) = int_{Omega U Gamma} B(x, x') dx'.
Eigen::Matrix2d collision_block(const Interval& elem, const KernelParams& params,
                                FVariant variant = FVariant::kLiteral,
                                const QuadratureOrders& orders = {});

// kappa(x) = int B(x, x') dx' over Omega U Gamma, for x in [0, 1].
double interaction_mass(double x, const KernelParams& params, FVariant variant = FVariant::kLiteral,
                        const QuadratureOrders& orders = {});

AffineSystem assemble_affine(double exponent, double delta, int level, const ModelSpec& spec = {});
AssembledSystem assemble(const KernelParams& params, int level, const ModelSpec& spec = {});

// Throws CoercivityLoss if -A is not positive definite.
SolutionField solve(const AssembledSystem& system, const ModelSpec& spec = {});

// Modeled cost of one level-l solve, normalized to 1 at level 0.
double modeled_cost(int level, const ModelSpec& spec = {});

// Point value; average of one-sided limits at interior nodes, 0 on Gamma.
double evaluate(const SolutionField& sol, double x);
Eigen::VectorXd observe(const SolutionField& sol, const std::vector<double>& locations);

double l2_norm(const SolutionField& sol);

ForwardResult forward(const KernelParams& params, int level, const ModelSpec& spec = {});

}  // namespace nluq
