#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>

#include "brute_force.hpp"
#include "nluq/errors.hpp"
#include "nluq/experiments.hpp"
#include "nluq/nonlocal_fem.hpp"

using namespace nluq;

TEST_CASE("build_mesh") {
  const Mesh m0 = build_mesh(0, 0.5);
  CHECK(m0.h == 0.125);
  CHECK(m0.n_elements == 8);
  const Mesh m2 = build_mesh(2, 0.5);
  CHECK(m2.h == 1.0 / 32);
  CHECK(m2.n_elements == 32);
  CHECK(m2.element(31).hi == 1.0);
  CHECK_THROWS_AS(build_mesh(0, 0.1), HorizonViolation);
  CHECK_THROWS_AS(build_mesh(0, 0.125), HorizonViolation);
  CHECK_NOTHROW(build_mesh(1, 0.125));
}

TEST_CASE("pair_integral") {
  const KernelParams p{1.4, 0.5, 0.2};
  // gap of exactly delta
  CHECK(pair_integral({0.0, 0.125}, {0.325, 0.45}, 0, 0, p) == 0.0);
  CHECK(pair_integral({0.0, 0.125}, {0.5, 0.625}, 1, 1, p) == 0.0);

  Stream rng(3);
  for (int t = 0; t < 10; ++t) {
    const KernelParams q = prior_sample(rng);
    const double h = 1.0 / 16;
    for (auto [i, j] : {std::pair{3, 3}, std::pair{3, 4}, std::pair{9, 11}, std::pair{10, 12}}) {
      const Interval I{i * h, (i + 1) * h};
      const Interval J{j * h, (j + 1) * h};
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          const double ab = pair_integral(I, J, a, b, q);
          const double ba = pair_integral(J, I, b, a, q);
          CHECK(std::abs(ab - ba) <= 1e-10 * std::max(1.0, std::abs(ab)));
        }
      }
    }
  }

  // identical elements against the brute-force oracle; the element sits
  // where f is a single smooth piece
  const Interval I{0.25, 0.375};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const double ref = brute::pair(I, I, a, b, p, FVariant::kLiteral);
      CHECK(pair_integral(I, I, a, b, p) == doctest::Approx(ref).epsilon(1e-6));
    }
  }
}

TEST_CASE("collision block against the brute-force oracle") {
  for (const KernelParams p : {KernelParams{1.3, 0.9, 0.3}, KernelParams{1.8, 0.1, 0.7}}) {
    for (int e : {0, 5, 7}) {
      const Interval I{e * 0.125, (e + 1) * 0.125};
      const Eigen::Matrix2d c = collision_block(I, p);
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          CHECK(c(a, b) == doctest::Approx(brute::collision(I, a, b, p, FVariant::kLiteral)).epsilon(1e-8));
        }
      }
    }
  }
}

TEST_CASE("assemble: symmetry, definiteness, band, rhs") {
  Stream rng(11);
  for (int t = 0; t < 20; ++t) {
    const KernelParams p = prior_sample(rng);
    const AssembledSystem s1 = assemble(p, 1);
    const Eigen::MatrixXd A1 = s1.matrix.to_dense();
    CHECK((A1 - A1.transpose()).cwiseAbs().maxCoeff() / A1.cwiseAbs().maxCoeff() < 1e-10);

    const Eigen::MatrixXd A0 = assemble(p, 0).matrix.to_dense();
    CHECK(A0.rows() == 16);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(-A0);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);

    // element blocks farther apart than ceil(delta / h) + 1 are exactly zero
    const double h = s1.space.mesh.h;
    const int reach = static_cast<int>(std::ceil(p.delta / h)) + 1;
    bool zero = true;
    for (int r = 0; r < A1.rows(); ++r) {
      for (int c = 0; c < A1.cols(); ++c) {
        if (std::abs(r / 2 - c / 2) > reach) zero = zero && A1(r, c) == 0.0;
      }
    }
    CHECK(zero);
  }
  const AssembledSystem s0 = assemble({1.5, 0.5, 0.5}, 0);
  for (int e = 0; e < 8; ++e) {
    CHECK(s0.rhs(2 * e) == doctest::Approx(5.0 * 0.125).epsilon(1e-15));
    CHECK(s0.rhs(2 * e + 1) == 0.0);
  }
}

TEST_CASE("exponent one is reached as a finite limit") {
  const KernelParams p{1.25, 1.0, 0.2};
  const double q1 = forward(p, 2).qoi;
  const double q2 = forward({1.25, 1.0 - 1e-4, 0.2}, 2).qoi;
  CHECK(std::isfinite(q1));
  CHECK(std::abs(q1 - q2) < 1e-3);
  CHECK_THROWS_AS(assemble({1.25, 1.1, 0.2}, 0), ConfigError);
}

TEST_CASE("solve") {
  Stream rng(23);
  for (int t = 0; t < 5; ++t) {
    const KernelParams p = prior_sample(rng);
    AssembledSystem s = assemble(p, 0);
    const SolutionField u = solve(s);
    const Eigen::MatrixXd A = s.matrix.to_dense();
    CHECK((A * u.coeffs - s.rhs).norm() / s.rhs.norm() < 1e-10);
    const Eigen::VectorXd lu = A.partialPivLu().solve(s.rhs);
    CHECK((lu - u.coeffs).norm() / lu.norm() < 1e-10);
    CHECK(u.cost == 1.0);

    AssembledSystem scaled = s;
    scaled.rhs *= 3.7;
    CHECK((solve(scaled).coeffs - 3.7 * u.coeffs).norm() <= 1e-12 * 3.7 * u.coeffs.norm());

    s.rhs.setZero();
    CHECK(solve(s).coeffs.cwiseAbs().maxCoeff() == 0.0);

    ModelSpec dense;
    dense.solver = SolverKind::kDense;
    const AssembledSystem s1 = assemble(p, 1);
    CHECK((solve(s1, dense).coeffs - solve(s1).coeffs).norm() < 1e-10 * solve(s1).coeffs.norm());
  }
  AssembledSystem bad = assemble({1.5, 0.5, 0.5}, 0);
  bad.matrix = -bad.matrix;
  CHECK_THROWS_AS(solve(bad), CoercivityLoss);
}

TEST_CASE("evaluate and observe") {
  SolutionField sol;
  sol.space.mesh = build_mesh(1, 0.5);
  sol.coeffs = Eigen::VectorXd::Zero(sol.space.dof_count());
  for (double x : {0.0, 0.1, 0.5, 0.77, 1.0}) CHECK(evaluate(sol, x) == 0.0);
  CHECK(observe(sol, {0.25, 0.75}) == Eigen::Vector2d::Zero());

  // x -> x lies in the DG space: mean x_mid, slope coefficient h / 2
  const Mesh& m = sol.space.mesh;
  for (int e = 0; e < m.n_elements; ++e) {
    sol.coeffs(2 * e) = m.element(e).mid();
    sol.coeffs(2 * e + 1) = 0.5 * m.h;
  }
  for (double x : {0.01, 0.2, 0.3333, 0.5, 0.61, 0.999}) CHECK(evaluate(sol, x) == doctest::Approx(x).epsilon(1e-14));
  CHECK(evaluate(sol, -0.01) == 0.0);  // Gamma
  CHECK(evaluate(sol, 1.01) == 0.0);

  // a jump at a node: the average of both sides
  sol.coeffs.setZero();
  sol.coeffs(2 * 7) = 1.0;  // element [7/16, 8/16) is 1
  CHECK(evaluate(sol, 0.5) == doctest::Approx(0.5));

  const SolutionField u = solve(assemble({1.6, 0.3, 0.4}, 2));
  const std::vector<double> loc{0.25, 0.75, 0.4};
  const Eigen::VectorXd obs = observe(u, loc);
  CHECK(obs.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(obs(i) - evaluate(u, loc[i])) <= 1e-15);
}

TEST_CASE("forward") {
  const KernelParams p{1.7, 0.45, 0.33};
  const ForwardResult a = forward(p, 2);
  const ForwardResult b = forward(p, 2);
  CHECK(a.qoi == b.qoi);
  CHECK(a.obs == b.obs);
  CHECK(a.qoi == evaluate(solve(assemble(p, 2)), 0.5));
  CHECK(a.obs.size() == 2);
  CHECK(a.cost == 64.0);

  // refinement differences shrink on average
  Stream rng(31);
  double coarse = 0.0;
  double fine = 0.0;
  for (int t = 0; t < 20; ++t) {
    const KernelParams q = prior_sample(rng);
    coarse += std::abs(forward(q, 1).qoi - forward(q, 2).qoi);
    fine += std::abs(forward(q, 4).qoi - forward(q, 5).qoi);
  }
  CHECK(fine < coarse);
}

TEST_CASE("increment variance decays with slope at least 3") {
  const RateFit fit = estimate_rates(1, 5, 200, Stream(8));
  MESSAGE("beta_hat = " << fit.beta_hat);
  CHECK(fit.beta_hat >= 3.0);
}

TEST_CASE("solutions are uniformly bounded across levels") {
  Stream rng(77);
  std::vector<KernelParams> draws;
  for (int i = 0; i < 1000; ++i) draws.push_back(prior_sample(rng));
  std::vector<double> worst;
  for (int l = 0; l <= 4; ++l) {
    double w = 0.0;
    for (const auto& p : draws) w = std::max(w, l2_norm(solve(assemble(p, l))));
    worst.push_back(w);
  }
  // ||b|| = 5 on [0, 1]; K_hat calibrated once at level 0 with a factor 2 margin
  const double k_hat = 2.0 * worst[0] / 5.0;
  for (int l = 0; l <= 4; ++l) CHECK(worst[static_cast<std::size_t>(l)] <= k_hat * 5.0);
}
