// SPDX-License-Identifier: Apache-2.0
#include "conic.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"

using namespace mgmc;

namespace {

const std::complex<double> kJ(0.0, 1.0);

// min ||p - target||^2 over 0 <= p <= ub, as a conic program.
ConicProblem box_projection(const Eigen::Vector2d& target, const Eigen::Vector2d& ub) {
  ConicProblem p;
  const int blk = p.add_block(BlockKind::Nonneg, 2);
  p.set_quadratic(blk, 2.0 * Eigen::Matrix2d::Identity());
  p.set_objective(blk, -2.0 * target);
  for (int i = 0; i < 2; ++i) {
    p.add_constraint({{{blk, i, 1.0}}, Relation::Le, ub(i)});
  }
  return p;
}

}  // namespace

TEST_CASE("svec and smat are inverse isometries") {
  Eigen::MatrixXd a(3, 3);
  a << 2.0, 0.5, -1.0, 0.5, 3.0, 0.25, -1.0, 0.25, 1.0;
  const Eigen::VectorXd v = svec(a);
  CHECK(v.size() == svec_dim(3));
  CHECK(smat(v).isApprox(a, 1e-15));

  Eigen::MatrixXd b(3, 3);
  b << 1.0, 2.0, 0.0, 2.0, -1.0, 1.5, 0.0, 1.5, 0.5;
  // Packing preserves the Frobenius inner product.
  CHECK(svec(a).dot(svec(b)) == doctest::Approx((a.transpose() * b).trace()));
}

TEST_CASE("scalar linear program attains its bound") {
  for (const BlockKind kind : {BlockKind::Nonneg, BlockKind::Free}) {
    ConicProblem p;
    const int blk = p.add_block(kind, 1);
    p.set_objective(blk, Eigen::VectorXd::Ones(1));
    p.add_constraint({{{blk, 0, 1.0}}, Relation::Ge, 3.0});

    const SolveOutcome out = solve(p, 1e-9);
    REQUIRE(out.status == SolveStatus::Optimal);
    CHECK(out.objective == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(out.primal[0](0) == doctest::Approx(3.0).epsilon(1e-6));
    // The binding row carries the full objective gradient.
    CHECK(out.row_duals(0) == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("trace minimization pins down the rank-one corner") {
  ConicProblem p;
  const int blk = p.add_block(BlockKind::PsdSym, 2);
  p.set_objective(blk, svec(Eigen::Matrix2d::Identity()));
  p.add_constraint({{{blk, 0, 1.0}}, Relation::Ge, 2.0});  // X(0,0) >= 2

  const SolveOutcome out = solve(p, 1e-9);
  REQUIRE(out.status == SolveStatus::Optimal);
  CHECK(out.objective == doctest::Approx(2.0).epsilon(1e-6));
  const Eigen::MatrixXd x = smat(out.primal[0]);
  CHECK(x(0, 0) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(std::abs(x(0, 1)) < 1e-5);
  CHECK(std::abs(x(1, 1)) < 1e-5);
  CHECK(kkt_residual(p, out.primal, out.row_duals) < 1e-6);
}

TEST_CASE("box projection clips the out-of-range coordinate exactly") {
  const ConicProblem p = box_projection({2.0, 0.5}, {1.0, 1.0});
  const SolveOutcome out = solve(p, 1e-9);
  REQUIRE(out.status == SolveStatus::Optimal);
  // Active-face polish makes the clip exact, not just tol-accurate.
  CHECK(out.primal[0](0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.primal[0](1) == doctest::Approx(0.5).epsilon(1e-12));

  CHECK(kkt_residual(p, out.primal, out.row_duals) < 1e-8);
  CHECK(kkt_residual(p, out.primal) < 1e-8);  // duals re-estimated
}

TEST_CASE("kkt residual scores an infeasible candidate by its violation") {
  const ConicProblem p = box_projection({2.0, 0.5}, {1.0, 1.0});
  std::vector<Eigen::VectorXd> candidate{Eigen::Vector2d(2.0, 2.0)};
  CHECK(kkt_residual(p, candidate) == doctest::Approx(1.0));
}

TEST_CASE("kkt residual grows when the optimum is perturbed") {
  const ConicProblem p = box_projection({2.0, 0.5}, {1.0, 1.0});
  const SolveOutcome out = solve(p, 1e-9);
  REQUIRE(out.status == SolveStatus::Optimal);
  const double at_opt = kkt_residual(p, out.primal);
  for (const double eps : {1e-4, 1e-3, 1e-2}) {
    std::vector<Eigen::VectorXd> moved{out.primal[0] - Eigen::Vector2d(eps, eps)};
    CHECK(kkt_residual(p, moved) > at_opt + eps);
  }
}

TEST_CASE("interior projection returns the point itself") {
  const ConicProblem p = box_projection({0.5, 0.7}, {1.0, 1.0});
  const SolveOutcome out = solve(p, 1e-9);
  REQUIRE(out.status == SolveStatus::Optimal);
  CHECK(out.primal[0](0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(out.primal[0](1) == doctest::Approx(0.7).epsilon(1e-9));
}

TEST_CASE("contradictory bounds are reported infeasible") {
  ConicProblem p;
  const int blk = p.add_block(BlockKind::Free, 1);
  p.set_objective(blk, Eigen::VectorXd::Ones(1));
  p.add_constraint({{{blk, 0, 1.0}}, Relation::Ge, 3.0});
  p.add_constraint({{{blk, 0, 1.0}}, Relation::Le, 2.0});
  CHECK(solve(p, 1e-8).status == SolveStatus::Infeasible);

  // Same conclusion when the contradiction sits in a PSD diagonal.
  ConicProblem q;
  const int x = q.add_block(BlockKind::PsdSym, 2);
  q.add_constraint({{{x, 0, 1.0}}, Relation::Le, -1.0});  // X(0,0) <= -1
  CHECK(solve(q, 1e-8).status == SolveStatus::Infeasible);

  // Contradictory differences whose feasible relaxation has an unbounded
  // recession ray (p1 = p2 -> inf): the certificate must still fire.
  ConicProblem d;
  const int pw = d.add_block(BlockKind::Nonneg, 2);
  d.set_objective(pw, Eigen::Vector2d(1.0, 1.0));
  d.add_constraint({{{pw, 0, 1.0}, {pw, 1, -1.0}}, Relation::Ge, 1.0});
  d.add_constraint({{{pw, 1, 1.0}, {pw, 0, -1.0}}, Relation::Ge, 1.0});
  CHECK(solve(d, 1e-8).status == SolveStatus::Infeasible);
}

TEST_CASE("a coefficient-free impossible row short-circuits to infeasible") {
  ConicProblem p;
  const int blk = p.add_block(BlockKind::Nonneg, 1);
  p.add_constraint({{}, Relation::Ge, 1.0});  // 0 >= 1
  p.add_constraint({{{blk, 0, 1.0}}, Relation::Le, 5.0});
  CHECK(solve(p, 1e-8).status == SolveStatus::Infeasible);
}

TEST_CASE("descent without a floor is reported unbounded") {
  ConicProblem p;
  const int blk = p.add_block(BlockKind::Nonneg, 1);
  p.set_objective(blk, -Eigen::VectorXd::Ones(1));
  CHECK(solve(p, 1e-8).status == SolveStatus::Unbounded);
}

TEST_CASE("equality rows are honored without slackification") {
  ConicProblem p;
  const int blk = p.add_block(BlockKind::Nonneg, 2);
  p.set_objective(blk, Eigen::Vector2d(1.0, 2.0));
  p.add_constraint({{{blk, 0, 1.0}, {blk, 1, 1.0}}, Relation::Eq, 1.0});

  const SolveOutcome out = solve(p, 1e-9);
  REQUIRE(out.status == SolveStatus::Optimal);
  CHECK(out.objective == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(out.primal[0](0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(out.primal[0].sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("weak duality holds on a random inequality program") {
  // min c'x s.t. A x <= b, x >= 0 with b built to keep x = ones feasible.
  const int n = 6, m = 4;
  Eigen::MatrixXd a(m, n);
  Eigen::VectorXd c(n);
  // Fixed pseudo-random fill; values are irrelevant, feasibility is not.
  double s = 0.37;
  auto next = [&s]() {
    s = std::fmod(s * 997.0 + 0.123, 1.0);
    return s;
  };
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = next();
  }
  for (int j = 0; j < n; ++j) c(j) = 0.2 + next();
  const Eigen::VectorXd b = a * Eigen::VectorXd::Ones(n) + Eigen::VectorXd::Constant(m, 0.5);

  ConicProblem p;
  const int blk = p.add_block(BlockKind::Nonneg, n);
  p.set_objective(blk, c);
  for (int i = 0; i < m; ++i) {
    Constraint row;
    for (int j = 0; j < n; ++j) row.terms.push_back({blk, j, a(i, j)});
    row.rel = Relation::Le;
    row.rhs = b(i);
    p.add_constraint(row);
  }

  const SolveOutcome out = solve(p, 1e-9);
  REQUIRE(out.status == SolveStatus::Optimal);
  // Lagrangian bound: -b'lambda <= c'x* whenever c + A'lambda >= 0.
  const Eigen::VectorXd lam = out.row_duals;
  CHECK(lam.minCoeff() >= -1e-10);
  const Eigen::VectorXd reduced = c + a.transpose() * lam;
  CHECK(reduced.minCoeff() > -1e-6);
  CHECK(-b.dot(lam) <= out.objective + 1e-6);
  // This instance is minimized at the origin, so both sides are near zero.
  CHECK(out.objective == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("solver output is bit-for-bit deterministic") {
  const ConicProblem p = box_projection({1.7, -0.3}, {1.0, 2.0});
  const SolveOutcome a = solve(p, 1e-9);
  const SolveOutcome b = solve(p, 1e-9);
  REQUIRE(a.status == SolveStatus::Optimal);
  REQUIRE(b.status == SolveStatus::Optimal);
  CHECK(a.objective == b.objective);
  CHECK((a.primal[0].array() == b.primal[0].array()).all());
  CHECK((a.row_duals.array() == b.row_duals.array()).all());
}

TEST_CASE("hermitian embedding doubles spectra and keeps inner products") {
  HermitianEmbedding emb(2);
  Eigen::MatrixXcd h(2, 2);
  h << 1.0, kJ, -kJ, 1.0;
  const Eigen::MatrixXd e = emb.embed(h);
  REQUIRE(e.rows() == 4);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e);
  // Complex eigenvalues {0, 2} appear twice each in the real embedding.
  CHECK(es.eigenvalues()(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(es.eigenvalues()(1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(es.eigenvalues()(2) == doctest::Approx(2.0));
  CHECK(es.eigenvalues()(3) == doctest::Approx(2.0));

  // lift inverts embed.
  CHECK(emb.lift(e).isApprox(h, 1e-14));

  // Arbitrary symmetric input is projected, preserving PSD-ness.
  Eigen::MatrixXd skewed = e;
  skewed(0, 1) += 0.25;
  skewed(1, 0) += 0.25;
  const Eigen::MatrixXcd lifted = emb.lift(0.5 * (skewed + skewed.transpose()) +
                                           Eigen::MatrixXd::Identity(4, 4));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> esl(lifted);
  CHECK(esl.eigenvalues().minCoeff() > 0.0);

  // Re tr(A^dag X) = inner_coeffs(A) . svec(embed(X)).
  Eigen::MatrixXcd x(2, 2);
  x << 2.0, 0.5 - 0.25 * kJ, 0.5 + 0.25 * kJ, 1.0;
  const double direct = (h.adjoint() * x).trace().real();
  CHECK(emb.inner_coeffs(h).dot(svec(emb.embed(x))) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("dump writes the documented sparse-triplet grammar") {
  ConicProblem p;
  const int x = p.add_block(BlockKind::PsdSym, 2);
  const int r = p.add_block(BlockKind::Nonneg, 1);
  p.set_objective(r, Eigen::VectorXd::Ones(1));
  p.set_quadratic(r, Eigen::MatrixXd::Identity(1, 1));
  p.add_constraint({{{x, 0, 1.0}, {r, 0, -2.0}}, Relation::Le, 0.5});

  const std::string path = "conic_dump_roundtrip.txt";
  p.dump(path);
  std::ifstream is(path);
  REQUIRE(is.good());
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  CHECK(text.find("block 0 psd 2") != std::string::npos);
  CHECK(text.find("block 1 nonneg 1") != std::string::npos);
  CHECK(text.find("obj 1 0 1") != std::string::npos);
  CHECK(text.find("quad 1 0 0 1") != std::string::npos);
  CHECK(text.find("row 0 le 0.5") != std::string::npos);
  CHECK(text.find("term 0 0 0 1") != std::string::npos);
  CHECK(text.find("term 0 1 0 -2") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("malformed problems are rejected up front") {
  ConicProblem p;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);  // no blocks
  const int blk = p.add_block(BlockKind::Nonneg, 2);
  CHECK_THROWS_AS(p.add_block(BlockKind::Free, 0), std::invalid_argument);
  CHECK_THROWS_AS(p.set_objective(blk, Eigen::VectorXd::Ones(3)), std::invalid_argument);
  CHECK_THROWS_AS(p.add_constraint({{{blk, 5, 1.0}}, Relation::Le, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(p.add_constraint({{{7, 0, 1.0}}, Relation::Le, 1.0}), std::invalid_argument);

  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_AS(p.set_quadratic(blk, asym), std::invalid_argument);
  Eigen::MatrixXd indef(2, 2);
  indef << 1.0, 0.0, 0.0, -1.0;
  p.set_quadratic(blk, indef);
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
