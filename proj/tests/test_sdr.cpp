// SPDX-License-Identifier: Apache-2.0
#include "sdr.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "metrics.hpp"
#include "model.hpp"
#include "rng.hpp"

using namespace mgmc;

namespace {

// Two single-user groups on orthogonal channels, unit targets and limits.
struct OrthogonalPair {
  ChannelMatrix h;
  GroupAssignment groups;
  SinrTargets targets;
  NoiseProfile noise;
  PacVector pac;
  OrthogonalPair()
      : h(Eigen::MatrixXcd::Identity(2, 2)),
        groups({{0}, {1}}, 2),
        targets(Eigen::Vector2d(1.0, 1.0)),
        noise(NoiseProfile::uniform(2, 1.0)),
        pac(PacVector::uniform(2, 1.0)) {}
};

void check_targets_met(const ChannelMatrix& h, const GroupAssignment& groups,
                       const SinrTargets& targets, const NoiseProfile& noise,
                       const Beamformers& w) {
  const Eigen::VectorXd s = all_sinrs(h, groups, noise, w);
  for (int i = 0; i < targets.n_users(); ++i) {
    CHECK(s(i) >= targets.target(i) * (1.0 - 1e-6));
  }
}

}  // namespace

TEST_CASE("targets must be finite and nonnegative") {
  CHECK_NOTHROW(SinrTargets(Eigen::Vector2d(0.0, 3.5)));
  CHECK_THROWS(SinrTargets(Eigen::Vector2d(1.0, -0.5)));
  CHECK_THROWS(SinrTargets(Eigen::VectorXd()));
  Eigen::VectorXd bad(1);
  bad << std::numeric_limits<double>::infinity();
  CHECK_THROWS(SinrTargets(bad));
}

TEST_CASE("scalar relaxation solves to the closed-form ratio") {
  // One antenna, one user: |h|^2 x >= gamma sigma^2 with x <= r P gives
  // x = r = gamma sigma^2 / |h|^2 = 2/9.
  const ChannelMatrix h(Eigen::MatrixXcd::Constant(1, 1, 3.0));
  const GroupAssignment groups({{0}}, 1);
  const SinrTargets targets(Eigen::VectorXd::Constant(1, 2.0));
  const NoiseProfile noise = NoiseProfile::uniform(1, 1.0);
  const PacVector pac = PacVector::uniform(1, 1.0);

  const RelaxedQ rel = solve_relaxed_q(build_relaxed_q(h, groups, targets, noise, pac), 1e-9);
  REQUIRE(rel.status == SolveStatus::Optimal);
  CHECK(rel.r_lb == doctest::Approx(2.0 / 9.0).epsilon(1e-6));
  REQUIRE(rel.cov.x.size() == 1);
  CHECK(rel.cov.x[0](0, 0).real() == doctest::Approx(2.0 / 9.0).epsilon(1e-6));
  CHECK(rel.cov.x[0](0, 0).imag() == doctest::Approx(0.0));
}

TEST_CASE("zero targets shut the transmitter down") {
  const ChannelMatrix h(Eigen::MatrixXcd::Identity(2, 2));
  const GroupAssignment groups({{0}, {1}}, 2);
  const SinrTargets targets(Eigen::Vector2d(0.0, 0.0));
  const NoiseProfile noise = NoiseProfile::uniform(2, 1.0);
  const PacVector pac = PacVector::uniform(2, 1.0);

  RunConfig cfg;
  cfg.n_rand = 4;
  Philox rng(7);
  const QSolution q = solve_q(h, groups, targets, noise, pac, cfg, rng);
  REQUIRE(q.status == QStatus::Ok);
  CHECK(q.r_star == doctest::Approx(0.0));
  CHECK(q.r_lb == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(q.w.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("orthogonal single-user groups saturate both antennas") {
  const OrthogonalPair inst;
  const RelaxedQ rel =
      solve_relaxed_q(build_relaxed_q(inst.h, inst.groups, inst.targets, inst.noise, inst.pac),
                      1e-9);
  REQUIRE(rel.status == SolveStatus::Optimal);
  CHECK(rel.r_lb == doctest::Approx(1.0).epsilon(1e-6));
  REQUIRE(rel.cov.x.size() == 2);
  for (int k = 0; k < 2; ++k) {
    Eigen::MatrixXcd want = Eigen::MatrixXcd::Zero(2, 2);
    want(k, k) = 1.0;
    CHECK((rel.cov.x[k] - want).cwiseAbs().maxCoeff() < 1e-5);
  }

  Philox rng(3);
  const QSolution q = randomize(rel.cov, inst.h, inst.groups, inst.targets, inst.noise, inst.pac,
                                20, rng, rel.r_lb);
  REQUIRE(q.status == QStatus::Ok);
  CHECK(q.r_star == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(q.r_lb <= q.r_star + 1e-7);
  check_targets_met(inst.h, inst.groups, inst.targets, inst.noise, q.w);
  const Eigen::VectorXd ap = antenna_powers(q.w);
  for (int n = 0; n < 2; ++n) CHECK(ap(n) <= q.r_star * inst.pac.limit(n) * (1.0 + 1e-9));
}

TEST_CASE("power-control lp prices the orthogonal pair at unit ratio") {
  const OrthogonalPair inst;
  std::vector<Eigen::VectorXcd> dirs{Eigen::Vector2cd(1.0, 0.0), Eigen::Vector2cd(0.0, 1.0)};
  const MmpcResult res =
      mmpc_lp(dirs, inst.h, inst.groups, inst.targets, inst.noise, inst.pac);
  REQUIRE(res.feasible);
  CHECK(res.score == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.p(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.p(1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("power-control lp with zero targets costs nothing") {
  const OrthogonalPair inst;
  const SinrTargets off(Eigen::Vector2d(0.0, 0.0));
  std::vector<Eigen::VectorXcd> dirs{Eigen::Vector2cd(1.0, 0.0), Eigen::Vector2cd(0.0, 1.0)};
  const MmpcResult res = mmpc_lp(dirs, inst.h, inst.groups, off, inst.noise, inst.pac);
  REQUIRE(res.feasible);
  CHECK(res.score == doctest::Approx(0.0));
  CHECK(res.p.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("co-channel groups with equal directions are mutually unreachable") {
  // Each user needs unit SINR against an equal-gain interferer: p1 >= p2 + 1
  // and p2 >= p1 + 1 cannot both hold.
  Eigen::MatrixXcd e(2, 2);
  e << 1.0, 0.0, 1.0, 0.0;
  const ChannelMatrix h(e);
  const GroupAssignment groups({{0}, {1}}, 2);
  const SinrTargets targets(Eigen::Vector2d(1.0, 1.0));
  const NoiseProfile noise = NoiseProfile::uniform(2, 1.0);
  const PacVector pac = PacVector::uniform(2, 1.0);
  std::vector<Eigen::VectorXcd> dirs{Eigen::Vector2cd(1.0, 0.0), Eigen::Vector2cd(1.0, 0.0)};
  const MmpcResult res = mmpc_lp(dirs, h, groups, targets, noise, pac);
  CHECK_FALSE(res.feasible);
}

TEST_CASE("identical channels in separate groups make the relaxation infeasible") {
  const ChannelMatrix h(Eigen::MatrixXcd::Ones(2, 1));
  const GroupAssignment groups({{0}, {1}}, 2);
  const SinrTargets targets(Eigen::Vector2d(1.0, 1.0));
  const NoiseProfile noise = NoiseProfile::uniform(2, 1.0);
  const PacVector pac = PacVector::uniform(1, 1.0);

  RunConfig cfg;
  Philox rng(1);
  const QSolution q = solve_q(h, groups, targets, noise, pac, cfg, rng);
  CHECK(q.status == QStatus::Infeasible);
}

TEST_CASE("single-user relaxation is reproduced by its principal eigenvector") {
  Eigen::MatrixXcd e(1, 2);
  e << std::complex<double>(1.0, 0.5), std::complex<double>(-0.3, 1.1);
  const ChannelMatrix h(e);
  const GroupAssignment groups({{0}}, 1);
  const SinrTargets targets(Eigen::VectorXd::Constant(1, 1.5));
  const NoiseProfile noise = NoiseProfile::uniform(1, 1.0);
  const PacVector pac(Eigen::Vector2d(1.0, 0.6));

  const RelaxedQ rel = solve_relaxed_q(build_relaxed_q(h, groups, targets, noise, pac), 1e-9);
  REQUIRE(rel.status == SolveStatus::Optimal);
  Philox rng(11);
  // No random draws: the deterministic eigenvector candidate must close the gap.
  const QSolution q =
      randomize(rel.cov, h, groups, targets, noise, pac, 0, rng, rel.r_lb);
  REQUIRE(q.status == QStatus::Ok);
  CHECK(q.r_star - q.r_lb <= 1e-6);
  CHECK(q.r_lb <= q.r_star + 1e-7);
  check_targets_met(h, groups, targets, noise, q.w);
}

TEST_CASE("sandwich and feasibility hold on random instances") {
  Philox chan(42);
  for (int trial = 0; trial < 6; ++trial) {
    const ChannelMatrix h = gen_rayleigh(4, 3, chan);
    const GroupAssignment groups = uniform_groups(4, 2);
    const SinrTargets targets(Eigen::VectorXd::Constant(4, 0.8));
    const NoiseProfile noise = NoiseProfile::uniform(4, 1.0);
    const PacVector pac = PacVector::uniform(3, 1.0);

    RunConfig cfg;
    cfg.n_rand = 60;
    Philox rng(100 + trial);
    const QSolution q = solve_q(h, groups, targets, noise, pac, cfg, rng);
    REQUIRE(q.status == QStatus::Ok);
    CHECK(q.r_lb <= q.r_star + 1e-7);
    CHECK(q.n_feasible_candidates > 0);
    check_targets_met(h, groups, targets, noise, q.w);
    const Eigen::VectorXd ap = antenna_powers(q.w);
    for (int n = 0; n < 3; ++n) CHECK(ap(n) <= q.r_star * pac.limit(n) * (1.0 + 1e-9));
  }
}

TEST_CASE("scaling every target up never lowers the relaxation bound") {
  Philox chan(5);
  const ChannelMatrix h = gen_rayleigh(3, 2, chan);
  const GroupAssignment groups = uniform_groups(3, 1);
  const NoiseProfile noise = NoiseProfile::uniform(3, 1.0);
  const PacVector pac = PacVector::uniform(2, 1.0);

  double prev = 0.0;
  for (const double t : {0.5, 1.0, 2.0, 4.0}) {
    const SinrTargets targets(Eigen::VectorXd::Constant(3, t));
    const RelaxedQ rel = solve_relaxed_q(build_relaxed_q(h, groups, targets, noise, pac), 1e-9);
    REQUIRE(rel.status == SolveStatus::Optimal);
    CHECK(rel.r_lb >= prev - 1e-9);
    prev = rel.r_lb;
  }
}

TEST_CASE("min-power flavor splits evenly across orthogonal users") {
  // Orthogonal channels decouple: each group needs exactly gamma sigma^2 of
  // transmit power, so the total is 2.
  const OrthogonalPair inst;
  RunConfig cfg;
  cfg.n_rand = 20;
  Philox rng(9);
  const QSolution q =
      solve_q_min_power(inst.h, inst.groups, inst.targets, inst.noise, cfg, rng);
  REQUIRE(q.status == QStatus::Ok);
  CHECK(q.r_lb == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(q.r_star == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(total_power(q.w) == doctest::Approx(q.r_star).epsilon(1e-9));
  check_targets_met(inst.h, inst.groups, inst.targets, inst.noise, q.w);
}

TEST_CASE("randomization is deterministic for a fixed seed") {
  Philox chan(8);
  const ChannelMatrix h = gen_rayleigh(4, 3, chan);
  const GroupAssignment groups = uniform_groups(4, 2);
  const SinrTargets targets(Eigen::VectorXd::Constant(4, 0.5));
  const NoiseProfile noise = NoiseProfile::uniform(4, 1.0);
  const PacVector pac = PacVector::uniform(3, 1.0);
  RunConfig cfg;
  cfg.n_rand = 30;

  Philox r1(77), r2(77);
  const QSolution a = solve_q(h, groups, targets, noise, pac, cfg, r1);
  const QSolution b = solve_q(h, groups, targets, noise, pac, cfg, r2);
  REQUIRE(a.status == QStatus::Ok);
  REQUIRE(b.status == QStatus::Ok);
  CHECK(a.r_star == b.r_star);
  CHECK((a.w - b.w).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("incumbent candidates compete with the random draws") {
  const OrthogonalPair inst;
  const RelaxedQ rel =
      solve_relaxed_q(build_relaxed_q(inst.h, inst.groups, inst.targets, inst.noise, inst.pac),
                      1e-9);
  REQUIRE(rel.status == SolveStatus::Optimal);
  // Hand the known optimum in as an incumbent; the result can only match it.
  Eigen::MatrixXcd best = Eigen::MatrixXcd::Identity(2, 2);
  Philox rng(13);
  const QSolution q = randomize(rel.cov, inst.h, inst.groups, inst.targets, inst.noise, inst.pac,
                                5, rng, rel.r_lb, 1e-8, {best});
  REQUIRE(q.status == QStatus::Ok);
  CHECK(q.r_star <= 1.0 + 1e-6);
}
