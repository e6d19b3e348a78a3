// SPDX-License-Identifier: Apache-2.0
#include "model.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include "doctest.h"

using namespace mgmc;
using std::complex;

namespace {
const complex<double> kJ(0.0, 1.0);
}

TEST_CASE("channel gain is the squared magnitude of the row inner product") {
  Eigen::MatrixXcd e(1, 2);
  e << 1.0, kJ;
  ChannelMatrix h(e);
  CHECK(h.n_users() == 1);
  CHECK(h.n_antennas() == 2);

  Eigen::VectorXcd w(2);
  w << 1.0, 0.0;
  CHECK(h.gain(0, w) == doctest::Approx(1.0));
  w << 0.0, 1.0;
  CHECK(h.gain(0, w) == doctest::Approx(1.0));
  w << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  CHECK(h.gain(0, w) == doctest::Approx(1.0));  // |1 + j|^2 / 2

  CHECK_THROWS_AS(h.gain(2, w), std::out_of_range);
  CHECK_THROWS_AS(h.gain(0, Eigen::VectorXcd::Ones(3)), std::invalid_argument);
}

TEST_CASE("channel matrix rejects empty or non-finite input") {
  CHECK_THROWS_AS(ChannelMatrix(Eigen::MatrixXcd(0, 2)), std::invalid_argument);
  Eigen::MatrixXcd bad(1, 1);
  bad << complex<double>(std::nan(""), 0.0);
  CHECK_THROWS_AS(ChannelMatrix{bad}, std::invalid_argument);
}

TEST_CASE("group assignment validates a disjoint exhaustive partition") {
  GroupAssignment ga({{0, 2}, {1, 3}}, 4);
  CHECK(ga.n_groups() == 2);
  CHECK(ga.group_of(0) == 0);
  CHECK(ga.group_of(1) == 1);
  CHECK(ga.group_of(2) == 0);
  CHECK(ga.group_of(3) == 1);
  CHECK(ga.members(1) == std::vector<int>{1, 3});

  CHECK_THROWS_AS(GroupAssignment({{0, 1}, {1}}, 2), std::invalid_argument);  // overlap
  CHECK_THROWS_AS(GroupAssignment({{0}}, 2), std::invalid_argument);          // user 1 unassigned
  CHECK_THROWS_AS(GroupAssignment({{0}, {}}, 1), std::invalid_argument);      // empty group
  CHECK_THROWS_AS(GroupAssignment({{0, 7}}, 2), std::invalid_argument);       // out of range
}

TEST_CASE("noise and power vectors require positive finite entries") {
  const NoiseProfile noise = NoiseProfile::uniform(3, 0.5);
  CHECK(noise.n_users() == 3);
  CHECK(noise.variance(2) == 0.5);
  CHECK_THROWS_AS(NoiseProfile(Eigen::VectorXd::Zero(2)), std::invalid_argument);

  const PacVector pac = PacVector::uniform(4, 2.5);
  CHECK(pac.n_antennas() == 4);
  CHECK(pac.limit(0) == 2.5);
  CHECK(pac.total() == doctest::Approx(10.0));
  Eigen::VectorXd neg(2);
  neg << 1.0, -1.0;
  CHECK_THROWS_AS(PacVector{neg}, std::invalid_argument);
}

TEST_CASE("run config defaults are valid and each knob is range-checked") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.n_rand == 100);
  CHECK(cfg.delta == 0.4);
  CHECK(cfg.l_max == 1);

  RunConfig bad = cfg;
  bad.n_rand = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.delta = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.l_max = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.sr_tol = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  const PacVector pac = PacVector::uniform(4, 2.5);
  CHECK(RunConfig::default_power_floor(pac) == doctest::Approx(1e-9));
}

TEST_CASE("rayleigh entries are unit-variance and drawn row-major") {
  Philox rng(2024, 0);
  const ChannelMatrix h = gen_rayleigh(40, 50, rng);
  double second = 0.0;
  complex<double> mean = 0.0;
  for (int i = 0; i < h.n_users(); ++i) {
    for (int n = 0; n < h.n_antennas(); ++n) {
      second += std::norm(h.entries()(i, n));
      mean += h.entries()(i, n);
    }
  }
  const double count = 40.0 * 50.0;
  CHECK(second / count == doctest::Approx(1.0).epsilon(0.05));
  CHECK(std::abs(mean) / count < 0.05);

  // Replaying the stream reproduces the same matrix entry by entry, rows
  // before columns.
  Philox replay(2024, 0);
  for (int i = 0; i < 2; ++i) {
    for (int n = 0; n < h.n_antennas(); ++n) {
      CHECK(h.entries()(i, n) == replay.next_cnormal());
    }
  }
}

TEST_CASE("steering vector is all-ones at broadside and unit-modulus everywhere") {
  const Eigen::VectorXcd broadside = ula_steering(90.0, 6);
  for (int n = 0; n < 6; ++n) {
    CHECK(std::abs(broadside(n) - 1.0) < 1e-12);
  }

  const Eigen::VectorXcd endfire = ula_steering(0.0, 4);
  for (int n = 0; n < 4; ++n) {
    CHECK(endfire(n).real() == doctest::Approx(n % 2 == 0 ? 1.0 : -1.0));
    CHECK(std::abs(ula_steering(37.0, 4)(n)) == doctest::Approx(1.0));
  }

  // Element n advances linearly in phase: a_n = a_1^n.
  const Eigen::VectorXcd a = ula_steering(60.0, 5);
  for (int n = 0; n < 5; ++n) {
    CHECK(std::abs(a(n) - std::pow(a(1), n)) < 1e-12);
  }

  CHECK_THROWS_AS(ula_steering(-0.5, 4), std::invalid_argument);
  CHECK_THROWS_AS(ula_steering(180.5, 4), std::invalid_argument);
}

TEST_CASE("line-of-sight channels put the conjugated steering vector in each row") {
  const ChannelMatrix h = gen_ula_channels({30.0, 110.0}, 4);
  CHECK(h.n_users() == 2);
  const Eigen::VectorXcd a0 = ula_steering(30.0, 4);
  for (int n = 0; n < 4; ++n) {
    CHECK(std::abs(h.entries()(0, n) - std::conj(a0(n))) < 1e-15);
  }
  // Matched beam: coherent gain N_t^2.
  CHECK(h.gain(0, a0) == doctest::Approx(16.0));
  CHECK(h.gain(1, ula_steering(110.0, 4)) == doctest::Approx(16.0));
}

TEST_CASE("uniform grouping slices users into contiguous equal blocks") {
  const GroupAssignment ga = uniform_groups(8, 4);
  CHECK(ga.n_groups() == 4);
  CHECK(ga.members(0) == std::vector<int>{0, 1});
  CHECK(ga.members(3) == std::vector<int>{6, 7});
  CHECK_THROWS_AS(uniform_groups(7, 2), std::invalid_argument);
  CHECK_THROWS_AS(uniform_groups(4, 8), std::invalid_argument);
}
