// SPDX-License-Identifier: Apache-2.0
#include "metrics.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "model.hpp"

using namespace mgmc;

namespace {

ChannelMatrix scalar_users(int n_users) {
  // n_users single-antenna users with unit channels.
  return ChannelMatrix(Eigen::MatrixXcd::Ones(n_users, 1));
}

}  // namespace

TEST_CASE("sinr divides own-group power by interference plus noise") {
  const ChannelMatrix h = scalar_users(2);
  const GroupAssignment groups({{0}, {1}}, 2);
  const NoiseProfile noise = NoiseProfile::uniform(2, 1.0);
  Beamformers w(1, 2);
  w << std::sqrt(2.0), 1.0;

  CHECK(sinr(h, groups, noise, w, 0) == doctest::Approx(1.0));        // 2 / (1 + 1)
  CHECK(sinr(h, groups, noise, w, 1) == doctest::Approx(1.0 / 3.0));  // 1 / (2 + 1)
  const Eigen::VectorXd all = all_sinrs(h, groups, noise, w);
  CHECK(all(0) == doctest::Approx(1.0));
  CHECK(all(1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("orthogonal channels see no cross-group interference") {
  Eigen::MatrixXcd e(2, 2);
  e << 1.0, 0.0, 0.0, 1.0;
  const ChannelMatrix h(e);
  const GroupAssignment groups({{0}, {1}}, 2);
  const NoiseProfile noise = NoiseProfile::uniform(2, 0.5);
  const Beamformers w = Eigen::MatrixXcd::Identity(2, 2);

  CHECK(sinr(h, groups, noise, w, 0) == doctest::Approx(2.0));
  CHECK(sinr(h, groups, noise, w, 1) == doctest::Approx(2.0));
  CHECK(sum_rate(h, groups, noise, w) == doctest::Approx(2.0 * std::log2(3.0)));
}

TEST_CASE("group rate is pinned to the worst member") {
  // Two users share one stream; user 1 has the weaker channel.
  Eigen::MatrixXcd e(2, 1);
  e << 1.0, 0.5;
  const ChannelMatrix h(e);
  const GroupAssignment groups({{0, 1}}, 2);
  const NoiseProfile noise = NoiseProfile::uniform(2, 1.0);
  Beamformers w(1, 1);
  w << 2.0;

  CHECK(sinr(h, groups, noise, w, 0) == doctest::Approx(4.0));
  CHECK(sinr(h, groups, noise, w, 1) == doctest::Approx(1.0));
  CHECK(group_min_sinr(h, groups, noise, w, 0) == doctest::Approx(1.0));
  // Both users transmit at the group rate: 2 * log2(2).
  CHECK(sum_rate(h, groups, noise, w) == doctest::Approx(2.0));
}

TEST_CASE("sum rate counts every user at its group minimum") {
  // Eight users, one group, SINR tuned so each user carries 0.83 bits.
  const int n_users = 8;
  const ChannelMatrix h = scalar_users(n_users);
  const GroupAssignment groups = uniform_groups(n_users, 1);
  const NoiseProfile noise = NoiseProfile::uniform(n_users, 1.0);
  const double target = std::pow(2.0, 0.83) - 1.0;
  Beamformers w(1, 1);
  w << std::sqrt(target);
  CHECK(sum_rate(h, groups, noise, w) == doctest::Approx(6.64));

  // And 2 * log2(5) for two users at SINR 4.
  const ChannelMatrix h2 = scalar_users(2);
  const GroupAssignment g2 = uniform_groups(2, 1);
  const NoiseProfile n2 = NoiseProfile::uniform(2, 1.0);
  Beamformers w2(1, 1);
  w2 << 2.0;
  CHECK(sum_rate(h2, g2, n2, w2) == doctest::Approx(2.0 * std::log2(5.0)));
}

TEST_CASE("scaling beams and noise together leaves sinr invariant") {
  Philox rng(11, 0);
  const ChannelMatrix h = gen_rayleigh(4, 3, rng);
  const GroupAssignment groups = uniform_groups(4, 2);
  Beamformers w(3, 2);
  for (int n = 0; n < 3; ++n) {
    for (int g = 0; g < 2; ++g) w(n, g) = rng.next_cnormal();
  }
  const NoiseProfile base = NoiseProfile::uniform(4, 1.0);
  const NoiseProfile scaled = NoiseProfile::uniform(4, 4.0);
  for (int u = 0; u < 4; ++u) {
    CHECK(sinr(h, groups, scaled, 2.0 * w, u) ==
          doctest::Approx(sinr(h, groups, base, w, u)).epsilon(1e-12));
  }
}

TEST_CASE("antenna powers are the row norms of the beam bundle") {
  Beamformers w(2, 2);
  w << std::complex<double>(1.0, 1.0), 1.0, 0.0, std::complex<double>(0.0, 2.0);
  const Eigen::VectorXd p = antenna_powers(w);
  CHECK(p(0) == doctest::Approx(3.0));  // |1+j|^2 + 1
  CHECK(p(1) == doctest::Approx(4.0));
  CHECK(total_power(w) == doctest::Approx(7.0));

  const PacVector pac(Eigen::Vector2d(6.0, 4.0));
  CHECK(pac_utilization(w, pac) == doctest::Approx(1.0));  // antenna 1 binds
}

TEST_CASE("pattern peaks where the beam is steered") {
  const int n_t = 6;
  Beamformers w(n_t, 1);
  w.col(0) = ula_steering(75.0, n_t);
  CHECK(pattern(w, 0, 75.0) == doctest::Approx(36.0));  // coherent: N_t^2
  CHECK(pattern(w, 0, 75.0) > pattern(w, 0, 30.0));
  CHECK(pattern(w, 0, 75.0) > pattern(w, 0, 120.0));

  const std::vector<double> grid{30.0, 75.0, 120.0};
  const Eigen::MatrixXd m = pattern(w, grid);
  CHECK(m.rows() == 3);
  CHECK(m.cols() == 1);
  for (int t = 0; t < 3; ++t) {
    CHECK(m(t, 0) == doctest::Approx(pattern(w, 0, grid[static_cast<std::size_t>(t)])));
  }
}

TEST_CASE("evaluation report fields agree with the underlying metrics") {
  Philox rng(5, 1);
  const ChannelMatrix h = gen_rayleigh(4, 3, rng);
  const GroupAssignment groups = uniform_groups(4, 2);
  const NoiseProfile noise = NoiseProfile::uniform(4, 1.0);
  const PacVector pac = PacVector::uniform(3, 2.0);
  Beamformers w(3, 2);
  for (int n = 0; n < 3; ++n) {
    for (int g = 0; g < 2; ++g) w(n, g) = rng.next_cnormal();
  }

  const EvaluationReport rep = evaluate(h, groups, noise, pac, w);
  CHECK(rep.sinrs.size() == 4);
  CHECK(rep.rates.size() == 4);
  CHECK(rep.group_minima.size() == 2);
  for (int u = 0; u < 4; ++u) {
    CHECK(rep.sinrs(u) == doctest::Approx(sinr(h, groups, noise, w, u)));
    CHECK(rep.rates(u) ==
          doctest::Approx(std::log2(1.0 + rep.group_minima(groups.group_of(u)))));
  }
  CHECK(rep.sum_rate_bits == doctest::Approx(sum_rate(h, groups, noise, w)));
  CHECK(rep.total_power_watts == doctest::Approx(total_power(w)));
  CHECK(rep.pac_util == doctest::Approx(pac_utilization(w, pac)));
}
