// SPDX-License-Identifier: Apache-2.0
#include "model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mgmc {

ChannelMatrix::ChannelMatrix(Eigen::MatrixXcd entries) : entries_(std::move(entries)) {
  if (entries_.rows() < 1 || entries_.cols() < 1) {
    throw std::invalid_argument("ChannelMatrix: need at least one user and one antenna");
  }
  if (!entries_.allFinite()) {
    throw std::invalid_argument("ChannelMatrix: entries must be finite");
  }
}

double ChannelMatrix::gain(int user, const Eigen::VectorXcd& w) const {
  if (user < 0 || user >= n_users()) throw std::out_of_range("ChannelMatrix::gain: bad user");
  if (w.size() != n_antennas()) throw std::invalid_argument("ChannelMatrix::gain: bad vector size");
  const std::complex<double> inner = entries_.row(user) * w;
  return std::norm(inner);
}

GroupAssignment::GroupAssignment(std::vector<std::vector<int>> groups, int n_users)
    : groups_(std::move(groups)), n_users_(n_users) {
  if (n_users_ < 1) throw std::invalid_argument("GroupAssignment: need at least one user");
  if (groups_.empty()) throw std::invalid_argument("GroupAssignment: need at least one group");
  user_group_.assign(static_cast<std::size_t>(n_users_), -1);
  for (int g = 0; g < static_cast<int>(groups_.size()); ++g) {
    if (groups_[g].empty()) throw std::invalid_argument("GroupAssignment: empty group");
    for (int u : groups_[g]) {
      if (u < 0 || u >= n_users_) throw std::invalid_argument("GroupAssignment: user out of range");
      if (user_group_[static_cast<std::size_t>(u)] != -1) {
        throw std::invalid_argument("GroupAssignment: user in more than one group");
      }
      user_group_[static_cast<std::size_t>(u)] = g;
    }
  }
  for (int u = 0; u < n_users_; ++u) {
    if (user_group_[static_cast<std::size_t>(u)] == -1) {
      throw std::invalid_argument("GroupAssignment: user not assigned to any group");
    }
  }
}

NoiseProfile::NoiseProfile(Eigen::VectorXd variances) : variances_(std::move(variances)) {
  if (variances_.size() < 1) throw std::invalid_argument("NoiseProfile: empty");
  if (!(variances_.array() > 0.0).all() || !variances_.allFinite()) {
    throw std::invalid_argument("NoiseProfile: variances must be positive and finite");
  }
}

NoiseProfile NoiseProfile::uniform(int n_users, double variance) {
  return NoiseProfile(Eigen::VectorXd::Constant(n_users, variance));
}

PacVector::PacVector(Eigen::VectorXd limits) : limits_(std::move(limits)) {
  if (limits_.size() < 1) throw std::invalid_argument("PacVector: empty");
  if (!(limits_.array() > 0.0).all() || !limits_.allFinite()) {
    throw std::invalid_argument("PacVector: limits must be positive and finite");
  }
}

PacVector PacVector::uniform(int n_antennas, double limit) {
  return PacVector(Eigen::VectorXd::Constant(n_antennas, limit));
}

void RunConfig::validate() const {
  if (n_rand < 1) throw std::invalid_argument("RunConfig: n_rand must be >= 1");
  if (!(delta > 0.0)) throw std::invalid_argument("RunConfig: delta must be > 0");
  if (l_max < 1) throw std::invalid_argument("RunConfig: l_max must be >= 1");
  if (outer_max < 1) throw std::invalid_argument("RunConfig: outer_max must be >= 1");
  if (!(sr_tol > 0.0)) throw std::invalid_argument("RunConfig: sr_tol must be > 0");
  if (!(solver_tol > 0.0)) throw std::invalid_argument("RunConfig: solver_tol must be > 0");
  if (!(power_floor > 0.0)) throw std::invalid_argument("RunConfig: power_floor must be > 0");
}

ChannelMatrix gen_rayleigh(int n_users, int n_antennas, Philox& rng) {
  if (n_users < 1 || n_antennas < 1) throw std::invalid_argument("gen_rayleigh: bad dimensions");
  Eigen::MatrixXcd h(n_users, n_antennas);
  for (int i = 0; i < n_users; ++i) {
    for (int n = 0; n < n_antennas; ++n) h(i, n) = rng.next_cnormal();
  }
  return ChannelMatrix(std::move(h));
}

Eigen::VectorXcd ula_steering(double theta_deg, int n_antennas) {
  if (n_antennas < 1) throw std::invalid_argument("ula_steering: bad antenna count");
  if (!(theta_deg >= 0.0 && theta_deg <= 180.0)) {
    throw std::invalid_argument("ula_steering: angle must be in [0, 180] degrees");
  }
  const double c = std::cos(theta_deg * std::numbers::pi / 180.0);
  Eigen::VectorXcd a(n_antennas);
  for (int n = 0; n < n_antennas; ++n) {
    const double phase = std::numbers::pi * static_cast<double>(n) * c;
    a(n) = std::complex<double>(std::cos(phase), std::sin(phase));
  }
  return a;
}

ChannelMatrix gen_ula_channels(const std::vector<double>& angles_deg, int n_antennas) {
  if (angles_deg.empty()) throw std::invalid_argument("gen_ula_channels: no users");
  Eigen::MatrixXcd h(static_cast<int>(angles_deg.size()), n_antennas);
  for (int i = 0; i < static_cast<int>(angles_deg.size()); ++i) {
    h.row(i) = ula_steering(angles_deg[static_cast<std::size_t>(i)], n_antennas).adjoint();
  }
  return ChannelMatrix(std::move(h));
}

GroupAssignment uniform_groups(int n_users, int n_groups) {
  if (n_groups < 1 || n_users < n_groups || n_users % n_groups != 0) {
    throw std::invalid_argument("uniform_groups: group count must evenly divide user count");
  }
  const int rho = n_users / n_groups;
  std::vector<std::vector<int>> groups(static_cast<std::size_t>(n_groups));
  for (int g = 0; g < n_groups; ++g) {
    for (int r = 0; r < rho; ++r) groups[static_cast<std::size_t>(g)].push_back(g * rho + r);
  }
  return GroupAssignment(std::move(groups), n_users);
}

}  // namespace mgmc
