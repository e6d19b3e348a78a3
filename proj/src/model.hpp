// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "rng.hpp"

namespace mgmc {

/// User-channel matrix H (N_u x N_t). Row i holds the conjugated channel
/// h_i^dag of user i, so |h_i^dag w| = |H.row(i) * w|.
class ChannelMatrix {
 public:
  explicit ChannelMatrix(Eigen::MatrixXcd entries);

  int n_users() const { return static_cast<int>(entries_.rows()); }
  int n_antennas() const { return static_cast<int>(entries_.cols()); }
  const Eigen::MatrixXcd& entries() const { return entries_; }

  /// |h_i^dag w|^2 for a beamforming column w.
  double gain(int user, const Eigen::VectorXcd& w) const;

 private:
  Eigen::MatrixXcd entries_;
};

/// Partition of users {0..N_u-1} into G disjoint, nonempty multicast groups.
class GroupAssignment {
 public:
  explicit GroupAssignment(std::vector<std::vector<int>> groups, int n_users);

  int n_groups() const { return static_cast<int>(groups_.size()); }
  int n_users() const { return n_users_; }
  const std::vector<int>& members(int g) const { return groups_.at(g); }
  int group_of(int user) const { return user_group_.at(user); }

 private:
  std::vector<std::vector<int>> groups_;
  std::vector<int> user_group_;
  int n_users_ = 0;
};

/// Per-user noise variances, watts.
class NoiseProfile {
 public:
  explicit NoiseProfile(Eigen::VectorXd variances);
  static NoiseProfile uniform(int n_users, double variance);

  int n_users() const { return static_cast<int>(variances_.size()); }
  double variance(int user) const { return variances_(user); }
  const Eigen::VectorXd& variances() const { return variances_; }

 private:
  Eigen::VectorXd variances_;
};

/// Per-antenna power limits P_n, watts.
class PacVector {
 public:
  explicit PacVector(Eigen::VectorXd limits);
  static PacVector uniform(int n_antennas, double limit);

  int n_antennas() const { return static_cast<int>(limits_.size()); }
  double limit(int antenna) const { return limits_(antenna); }
  const Eigen::VectorXd& limits() const { return limits_; }
  double total() const { return limits_.sum(); }

 private:
  Eigen::VectorXd limits_;
};

/// Knobs for the iterative solvers and the randomization stage.
struct RunConfig {
  int n_rand = 100;          // Gaussian randomizations per QoS solve
  double delta = 0.4;        // sub-gradient step
  int l_max = 1;             // sub-gradient iterations per outer step
  int outer_max = 50;        // outer iteration cap
  double sr_tol = 1e-3;      // relative sum-rate convergence tolerance
  double solver_tol = 1e-8;  // conic solver accuracy
  std::uint64_t seed = 0;
  double power_floor = 1e-12;  // minimum representable group power

  void validate() const;

  /// Floor tied to the power budget so "off" groups stay representable in
  /// log space at any operating point.
  static double default_power_floor(const PacVector& pac) { return 1e-10 * pac.total(); }
};

/// I.i.d. circularly-symmetric complex Gaussian entries, zero mean, unit
/// variance. Entries are drawn row-major, so a given (seed, stream) is
/// bit-reproducible.
ChannelMatrix gen_rayleigh(int n_users, int n_antennas, Philox& rng);

/// Half-wavelength ULA steering vector, phase reference at element 0:
/// [a(theta)]_n = exp(j pi n cos theta). Broadside (90 deg) is all-ones.
/// theta in degrees, 0 <= theta <= 180.
Eigen::VectorXcd ula_steering(double theta_deg, int n_antennas);

/// Far-field line-of-sight channels: row i = a(angles[i])^dag.
ChannelMatrix gen_ula_channels(const std::vector<double>& angles_deg, int n_antennas);

/// Contiguous uniform allocation: group k serves users [k*rho, (k+1)*rho).
GroupAssignment uniform_groups(int n_users, int n_groups);

}  // namespace mgmc
