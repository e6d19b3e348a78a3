// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations that pin down expected values in
// tests. Deliberately naive: correctness over speed.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "model.hpp"
#include "power.hpp"

namespace mgmc::oracle {

/// Per-group minimum-SINR users at powers p with directions v, lowest index
/// on ties.
std::vector<int> min_users(const Eigen::VectorXd& p, const std::vector<Eigen::VectorXcd>& v,
                           const ChannelMatrix& h, const GroupAssignment& groups,
                           const NoiseProfile& noise);

/// Fixed-direction sum rate sum_m log2(1 + sinr of user picked[m]) at group
/// powers p; the per-group user is frozen by the caller.
double fixed_user_sum_rate(const Eigen::VectorXd& p, const std::vector<Eigen::VectorXcd>& v,
                           const ChannelMatrix& h, const GroupAssignment& groups,
                           const NoiseProfile& noise, const std::vector<int>& picked);

/// Central finite differences of fixed_user_sum_rate in s = log p, users
/// frozen at the base state.
Eigen::VectorXd fd_gradient(const PowerState& st, const ChannelMatrix& h,
                            const GroupAssignment& groups, const NoiseProfile& noise,
                            double h_step);

/// Smallest relative gap between each group's lowest and second-lowest user
/// SINR; infinity for singleton groups. Guards finite differencing away from
/// the min kink.
double min_user_margin(const Eigen::VectorXd& p, const std::vector<Eigen::VectorXcd>& v,
                       const ChannelMatrix& h, const GroupAssignment& groups,
                       const NoiseProfile& noise);

/// Projection onto {p >= 0, a p <= limits} by exhaustive active-set
/// enumeration over rows and sign bounds. Exponential; keep sizes small.
Eigen::VectorXd enumerate_projection(const Eigen::VectorXd& x, const Eigen::MatrixXd& a,
                                     const Eigen::VectorXd& limits);

/// Best sum rate over a two-group power grid with fixed directions: p_k on
/// [0, budget_k] in `steps` increments, per-antenna feasibility enforced.
double grid_max_sum_rate(const ChannelMatrix& h, const GroupAssignment& groups,
                         const NoiseProfile& noise, const PacVector& pac,
                         const std::vector<Eigen::VectorXcd>& dirs, int steps);

}  // namespace mgmc::oracle
