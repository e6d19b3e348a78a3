// SPDX-License-Identifier: Apache-2.0
//
// Power reallocation stage: decoupling precoders into unit directions and
// group powers, the sum-rate subgradient in log-power space, and Euclidean
// projection onto the per-antenna power polyhedron.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "metrics.hpp"
#include "model.hpp"

namespace mgmc {

/// Fixed-direction decomposition W = [sqrt(p_k) v_k]. A column that carried
/// no power sits at the floor with a placeholder direction and is flagged.
struct PowerState {
  std::vector<Eigen::VectorXcd> v;  // unit-norm directions, one per group
  Eigen::VectorXd p;                // group powers, watts
  Eigen::VectorXd s;                // log p
  std::vector<bool> floored;        // group pinned at the power floor

  Beamformers recompose() const;
};

/// Per-antenna constraints in power space: sum_k a(n,k) p_k <= limits(n) with
/// a(n,k) = |v_k(n)|^2, so a is entrywise nonnegative with unit column sums.
struct PacPolyhedron {
  Eigen::MatrixXd a;       // N_t x G
  Eigen::VectorXd limits;  // P_n

  static PacPolyhedron from_directions(const std::vector<Eigen::VectorXcd>& v,
                                       const PacVector& pac);
};

/// Split W column-wise into p_k = ||w_k||^2 and v_k = w_k/||w_k||. Vanished
/// columns take power_floor and the first canonical basis direction.
PowerState decouple(const Beamformers& w, double power_floor);

/// Direction r of the fixed-direction recursion s - delta*r. With gains taken
/// at each group's minimum-SINR user (lowest index on ties), -r is the
/// gradient of sum_m log2(1 + sinr_m) in s, so the recursion ascends the sum
/// rate. Throws std::domain_error when a served group has zero own-gain at
/// its minimum user.
Eigen::VectorXd subgradient(const PowerState& state, const ChannelMatrix& h,
                            const GroupAssignment& groups, const NoiseProfile& noise);

/// Euclidean projection onto {p >= 0, a p <= limits}: the nearest feasible
/// power vector to x. Exact on interior points and idempotent.
Eigen::VectorXd project_pac(const Eigen::VectorXd& x, const PacPolyhedron& poly);

/// One recursion step: x = exp(s - delta*r) elementwise, projected onto the
/// polyhedron intersected with p >= power_floor, directions unchanged. The
/// floor rides inside the projection, so the result is feasible and bounded
/// away from log(0) at once.
PowerState step(const PowerState& state, const ChannelMatrix& h, const GroupAssignment& groups,
                const NoiseProfile& noise, const PacPolyhedron& poly, double delta,
                double power_floor);

}  // namespace mgmc
