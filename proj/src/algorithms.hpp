// SPDX-License-Identifier: Apache-2.0
//
// Outer loops over the QoS and power stages: sum-rate maximization under
// per-antenna or sum power constraints, max-min fair balancing by bisection,
// and rescaling of sum-power solutions onto per-antenna limits.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "metrics.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace mgmc {

/// One outer iteration: the per-group SINR targets entering the QoS stage,
/// the QoS score (worst per-antenna utilization, or total watts under a sum
/// constraint), the group powers after reallocation, and the sum rate of the
/// recomposed precoder. Record 0 captures the initial precoder before any
/// QoS solve, so the best-iterate guarantee covers the starting point too.
struct IterationRecord {
  Eigen::VectorXd targets;       // per group, zero = group switched off
  double r_star = 0.0;
  Eigen::VectorXd group_powers;  // per group, watts
  double sum_rate = 0.0;
  std::vector<bool> groups_off;
};

/// Trajectory of a sum-rate loop. The solution is the recorded iterate with
/// the highest sum rate, never a later, worse one.
struct SolveTrace {
  std::vector<IterationRecord> iterations;
  int best_index = 0;
};

struct SumRateSolution {
  Beamformers w;
  SolveTrace trace;
};

/// Iterative sum-rate maximization under per-antenna limits: per-group
/// minimum SINRs of the incumbent feed the QoS stage, whose precoder is
/// decoupled into directions and powers; the powers then take cfg.l_max
/// projected ascent steps before recomposition. Stops when the relative
/// sum-rate change drops below cfg.sr_tol or cfg.outer_max is reached.
/// Keeping the incumbent among the randomization candidates guarantees the
/// QoS re-solve never scores worse than the incumbent's own utilization.
SumRateSolution max_sr_pac(const ChannelMatrix& h, const GroupAssignment& groups,
                           const PacVector& pac, const NoiseProfile& noise, const RunConfig& cfg,
                           Philox& rng);

/// Same loop under a total-power budget: the QoS stage minimizes total watts
/// and the power ascent projects onto {p >= 0, sum p <= p_tot}.
SumRateSolution max_sr_spc(const ChannelMatrix& h, const GroupAssignment& groups, double p_tot,
                           const NoiseProfile& noise, const RunConfig& cfg, Philox& rng);

/// Max-min fair precoder under per-antenna limits: bisection on the common
/// SINR target, feasibility probed on the rank-relaxed QoS problem, precoder
/// extracted by randomization at the final feasible target and scaled down
/// if the extraction overshoots the limits. `probes`, when given, receives
/// the number of relaxed feasibility solves.
Beamformers max_min_fair_pac(const ChannelMatrix& h, const GroupAssignment& groups,
                             const PacVector& pac, const NoiseProfile& noise,
                             const RunConfig& cfg, Philox& rng, int* probes = nullptr);

enum class RescaleMode {
  RowWise,      // scale only violating rows down to their limit
  GlobalAlpha,  // one scalar: min_n sqrt(P_n / row power n)
};

/// Force per-antenna compliance on an externally optimized precoder. The
/// row-wise mode leaves compliant rows untouched, so output row powers equal
/// min(original, limit); the global mode applies the single tightest ratio
/// to the whole matrix.
Beamformers rescale_to_pac(const Beamformers& w, const PacVector& pac,
                           RescaleMode mode = RescaleMode::RowWise);

}  // namespace mgmc
