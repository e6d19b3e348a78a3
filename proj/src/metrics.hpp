// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "model.hpp"

namespace mgmc {

/// Beamformer bundle: column k precodes the stream of group k.
using Beamformers = Eigen::MatrixXcd;  // N_t x G

/// SINR of one user under beamformers W. Intra-group column is signal,
/// every other column is interference.
double sinr(const ChannelMatrix& h, const GroupAssignment& groups, const NoiseProfile& noise,
            const Beamformers& w, int user);

/// All per-user SINRs.
Eigen::VectorXd all_sinrs(const ChannelMatrix& h, const GroupAssignment& groups,
                          const NoiseProfile& noise, const Beamformers& w);

/// Worst SINR inside group g; the multicast rate of the group is set by it.
double group_min_sinr(const ChannelMatrix& h, const GroupAssignment& groups,
                      const NoiseProfile& noise, const Beamformers& w, int g);

/// Per-group minima as a vector.
Eigen::VectorXd group_min_sinrs(const ChannelMatrix& h, const GroupAssignment& groups,
                                const NoiseProfile& noise, const Beamformers& w);

/// Sum over users of log2(1 + min-SINR of the user's group).
double sum_rate(const ChannelMatrix& h, const GroupAssignment& groups, const NoiseProfile& noise,
                const Beamformers& w);

/// Diagonal of W W^dag: power radiated by each antenna.
Eigen::VectorXd antenna_powers(const Beamformers& w);

double total_power(const Beamformers& w);

/// Worst-case per-antenna utilization max_n [W W^dag]_nn / P_n.
double pac_utilization(const Beamformers& w, const PacVector& pac);

/// Transmit power density of column g towards direction theta under a
/// half-wavelength ULA: |a(theta)^dag w_g|^2.
double pattern(const Beamformers& w, int g, double theta_deg);

/// Pattern over a whole angle grid; row t, column g = pattern at grid[t] for
/// beam g. Linear scale.
Eigen::MatrixXd pattern(const Beamformers& w, const std::vector<double>& theta_grid_deg);

/// Snapshot of everything the harness reports about one solution.
struct EvaluationReport {
  Eigen::VectorXd sinrs;            // per user
  Eigen::VectorXd rates;            // per user, log2(1 + own group's min SINR)
  Eigen::VectorXd group_minima;     // per group
  double sum_rate_bits = 0.0;       // per-user sum of group rates
  Eigen::VectorXd antenna_power;    // per antenna
  double total_power_watts = 0.0;
  double pac_util = 0.0;            // max_n power_n / limit_n
};

EvaluationReport evaluate(const ChannelMatrix& h, const GroupAssignment& groups,
                          const NoiseProfile& noise, const PacVector& pac, const Beamformers& w);

}  // namespace mgmc
