// SPDX-License-Identifier: Apache-2.0
#include "metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mgmc {

namespace {

void check_shapes(const ChannelMatrix& h, const GroupAssignment& groups,
                  const NoiseProfile& noise, const Beamformers& w) {
  if (groups.n_users() != h.n_users() || noise.n_users() != h.n_users()) {
    throw std::invalid_argument("metrics: user-count mismatch");
  }
  if (w.rows() != h.n_antennas() || w.cols() != groups.n_groups()) {
    throw std::invalid_argument("metrics: beamformer shape mismatch");
  }
}

}  // namespace

double sinr(const ChannelMatrix& h, const GroupAssignment& groups, const NoiseProfile& noise,
            const Beamformers& w, int user) {
  check_shapes(h, groups, noise, w);
  if (user < 0 || user >= h.n_users()) throw std::out_of_range("sinr: bad user");
  const int own = groups.group_of(user);
  double interference = noise.variance(user);
  double signal = 0.0;
  for (int g = 0; g < groups.n_groups(); ++g) {
    const double p = h.gain(user, w.col(g));
    if (g == own) {
      signal = p;
    } else {
      interference += p;
    }
  }
  return signal / interference;
}

Eigen::VectorXd all_sinrs(const ChannelMatrix& h, const GroupAssignment& groups,
                          const NoiseProfile& noise, const Beamformers& w) {
  Eigen::VectorXd out(h.n_users());
  for (int i = 0; i < h.n_users(); ++i) out(i) = sinr(h, groups, noise, w, i);
  return out;
}

double group_min_sinr(const ChannelMatrix& h, const GroupAssignment& groups,
                      const NoiseProfile& noise, const Beamformers& w, int g) {
  if (g < 0 || g >= groups.n_groups()) throw std::out_of_range("group_min_sinr: bad group");
  double worst = std::numeric_limits<double>::infinity();
  for (int u : groups.members(g)) worst = std::min(worst, sinr(h, groups, noise, w, u));
  return worst;
}

Eigen::VectorXd group_min_sinrs(const ChannelMatrix& h, const GroupAssignment& groups,
                                const NoiseProfile& noise, const Beamformers& w) {
  Eigen::VectorXd out(groups.n_groups());
  for (int g = 0; g < groups.n_groups(); ++g) out(g) = group_min_sinr(h, groups, noise, w, g);
  return out;
}

double sum_rate(const ChannelMatrix& h, const GroupAssignment& groups, const NoiseProfile& noise,
                const Beamformers& w) {
  const Eigen::VectorXd minima = group_min_sinrs(h, groups, noise, w);
  double total = 0.0;
  for (int g = 0; g < groups.n_groups(); ++g) {
    total += static_cast<double>(groups.members(g).size()) * std::log2(1.0 + minima(g));
  }
  return total;
}

Eigen::VectorXd antenna_powers(const Beamformers& w) {
  return w.cwiseAbs2().rowwise().sum();
}

double total_power(const Beamformers& w) { return w.squaredNorm(); }

double pac_utilization(const Beamformers& w, const PacVector& pac) {
  if (w.rows() != pac.n_antennas()) throw std::invalid_argument("pac_utilization: shape mismatch");
  const Eigen::VectorXd p = antenna_powers(w);
  return (p.array() / pac.limits().array()).maxCoeff();
}

double pattern(const Beamformers& w, int g, double theta_deg) {
  if (g < 0 || g >= w.cols()) throw std::out_of_range("pattern: bad group");
  const Eigen::VectorXcd a = ula_steering(theta_deg, static_cast<int>(w.rows()));
  return std::norm(a.dot(w.col(g)));  // Eigen's complex dot conjugates the left argument
}

Eigen::MatrixXd pattern(const Beamformers& w, const std::vector<double>& theta_grid_deg) {
  Eigen::MatrixXd out(static_cast<int>(theta_grid_deg.size()), w.cols());
  for (int t = 0; t < out.rows(); ++t) {
    for (int g = 0; g < out.cols(); ++g) {
      out(t, g) = pattern(w, g, theta_grid_deg[static_cast<std::size_t>(t)]);
    }
  }
  return out;
}

EvaluationReport evaluate(const ChannelMatrix& h, const GroupAssignment& groups,
                          const NoiseProfile& noise, const PacVector& pac, const Beamformers& w) {
  EvaluationReport rep;
  rep.sinrs = all_sinrs(h, groups, noise, w);
  rep.group_minima = group_min_sinrs(h, groups, noise, w);
  rep.rates.resize(h.n_users());
  for (int u = 0; u < h.n_users(); ++u) {
    rep.rates(u) = std::log2(1.0 + rep.group_minima(groups.group_of(u)));
  }
  rep.sum_rate_bits = sum_rate(h, groups, noise, w);
  rep.antenna_power = antenna_powers(w);
  rep.total_power_watts = total_power(w);
  rep.pac_util = pac_utilization(w, pac);
  return rep;
}

}  // namespace mgmc
