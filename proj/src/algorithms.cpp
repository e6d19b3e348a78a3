// SPDX-License-Identifier: Apache-2.0
#include "algorithms.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "power.hpp"
#include "sdr.hpp"

namespace mgmc {
namespace {

// Per-group targets fan out to every member; the QoS stage takes per-user
// rows. Groups below the shut-down threshold enter with exact zeros.
constexpr double kOffThreshold = 1e-6;

Eigen::VectorXd clamped_group_targets(const ChannelMatrix& h, const GroupAssignment& groups,
                                      const NoiseProfile& noise, const Beamformers& w) {
  Eigen::VectorXd t = group_min_sinrs(h, groups, noise, w);
  for (int k = 0; k < t.size(); ++k) {
    if (t(k) < kOffThreshold) t(k) = 0.0;
  }
  return t;
}

SinrTargets per_user_targets(const Eigen::VectorXd& per_group, const GroupAssignment& groups) {
  Eigen::VectorXd t = Eigen::VectorXd::Zero(groups.n_users());
  for (int k = 0; k < groups.n_groups(); ++k) {
    for (int u : groups.members(k)) t(u) = per_group(k);
  }
  return SinrTargets(std::move(t));
}

Eigen::VectorXd column_powers(const Beamformers& w) {
  return w.colwise().squaredNorm().transpose();
}

std::vector<bool> off_mask(const Eigen::VectorXd& targets) {
  std::vector<bool> off(static_cast<std::size_t>(targets.size()));
  for (int k = 0; k < targets.size(); ++k) off[static_cast<std::size_t>(k)] = targets(k) == 0.0;
  return off;
}

// Common outer loop; `pac` selects the per-antenna flavor, otherwise the sum
// budget `p_tot` applies.
SumRateSolution run_sum_rate_loop(const ChannelMatrix& h, const GroupAssignment& groups,
                                  const PacVector* pac, double p_tot, const NoiseProfile& noise,
                                  const RunConfig& cfg, Philox& rng) {
  cfg.validate();
  const int nt = h.n_antennas();
  const int g = groups.n_groups();
  const double budget = pac != nullptr ? pac->total() : p_tot;
  // The config floor is a lower bound; the operative floor scales with the
  // budget so "off" stays representable in log space at any operating point.
  const double floor = std::max(cfg.power_floor, 1e-10 * budget);

  Beamformers w = Beamformers::Constant(nt, g, std::sqrt(budget / (g * nt)));

  SumRateSolution out;
  out.w = w;
  double best_sr = -1.0;
  double best_power = 0.0;
  auto record = [&](const Eigen::VectorXd& targets, double r_star, const Beamformers& cur) {
    IterationRecord rec;
    rec.targets = targets;
    rec.r_star = r_star;
    rec.group_powers = column_powers(cur);
    rec.sum_rate = sum_rate(h, groups, noise, cur);
    rec.groups_off = off_mask(targets);
    const double power = rec.group_powers.sum();
    // Ties go to the cheaper precoder, so a dead channel returns the silent
    // iterate rather than the full-power starting point.
    if (rec.sum_rate > best_sr || (rec.sum_rate == best_sr && power < best_power)) {
      best_sr = rec.sum_rate;
      best_power = power;
      out.w = cur;
      out.trace.best_index = static_cast<int>(out.trace.iterations.size());
    }
    out.trace.iterations.push_back(std::move(rec));
  };

  Eigen::VectorXd targets = clamped_group_targets(h, groups, noise, w);
  record(targets, pac != nullptr ? pac_utilization(w, *pac) : total_power(w), w);
  double prev_sr = out.trace.iterations.back().sum_rate;

  for (int it = 1; it <= cfg.outer_max; ++it) {
    const SinrTargets per_user = per_user_targets(targets, groups);
    const std::vector<Eigen::MatrixXcd> incumbent = {w};
    const QSolution q =
        pac != nullptr ? solve_q(h, groups, per_user, noise, *pac, cfg, rng, incumbent)
                       : solve_q_min_power(h, groups, per_user, noise, cfg, rng, incumbent);
    if (q.status != QStatus::Ok) {
      throw std::runtime_error("sum-rate loop: QoS stage failed at iteration " +
                               std::to_string(it));
    }
    if (q.w.squaredNorm() == 0.0) {
      // Nothing transmits and nothing would change; record the silent iterate.
      w = q.w;
      record(targets, q.r_star, w);
      break;
    }

    PowerState st = decouple(q.w, floor);
    PacPolyhedron poly;
    if (pac != nullptr) {
      poly = PacPolyhedron::from_directions(st.v, *pac);
    } else {
      poly.a = Eigen::MatrixXd::Ones(1, g);
      poly.limits = Eigen::VectorXd::Constant(1, p_tot);
    }
    try {
      for (int l = 0; l < cfg.l_max; ++l) {
        st = step(st, h, groups, noise, poly, cfg.delta, floor);
      }
    } catch (const std::domain_error&) {
      // A served group whose worst user has zero gain on its own beam has no
      // ascent direction; keep the last valid state for this iteration.
    }
    w = st.recompose();
    record(targets, q.r_star, w);

    const double sr = out.trace.iterations.back().sum_rate;
    if (std::abs(sr - prev_sr) <= cfg.sr_tol * std::max(std::abs(prev_sr), 1e-12)) break;
    prev_sr = sr;
    targets = clamped_group_targets(h, groups, noise, w);
  }
  return out;
}

}  // namespace

SumRateSolution max_sr_pac(const ChannelMatrix& h, const GroupAssignment& groups,
                           const PacVector& pac, const NoiseProfile& noise, const RunConfig& cfg,
                           Philox& rng) {
  if (pac.n_antennas() != h.n_antennas()) {
    throw std::invalid_argument("max_sr_pac: antenna-dimension mismatch");
  }
  return run_sum_rate_loop(h, groups, &pac, 0.0, noise, cfg, rng);
}

SumRateSolution max_sr_spc(const ChannelMatrix& h, const GroupAssignment& groups, double p_tot,
                           const NoiseProfile& noise, const RunConfig& cfg, Philox& rng) {
  if (!(p_tot > 0.0) || !std::isfinite(p_tot)) {
    throw std::invalid_argument("max_sr_spc: total power budget must be positive");
  }
  return run_sum_rate_loop(h, groups, nullptr, p_tot, noise, cfg, rng);
}

Beamformers max_min_fair_pac(const ChannelMatrix& h, const GroupAssignment& groups,
                             const PacVector& pac, const NoiseProfile& noise,
                             const RunConfig& cfg, Philox& rng, int* probes) {
  cfg.validate();
  int n_probes = 0;
  if (pac.n_antennas() != h.n_antennas()) {
    throw std::invalid_argument("max_min_fair_pac: antenna-dimension mismatch");
  }
  const int nu = h.n_users();
  if (noise.n_users() != nu || groups.n_users() != nu) {
    throw std::invalid_argument("max_min_fair_pac: user-dimension mismatch");
  }

  // Interference-free upper bound on any common target.
  double t_hi = 0.0;
  for (int i = 0; i < nu; ++i) {
    t_hi = std::max(t_hi, pac.total() * h.entries().row(i).squaredNorm() / noise.variance(i));
  }

  auto feasible = [&](double t) {
    ++n_probes;
    const SinrTargets targets(Eigen::VectorXd::Constant(nu, t));
    const RelaxedQ rel =
        solve_relaxed_q(build_relaxed_q(h, groups, targets, noise, pac), cfg.solver_tol);
    if (rel.status == SolveStatus::Optimal) return rel.r_lb <= 1.0;
    if (rel.status == SolveStatus::Infeasible) return false;
    throw std::runtime_error("max_min_fair_pac: feasibility probe failed");
  };

  double lo = 0.0;
  if (t_hi > 0.0) {
    if (feasible(t_hi)) {
      lo = t_hi;
    } else {
      double hi = t_hi;
      for (int it = 0; it < 200 && hi - lo > 1e-4 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? lo : hi) = mid;
      }
    }
  }

  // Extraction at the final feasible target. Rank-one recovery can narrowly
  // miss what the relaxation supports, so retreat geometrically if needed.
  QSolution q;
  double t = lo;
  for (int attempt = 0; attempt < 30; ++attempt) {
    q = solve_q(h, groups, SinrTargets(Eigen::VectorXd::Constant(nu, t)), noise, pac, cfg, rng);
    if (q.status == QStatus::Ok) break;
    if (q.status == QStatus::SolverFailure) {
      throw std::runtime_error("max_min_fair_pac: extraction solve failed");
    }
    t *= 0.9;
  }
  if (q.status != QStatus::Ok) {
    throw std::runtime_error("max_min_fair_pac: no feasible extraction");
  }
  Beamformers w = q.w;
  if (q.r_star > 1.0) w /= std::sqrt(q.r_star);
  if (probes != nullptr) *probes = n_probes;
  return w;
}

Beamformers rescale_to_pac(const Beamformers& w, const PacVector& pac, RescaleMode mode) {
  if (pac.n_antennas() != w.rows()) {
    throw std::invalid_argument("rescale_to_pac: antenna-dimension mismatch");
  }
  const Eigen::VectorXd row_power = antenna_powers(w);
  Beamformers out = w;
  if (mode == RescaleMode::GlobalAlpha) {
    // Literal single-factor reading: the tightest ratio scales everything,
    // including upward when every row is strictly compliant.
    double alpha = std::numeric_limits<double>::infinity();
    for (int n = 0; n < pac.n_antennas(); ++n) {
      if (row_power(n) > 0.0) alpha = std::min(alpha, std::sqrt(pac.limit(n) / row_power(n)));
    }
    if (std::isfinite(alpha)) out *= alpha;
    return out;
  }
  for (int n = 0; n < pac.n_antennas(); ++n) {
    if (row_power(n) > pac.limit(n)) {
      out.row(n) *= std::sqrt(pac.limit(n) / row_power(n));
    }
  }
  return out;
}

}  // namespace mgmc
