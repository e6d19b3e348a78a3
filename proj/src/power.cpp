// SPDX-License-Identifier: Apache-2.0
#include "power.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "conic.hpp"

namespace mgmc {

namespace {

constexpr double kLn2 = 0.6931471805599453;

void check_state(const PowerState& st, const ChannelMatrix& h, const GroupAssignment& groups,
                 const NoiseProfile& noise) {
  if (static_cast<int>(st.v.size()) != groups.n_groups() ||
      st.p.size() != groups.n_groups() || st.s.size() != groups.n_groups()) {
    throw std::invalid_argument("power: state size does not match group count");
  }
  if (h.n_users() != groups.n_users() || noise.n_users() != groups.n_users()) {
    throw std::invalid_argument("power: user dimensions disagree");
  }
  for (const auto& vk : st.v) {
    if (vk.size() != h.n_antennas()) {
      throw std::invalid_argument("power: direction length does not match antenna count");
    }
  }
}

}  // namespace

Beamformers PowerState::recompose() const {
  const int g = static_cast<int>(v.size());
  const int nt = g > 0 ? static_cast<int>(v[0].size()) : 0;
  Beamformers w(nt, g);
  for (int k = 0; k < g; ++k) w.col(k) = std::sqrt(p(k)) * v[static_cast<std::size_t>(k)];
  return w;
}

PacPolyhedron PacPolyhedron::from_directions(const std::vector<Eigen::VectorXcd>& v,
                                             const PacVector& pac) {
  PacPolyhedron poly;
  const int g = static_cast<int>(v.size());
  poly.a.resize(pac.n_antennas(), g);
  for (int k = 0; k < g; ++k) {
    if (v[static_cast<std::size_t>(k)].size() != pac.n_antennas()) {
      throw std::invalid_argument("PacPolyhedron: direction length does not match limits");
    }
    poly.a.col(k) = v[static_cast<std::size_t>(k)].cwiseAbs2();
  }
  poly.limits = pac.limits();
  return poly;
}

PowerState decouple(const Beamformers& w, double power_floor) {
  if (!(power_floor > 0.0)) throw std::invalid_argument("decouple: power_floor must be > 0");
  const int g = static_cast<int>(w.cols());
  PowerState st;
  st.v.resize(static_cast<std::size_t>(g));
  st.p.resize(g);
  st.floored.assign(static_cast<std::size_t>(g), false);
  for (int k = 0; k < g; ++k) {
    const double n2 = w.col(k).squaredNorm();
    if (n2 > 0.0) {
      st.v[static_cast<std::size_t>(k)] = w.col(k) / std::sqrt(n2);
    } else {
      st.v[static_cast<std::size_t>(k)] = Eigen::VectorXcd::Unit(w.rows(), 0);
    }
    st.p(k) = std::max(n2, power_floor);
    st.floored[static_cast<std::size_t>(k)] = n2 < power_floor;
  }
  st.s = st.p.array().log();
  return st;
}

Eigen::VectorXd subgradient(const PowerState& st, const ChannelMatrix& h,
                            const GroupAssignment& groups, const NoiseProfile& noise) {
  check_state(st, h, groups, noise);
  const int g = groups.n_groups();

  // Gains |h_i^dag v_l|^2 for every (user, direction) pair.
  Eigen::MatrixXd c(h.n_users(), g);
  for (int l = 0; l < g; ++l) {
    c.col(l) = (h.entries() * st.v[static_cast<std::size_t>(l)]).cwiseAbs2();
  }

  // Minimum-SINR user per group, lowest index on ties; its gain row defines
  // the group in the recursion.
  Eigen::VectorXd gam(g);
  Eigen::MatrixXd gain(g, g);  // gain(m, l) = g_{m,l}
  for (int m = 0; m < g; ++m) {
    double best = std::numeric_limits<double>::infinity();
    int u = -1;
    for (int i : groups.members(m)) {
      double interf = noise.variance(i);
      for (int l = 0; l < g; ++l) {
        if (l != m) interf += st.p(l) * c(i, l);
      }
      const double sinr_i = st.p(m) * c(i, m) / interf;
      if (sinr_i < best) {
        best = sinr_i;
        u = i;
      }
    }
    gam(m) = best;
    gain.row(m) = c.row(u);
    if (!(gain(m, m) > 0.0)) {
      throw std::domain_error("subgradient: zero own-group gain at the minimum user");
    }
  }

  Eigen::VectorXd r(g);
  for (int k = 0; k < g; ++k) {
    double acc = gam(k) / (1.0 + gam(k));
    for (int m = 0; m < g; ++m) {
      if (m == k) continue;
      acc -= (gam(m) * gam(m) / (1.0 + gam(m))) * (st.p(k) * gain(m, k)) /
             (st.p(m) * gain(m, m));
    }
    r(k) = -acc / kLn2;
  }
  return r;
}

Eigen::VectorXd project_pac(const Eigen::VectorXd& x, const PacPolyhedron& poly) {
  const int g = static_cast<int>(x.size());
  if (poly.a.cols() != g || poly.a.rows() != poly.limits.size()) {
    throw std::invalid_argument("project_pac: polyhedron dimensions disagree");
  }
  if (!x.allFinite()) throw std::invalid_argument("project_pac: x must be finite");

  ConicProblem qp;
  const int pb = qp.add_block(BlockKind::Nonneg, g);
  qp.set_objective(pb, -2.0 * x);
  qp.set_quadratic(pb, 2.0 * Eigen::MatrixXd::Identity(g, g));
  for (int n = 0; n < poly.a.rows(); ++n) {
    Constraint row;
    for (int k = 0; k < g; ++k) {
      if (poly.a(n, k) != 0.0) row.terms.push_back({pb, k, poly.a(n, k)});
    }
    if (row.terms.empty()) continue;  // 0 <= P_n
    row.rel = Relation::Le;
    row.rhs = poly.limits(n);
    qp.add_constraint(row);
  }

  const SolveOutcome out = solve(qp, 1e-9);
  if (out.status != SolveStatus::Optimal) {
    throw std::runtime_error("project_pac: projection solve failed");
  }
  return out.primal[0].cwiseMax(0.0);
}

PowerState step(const PowerState& st, const ChannelMatrix& h, const GroupAssignment& groups,
                const NoiseProfile& noise, const PacPolyhedron& poly, double delta,
                double power_floor) {
  if (!(delta > 0.0)) throw std::invalid_argument("step: delta must be > 0");
  if (!(power_floor > 0.0)) throw std::invalid_argument("step: power_floor must be > 0");

  const Eigen::VectorXd r = subgradient(st, h, groups, noise);
  const int g = groups.n_groups();
  Eigen::VectorXd x(g);
  for (int k = 0; k < g; ++k) {
    x(k) = std::exp(std::clamp(st.s(k) - delta * r(k), -700.0, 700.0));
  }

  // Fold the floor into the projection by shifting: q = p - floor lives in
  // the same polyhedron with tightened limits, so the result respects both
  // the antenna rows and the floor exactly.
  const Eigen::VectorXd lb = Eigen::VectorXd::Constant(g, power_floor);
  PacPolyhedron shifted;
  shifted.a = poly.a;
  shifted.limits = poly.limits - poly.a * lb;
  if ((shifted.limits.array() < 0.0).any()) {
    throw std::invalid_argument("step: power_floor exceeds an antenna limit");
  }
  const Eigen::VectorXd q = project_pac(x - lb, shifted);

  PowerState next;
  next.v = st.v;
  next.p = q + lb;
  next.s = next.p.array().log();
  next.floored.assign(static_cast<std::size_t>(g), false);
  for (int k = 0; k < g; ++k) {
    next.floored[static_cast<std::size_t>(k)] = next.p(k) <= power_floor * (1.0 + 1e-9);
  }
  return next;
}

}  // namespace mgmc
