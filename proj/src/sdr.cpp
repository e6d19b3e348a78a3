// SPDX-License-Identifier: Apache-2.0
#include "sdr.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>

namespace mgmc {
namespace {

void check_dims(const ChannelMatrix& h, const GroupAssignment& groups,
                const SinrTargets& targets, const NoiseProfile& noise) {
  if (groups.n_users() != h.n_users() || targets.n_users() != h.n_users() ||
      noise.n_users() != h.n_users()) {
    throw std::invalid_argument("QoS stage: user-dimension mismatch");
  }
}

// Conjugated channel column h_i, so that h_i^dag X h_i = <h_i h_i^dag, X>.
Eigen::VectorXcd user_column(const ChannelMatrix& h, int user) {
  return h.entries().row(user).adjoint();
}

// SINR rows shared by both relaxation flavors: for every user with a positive
// target, <h h^dag, X_k> - gamma sum_{l != k} <h h^dag, X_l> >= gamma sigma^2.
void add_sinr_rows(ConicProblem& p, const std::vector<int>& x_block, const ChannelMatrix& h,
                   const GroupAssignment& groups, const SinrTargets& targets,
                   const NoiseProfile& noise, const HermitianEmbedding& emb) {
  const int g = groups.n_groups();
  for (int i = 0; i < h.n_users(); ++i) {
    const double gamma = targets.target(i);
    if (gamma <= 0.0) continue;
    const int k = groups.group_of(i);
    const Eigen::VectorXcd hi = user_column(h, i);
    const Eigen::VectorXd coeffs = emb.inner_coeffs(hi * hi.adjoint());
    Constraint row;
    row.rel = Relation::Ge;
    row.rhs = gamma * noise.variance(i);
    for (int l = 0; l < g; ++l) {
      const double scale = (l == k) ? 1.0 : -gamma;
      for (int j = 0; j < coeffs.size(); ++j) {
        if (coeffs(j) != 0.0) row.terms.push_back({x_block[l], static_cast<int>(j),
                                                   scale * coeffs(j)});
      }
    }
    p.add_constraint(std::move(row));
  }
}

constexpr double kDirNormTol = 1e-12;

// Groups that actually transmit: some member has a positive target. The LP
// additionally requires a nonzero direction.
std::vector<char> targeted_groups(const GroupAssignment& groups, const SinrTargets& targets) {
  std::vector<char> on(static_cast<std::size_t>(groups.n_groups()), 0);
  for (int i = 0; i < targets.n_users(); ++i) {
    if (targets.target(i) > 0.0) on[static_cast<std::size_t>(groups.group_of(i))] = 1;
  }
  return on;
}

struct LpRows {
  bool infeasible = false;           // a targeted user cannot be served at all
  std::vector<int> var_of_group;     // LP variable index or -1
  std::vector<Constraint> sinr;      // rows over the p variables (block 0)
  int n_active = 0;
};

// Assemble the SINR side of the power-control LP. Gains g_il = |v_l^dag h_i|^2.
LpRows build_lp_rows(const std::vector<Eigen::VectorXcd>& directions, const ChannelMatrix& h,
                     const GroupAssignment& groups, const SinrTargets& targets,
                     const NoiseProfile& noise) {
  const int g = groups.n_groups();
  LpRows out;
  const std::vector<char> targeted = targeted_groups(groups, targets);
  out.var_of_group.assign(static_cast<std::size_t>(g), -1);
  for (int k = 0; k < g; ++k) {
    if (targeted[static_cast<std::size_t>(k)] && directions[static_cast<std::size_t>(k)].norm() > kDirNormTol) {
      out.var_of_group[static_cast<std::size_t>(k)] = out.n_active++;
    }
  }
  for (int i = 0; i < h.n_users(); ++i) {
    const double gamma = targets.target(i);
    if (gamma <= 0.0) continue;
    const int k = groups.group_of(i);
    const int vk = out.var_of_group[static_cast<std::size_t>(k)];
    if (vk < 0) {
      out.infeasible = true;  // positive target, no transmitting direction
      return out;
    }
    const double own = h.gain(i, directions[static_cast<std::size_t>(k)]);
    if (own <= 0.0) {
      out.infeasible = true;  // direction orthogonal to the user's channel
      return out;
    }
    Constraint row;
    row.rel = Relation::Ge;
    row.rhs = gamma * noise.variance(i);
    row.terms.push_back({0, vk, own});
    for (int l = 0; l < g; ++l) {
      const int vl = out.var_of_group[static_cast<std::size_t>(l)];
      if (vl < 0 || l == k) continue;
      const double gain = h.gain(i, directions[static_cast<std::size_t>(l)]);
      if (gain > 0.0) row.terms.push_back({0, vl, -gamma * gain});
    }
    out.sinr.push_back(std::move(row));
  }
  return out;
}

MmpcResult decode_lp(const SolveOutcome& out, const LpRows& rows, int g) {
  MmpcResult res;
  res.p = Eigen::VectorXd::Zero(g);
  if (out.status == SolveStatus::Infeasible) return res;
  if (out.status != SolveStatus::Optimal) return res;
  res.feasible = true;
  res.score = out.objective;
  for (int k = 0; k < g; ++k) {
    const int vk = rows.var_of_group[static_cast<std::size_t>(k)];
    if (vk >= 0) res.p(k) = std::max(0.0, out.primal[0](vk));
  }
  return res;
}

// Hermitian square root and principal eigenvector with eigenvalues clipped to
// the PSD cone; mass below the relative floor marks the group as off.
struct GroupSampler {
  bool on = false;
  Eigen::MatrixXcd sqrt;       // X^(1/2), symmetric
  Eigen::VectorXcd principal;  // unit norm
};

std::vector<GroupSampler> make_samplers(const CovarianceSet& cov, const std::vector<char>& targeted) {
  const int g = static_cast<int>(cov.x.size());
  double total_trace = 0.0;
  for (const auto& x : cov.x) total_trace += std::max(0.0, x.real().trace());
  std::vector<GroupSampler> s(static_cast<std::size_t>(g));
  for (int k = 0; k < g; ++k) {
    if (!targeted[static_cast<std::size_t>(k)]) continue;
    const Eigen::MatrixXcd& x = cov.x[static_cast<std::size_t>(k)];
    if (x.real().trace() <= 1e-10 * (1.0 + total_trace)) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(x);
    const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    s[static_cast<std::size_t>(k)].on = true;
    s[static_cast<std::size_t>(k)].sqrt = es.eigenvectors() * lam.cwiseSqrt().asDiagonal() *
                                          es.eigenvectors().adjoint();
    s[static_cast<std::size_t>(k)].principal = es.eigenvectors().col(x.rows() - 1);
  }
  return s;
}

using LpEval = std::function<MmpcResult(const std::vector<Eigen::VectorXcd>&)>;

QSolution run_candidates(const CovarianceSet& cov, const GroupAssignment& groups,
                         const SinrTargets& targets, int n_antennas, int n_rand, Philox& rng,
                         double r_lb, const std::vector<Eigen::MatrixXcd>& extras,
                         const LpEval& lp) {
  const int g = groups.n_groups();
  QSolution out;
  out.r_lb = r_lb;
  out.w = Beamformers::Zero(n_antennas, g);
  if (static_cast<int>(cov.x.size()) != g) {
    throw std::invalid_argument("randomize: covariance count != group count");
  }

  const std::vector<char> targeted = targeted_groups(groups, targets);
  const std::vector<GroupSampler> samplers = make_samplers(cov, targeted);

  std::vector<std::vector<Eigen::VectorXcd>> candidates;
  std::vector<Eigen::VectorXcd> eig(static_cast<std::size_t>(g),
                                    Eigen::VectorXcd::Zero(n_antennas));
  for (int k = 0; k < g; ++k) {
    if (samplers[static_cast<std::size_t>(k)].on) {
      eig[static_cast<std::size_t>(k)] = samplers[static_cast<std::size_t>(k)].principal;
    }
  }
  candidates.push_back(eig);
  for (const Eigen::MatrixXcd& w : extras) {
    if (w.rows() != n_antennas || w.cols() != g) {
      throw std::invalid_argument("randomize: candidate shape mismatch");
    }
    std::vector<Eigen::VectorXcd> dirs(static_cast<std::size_t>(g));
    for (int k = 0; k < g; ++k) {
      const Eigen::VectorXcd col = w.col(k);
      const double nn = col.norm();
      dirs[static_cast<std::size_t>(k)] =
          nn > kDirNormTol ? Eigen::VectorXcd(col / nn) : Eigen::VectorXcd::Zero(n_antennas);
    }
    candidates.push_back(std::move(dirs));
  }
  for (int d = 0; d < n_rand; ++d) {
    std::vector<Eigen::VectorXcd> dirs(static_cast<std::size_t>(g),
                                       Eigen::VectorXcd::Zero(n_antennas));
    for (int k = 0; k < g; ++k) {
      const GroupSampler& s = samplers[static_cast<std::size_t>(k)];
      if (!s.on) continue;
      Eigen::VectorXcd u(n_antennas);
      for (int n = 0; n < n_antennas; ++n) u(n) = rng.next_cnormal();
      Eigen::VectorXcd v = s.sqrt * u;
      const double nn = v.norm();
      dirs[static_cast<std::size_t>(k)] = nn > kDirNormTol ? Eigen::VectorXcd(v / nn) : s.principal;
    }
    candidates.push_back(std::move(dirs));
  }

  int best = -1;
  double best_score = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_p;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const MmpcResult res = lp(candidates[c]);
    if (!res.feasible) continue;
    ++out.n_feasible_candidates;
    if (res.score < best_score) {
      best = static_cast<int>(c);
      best_score = res.score;
      best_p = res.p;
    }
  }
  if (best < 0) {
    out.status = QStatus::NoFeasibleCandidate;
    return out;
  }
  out.status = QStatus::Ok;
  out.r_star = best_score;
  for (int k = 0; k < g; ++k) {
    out.w.col(k) = std::sqrt(std::max(0.0, best_p(k))) * candidates[static_cast<std::size_t>(best)][static_cast<std::size_t>(k)];
  }
  return out;
}

QSolution compose_q(const ConicProblem& problem, double tol,
                    const std::function<QSolution(const CovarianceSet&, double)>& recover) {
  const RelaxedQ rel = solve_relaxed_q(problem, tol);
  QSolution q;
  if (rel.status == SolveStatus::Infeasible) {
    q.status = QStatus::Infeasible;
    return q;
  }
  if (rel.status != SolveStatus::Optimal) {
    q.status = QStatus::SolverFailure;
    return q;
  }
  return recover(rel.cov, rel.r_lb);
}

}  // namespace

SinrTargets::SinrTargets(Eigen::VectorXd g) : g_(std::move(g)) {
  if (g_.size() == 0) throw std::invalid_argument("SinrTargets: empty");
  for (int i = 0; i < g_.size(); ++i) {
    if (!std::isfinite(g_(i)) || g_(i) < 0.0) {
      throw std::invalid_argument("SinrTargets: targets must be finite and nonnegative");
    }
  }
}

ConicProblem build_relaxed_q(const ChannelMatrix& h, const GroupAssignment& groups,
                             const SinrTargets& targets, const NoiseProfile& noise,
                             const PacVector& pac) {
  check_dims(h, groups, targets, noise);
  if (pac.n_antennas() != h.n_antennas()) {
    throw std::invalid_argument("build_relaxed_q: antenna-dimension mismatch");
  }
  const int nt = h.n_antennas();
  const int g = groups.n_groups();
  const HermitianEmbedding emb(nt);

  ConicProblem p;
  std::vector<int> x_block(static_cast<std::size_t>(g));
  for (int k = 0; k < g; ++k) {
    x_block[static_cast<std::size_t>(k)] = p.add_block(BlockKind::PsdSym, 2 * nt);
  }
  const int r_block = p.add_block(BlockKind::Nonneg, 1);
  p.set_objective(r_block, Eigen::VectorXd::Ones(1));

  add_sinr_rows(p, x_block, h, groups, targets, noise, emb);

  // Per antenna n: sum_k [X_k]_nn <= r P_n.
  for (int n = 0; n < nt; ++n) {
    Eigen::MatrixXcd e_nn = Eigen::MatrixXcd::Zero(nt, nt);
    e_nn(n, n) = 1.0;
    const Eigen::VectorXd coeffs = emb.inner_coeffs(e_nn);
    Constraint row;
    row.rel = Relation::Le;
    row.rhs = 0.0;
    for (int k = 0; k < g; ++k) {
      for (int j = 0; j < coeffs.size(); ++j) {
        if (coeffs(j) != 0.0) {
          row.terms.push_back({x_block[static_cast<std::size_t>(k)], static_cast<int>(j), coeffs(j)});
        }
      }
    }
    row.terms.push_back({r_block, 0, -pac.limit(n)});
    p.add_constraint(std::move(row));
  }
  return p;
}

ConicProblem build_min_power_q(const ChannelMatrix& h, const GroupAssignment& groups,
                               const SinrTargets& targets, const NoiseProfile& noise) {
  check_dims(h, groups, targets, noise);
  const int nt = h.n_antennas();
  const int g = groups.n_groups();
  const HermitianEmbedding emb(nt);

  ConicProblem p;
  std::vector<int> x_block(static_cast<std::size_t>(g));
  const Eigen::VectorXd trace_coeffs = emb.inner_coeffs(Eigen::MatrixXcd::Identity(nt, nt));
  for (int k = 0; k < g; ++k) {
    x_block[static_cast<std::size_t>(k)] = p.add_block(BlockKind::PsdSym, 2 * nt);
    p.set_objective(x_block[static_cast<std::size_t>(k)], trace_coeffs);
  }
  add_sinr_rows(p, x_block, h, groups, targets, noise, emb);
  return p;
}

RelaxedQ solve_relaxed_q(const ConicProblem& problem, double tol) {
  RelaxedQ out;
  const SolveOutcome s = solve(problem, tol);
  out.status = s.status;
  if (s.status != SolveStatus::Optimal) return out;
  out.r_lb = s.objective;
  for (int b = 0; b < problem.n_blocks(); ++b) {
    if (problem.block_kind(b) != BlockKind::PsdSym) continue;
    const int dim = problem.block_dim(b);
    if (dim % 2 != 0) throw std::invalid_argument("solve_relaxed_q: odd embedded block");
    const HermitianEmbedding emb(dim / 2);
    Eigen::MatrixXcd x = emb.lift(smat(s.primal[static_cast<std::size_t>(b)]));
    x = 0.5 * (x + x.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(x);
    const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    x = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
    out.cov.x.emplace_back(0.5 * (x + x.adjoint()));
  }
  return out;
}

MmpcResult mmpc_lp(const std::vector<Eigen::VectorXcd>& directions, const ChannelMatrix& h,
                   const GroupAssignment& groups, const SinrTargets& targets,
                   const NoiseProfile& noise, const PacVector& pac, double tol) {
  check_dims(h, groups, targets, noise);
  const int g = groups.n_groups();
  if (static_cast<int>(directions.size()) != g) {
    throw std::invalid_argument("mmpc_lp: direction count != group count");
  }
  const LpRows rows = build_lp_rows(directions, h, groups, targets, noise);
  MmpcResult res;
  res.p = Eigen::VectorXd::Zero(g);
  if (rows.infeasible) return res;
  if (rows.n_active == 0) {
    res.feasible = true;  // nothing transmits; the limits hold at r = 0
    return res;
  }

  ConicProblem lp;
  lp.add_block(BlockKind::Nonneg, rows.n_active);            // block 0: p
  const int r_block = lp.add_block(BlockKind::Nonneg, 1);    // block 1: r
  lp.set_objective(r_block, Eigen::VectorXd::Ones(1));
  for (const Constraint& row : rows.sinr) lp.add_constraint(row);
  for (int n = 0; n < pac.n_antennas(); ++n) {
    Constraint row;
    row.rel = Relation::Le;
    row.rhs = 0.0;
    for (int k = 0; k < g; ++k) {
      const int vk = rows.var_of_group[static_cast<std::size_t>(k)];
      if (vk < 0) continue;
      const double a = std::norm(directions[static_cast<std::size_t>(k)](n));
      if (a > 0.0) row.terms.push_back({0, vk, a});
    }
    row.terms.push_back({r_block, 0, -pac.limit(n)});
    lp.add_constraint(std::move(row));
  }
  return decode_lp(solve(lp, tol), rows, g);
}

MmpcResult mmpc_lp_min_power(const std::vector<Eigen::VectorXcd>& directions,
                             const ChannelMatrix& h, const GroupAssignment& groups,
                             const SinrTargets& targets, const NoiseProfile& noise, double tol) {
  check_dims(h, groups, targets, noise);
  const int g = groups.n_groups();
  if (static_cast<int>(directions.size()) != g) {
    throw std::invalid_argument("mmpc_lp_min_power: direction count != group count");
  }
  const LpRows rows = build_lp_rows(directions, h, groups, targets, noise);
  MmpcResult res;
  res.p = Eigen::VectorXd::Zero(g);
  if (rows.infeasible) return res;
  if (rows.n_active == 0) {
    res.feasible = true;
    return res;
  }
  ConicProblem lp;
  lp.add_block(BlockKind::Nonneg, rows.n_active);
  lp.set_objective(0, Eigen::VectorXd::Ones(rows.n_active));
  for (const Constraint& row : rows.sinr) lp.add_constraint(row);
  return decode_lp(solve(lp, tol), rows, g);
}

QSolution randomize(const CovarianceSet& cov, const ChannelMatrix& h,
                    const GroupAssignment& groups, const SinrTargets& targets,
                    const NoiseProfile& noise, const PacVector& pac, int n_rand, Philox& rng,
                    double r_lb, double tol, const std::vector<Eigen::MatrixXcd>& extra_candidates) {
  return run_candidates(cov, groups, targets, h.n_antennas(), n_rand, rng, r_lb,
                        extra_candidates, [&](const std::vector<Eigen::VectorXcd>& dirs) {
                          return mmpc_lp(dirs, h, groups, targets, noise, pac, tol);
                        });
}

QSolution randomize_min_power(const CovarianceSet& cov, const ChannelMatrix& h,
                              const GroupAssignment& groups, const SinrTargets& targets,
                              const NoiseProfile& noise, int n_rand, Philox& rng, double r_lb,
                              double tol, const std::vector<Eigen::MatrixXcd>& extra_candidates) {
  return run_candidates(cov, groups, targets, h.n_antennas(), n_rand, rng, r_lb,
                        extra_candidates, [&](const std::vector<Eigen::VectorXcd>& dirs) {
                          return mmpc_lp_min_power(dirs, h, groups, targets, noise, tol);
                        });
}

QSolution solve_q(const ChannelMatrix& h, const GroupAssignment& groups,
                  const SinrTargets& targets, const NoiseProfile& noise, const PacVector& pac,
                  const RunConfig& cfg, Philox& rng,
                  const std::vector<Eigen::MatrixXcd>& extra_candidates) {
  const ConicProblem problem = build_relaxed_q(h, groups, targets, noise, pac);
  return compose_q(problem, cfg.solver_tol, [&](const CovarianceSet& cov, double r_lb) {
    return randomize(cov, h, groups, targets, noise, pac, cfg.n_rand, rng, r_lb, cfg.solver_tol,
                     extra_candidates);
  });
}

QSolution solve_q_min_power(const ChannelMatrix& h, const GroupAssignment& groups,
                            const SinrTargets& targets, const NoiseProfile& noise,
                            const RunConfig& cfg, Philox& rng,
                            const std::vector<Eigen::MatrixXcd>& extra_candidates) {
  const ConicProblem problem = build_min_power_q(h, groups, targets, noise);
  return compose_q(problem, cfg.solver_tol, [&](const CovarianceSet& cov, double r_lb) {
    return randomize_min_power(cov, h, groups, targets, noise, cfg.n_rand, rng, r_lb,
                               cfg.solver_tol, extra_candidates);
  });
}

}  // namespace mgmc
