// SPDX-License-Identifier: Apache-2.0
//
// QoS beamforming stage: the relaxed per-antenna power-minimization problem,
// its sum-power sibling, and recovery of rank-one precoders via Gaussian
// randomization with a per-candidate multicast power-control LP.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "conic.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace mgmc {

/// Linear SINR targets, one per user. A zero switches the user off: its QoS
/// row degenerates to 0 >= 0 and a group whose members are all off carries no
/// power.
class SinrTargets {
 public:
  explicit SinrTargets(Eigen::VectorXd g);

  int n_users() const { return static_cast<int>(g_.size()); }
  double target(int user) const { return g_(user); }
  const Eigen::VectorXd& g() const { return g_; }

 private:
  Eigen::VectorXd g_;
};

/// Relaxed transmit covariances, one Hermitian PSD matrix per group (watts).
struct CovarianceSet {
  std::vector<Eigen::MatrixXcd> x;
};

enum class QStatus {
  Ok,
  Infeasible,           // targets unachievable even with relaxed rank
  NoFeasibleCandidate,  // relaxation fine, every randomization LP infeasible
  SolverFailure,
};

/// Outcome of one QoS stage. `r_star` is the score of the winning candidate:
/// the worst per-antenna utilization ratio for the per-antenna flavor, total
/// transmit power (W) for the sum-power flavor. `r_lb` is the same quantity
/// for the rank-relaxed problem and lower-bounds r_star.
struct QSolution {
  QStatus status = QStatus::SolverFailure;
  double r_star = 0.0;
  Beamformers w;  // N_t x G; zero columns for groups switched off
  double r_lb = 0.0;
  int n_feasible_candidates = 0;
};

/// Relaxation solve result; `cov` is populated only on Optimal.
struct RelaxedQ {
  SolveStatus status = SolveStatus::NumericalFailure;
  double r_lb = 0.0;
  CovarianceSet cov;
};

/// Power-control LP result for one candidate direction set. Infeasible is a
/// value here, not an error; `score` mirrors the flavor of the caller.
struct MmpcResult {
  bool feasible = false;
  double score = 0.0;
  Eigen::VectorXd p;  // length G, zeros for groups excluded from the LP
};

/// min r s.t. per-group SINR targets hold and sum_k [X_k]_nn <= r P_n per
/// antenna, over Hermitian PSD X_k (embedded as real symmetric blocks) and
/// r >= 0. Users with zero targets contribute no rows.
ConicProblem build_relaxed_q(const ChannelMatrix& h, const GroupAssignment& groups,
                             const SinrTargets& targets, const NoiseProfile& noise,
                             const PacVector& pac);

/// Sum-power sibling: min sum_k tr X_k under the same SINR rows, no antenna
/// rows and no utilization variable.
ConicProblem build_min_power_q(const ChannelMatrix& h, const GroupAssignment& groups,
                               const SinrTargets& targets, const NoiseProfile& noise);

/// Solve either flavor and decode the PSD blocks back to Hermitian
/// covariances, clipping eigenvalues below -1e-9 tolerance up to zero.
RelaxedQ solve_relaxed_q(const ConicProblem& problem, double tol);

/// Multicast power control for fixed unit-norm directions: min r s.t.
/// p_k g_ik >= gamma_i (sum_{l != k} p_l g_il + sigma_i^2) for every targeted
/// user, sum_k p_k |[v_k]_n|^2 <= r P_n per antenna, p >= 0, with
/// g_il = |v_l^dag h_i|^2. Zero-target groups and zero directions are held at
/// p = 0 outside the LP.
MmpcResult mmpc_lp(const std::vector<Eigen::VectorXcd>& directions, const ChannelMatrix& h,
                   const GroupAssignment& groups, const SinrTargets& targets,
                   const NoiseProfile& noise, const PacVector& pac, double tol = 1e-8);

/// Sum-power sibling: min sum_k p_k under the same SINR rows.
MmpcResult mmpc_lp_min_power(const std::vector<Eigen::VectorXcd>& directions,
                             const ChannelMatrix& h, const GroupAssignment& groups,
                             const SinrTargets& targets, const NoiseProfile& noise,
                             double tol = 1e-8);

/// Gaussian randomization: the principal-eigenvector candidate first, then
/// any caller-supplied candidates, then n_rand draws v ~ CN(0, X_k)
/// normalized. Every candidate runs through the power-control LP; the lowest
/// score wins, first-seen on ties. `r_lb` is attached to the result.
QSolution randomize(const CovarianceSet& cov, const ChannelMatrix& h,
                    const GroupAssignment& groups, const SinrTargets& targets,
                    const NoiseProfile& noise, const PacVector& pac, int n_rand, Philox& rng,
                    double r_lb, double tol = 1e-8,
                    const std::vector<Eigen::MatrixXcd>& extra_candidates = {});

/// Sum-power sibling: candidates ranked by total transmit power.
QSolution randomize_min_power(const CovarianceSet& cov, const ChannelMatrix& h,
                              const GroupAssignment& groups, const SinrTargets& targets,
                              const NoiseProfile& noise, int n_rand, Philox& rng, double r_lb,
                              double tol = 1e-8,
                              const std::vector<Eigen::MatrixXcd>& extra_candidates = {});

/// build -> solve -> randomize under per-antenna limits. `extra_candidates`
/// lets an outer loop keep its incumbent directions in the running, which
/// guarantees the re-solve never scores worse than the incumbent.
QSolution solve_q(const ChannelMatrix& h, const GroupAssignment& groups,
                  const SinrTargets& targets, const NoiseProfile& noise, const PacVector& pac,
                  const RunConfig& cfg, Philox& rng,
                  const std::vector<Eigen::MatrixXcd>& extra_candidates = {});

/// build -> solve -> randomize under a total-power objective.
QSolution solve_q_min_power(const ChannelMatrix& h, const GroupAssignment& groups,
                            const SinrTargets& targets, const NoiseProfile& noise,
                            const RunConfig& cfg, Philox& rng,
                            const std::vector<Eigen::MatrixXcd>& extra_candidates = {});

}  // namespace mgmc
