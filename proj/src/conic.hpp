// SPDX-License-Identifier: Apache-2.0
//
// Small dense conic programs: linear (optionally convex-quadratic) objective
// over a product of free, nonnegative, and real-symmetric-PSD blocks, with
// linear equality and inequality rows. Solved by a primal barrier
// interior-point method; single-threaded and bitwise deterministic for fixed
// inputs. Built for the desk-scale instances this project produces (total
// dimension well under a thousand), not for sparse or large problems.
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace mgmc {

enum class BlockKind {
  Free,    // unconstrained reals
  Nonneg,  // entrywise x >= 0
  PsdSym,  // symmetric dim x dim matrix, PSD; stored in svec form
};

enum class Relation { Eq, Le, Ge };

/// One entry of a constraint row: coefficient on variable `index` of block
/// `block`. For PsdSym blocks the index addresses svec storage.
struct LinTerm {
  int block = 0;
  int index = 0;
  double coeff = 0.0;
};

struct Constraint {
  std::vector<LinTerm> terms;
  Relation rel = Relation::Eq;
  double rhs = 0.0;
};

/// svec packs the upper triangle column-major with off-diagonal entries
/// scaled by sqrt(2), so dot(svec(A), svec(B)) = <A,B>_Frobenius.
int svec_dim(int matrix_dim);
Eigen::VectorXd svec(const Eigen::MatrixXd& symmetric);
Eigen::MatrixXd smat(const Eigen::VectorXd& packed);

class ConicProblem {
 public:
  /// dim: vector length for Free/Nonneg, matrix side for PsdSym.
  int add_block(BlockKind kind, int dim);

  /// Linear objective coefficients for one block (svec layout for PsdSym).
  /// Unset blocks cost zero.
  void set_objective(int block, Eigen::VectorXd c);

  /// Optional per-block quadratic objective term (1/2) x' Q x, Q symmetric
  /// PSD in the block's flat coordinates. Keeping the quadratic inside a
  /// block preserves the solver's block-diagonal Hessian.
  void set_quadratic(int block, Eigen::MatrixXd q);

  int add_constraint(Constraint c);

  int n_blocks() const { return static_cast<int>(blocks_.size()); }
  BlockKind block_kind(int b) const { return blocks_.at(b).kind; }
  int block_dim(int b) const { return blocks_.at(b).dim; }
  /// Flat storage length of block b (svec length for PsdSym).
  int block_size(int b) const { return blocks_.at(b).size; }
  int n_constraints() const { return static_cast<int>(constraints_.size()); }
  const Constraint& constraint(int r) const { return constraints_.at(r); }
  const Eigen::VectorXd& objective(int b) const { return blocks_.at(b).c; }
  bool has_quadratic(int b) const { return blocks_.at(b).q.size() > 0; }
  const Eigen::MatrixXd& quadratic(int b) const { return blocks_.at(b).q; }

  /// Objective value at a primal candidate.
  double objective_value(const std::vector<Eigen::VectorXd>& x) const;

  void validate() const;

  /// Plain-text sparse-triplet dump for cross-checking against external
  /// tools. Line grammar:
  ///   block <id> <free|nonneg|psd> <dim>
  ///   obj <block> <index> <coeff>
  ///   quad <block> <i> <j> <coeff>
  ///   row <id> <eq|le|ge> <rhs>
  ///   term <row> <block> <index> <coeff>
  void dump(const std::string& path) const;

 private:
  struct BlockRec {
    BlockKind kind;
    int dim;
    int size;
    Eigen::VectorXd c;
    Eigen::MatrixXd q;
  };
  std::vector<BlockRec> blocks_;
  std::vector<Constraint> constraints_;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

struct AccuracyReport {
  double gap = 0.0;             // barrier duality-gap bound at termination
  double primal_residual = 0.0; // max equality violation after slackification
  int newton_steps = 0;
  bool phase1_used = false;
};

struct SolveOutcome {
  SolveStatus status = SolveStatus::NumericalFailure;
  std::vector<Eigen::VectorXd> primal;  // per block, svec layout for PsdSym
  double objective = 0.0;
  /// Duals: one multiplier per constraint row (>= 0 for Le rows, <= 0 stored
  /// sign-normalized so that complementarity reads lambda * slack = 0), and
  /// one vector per block for the conic duals.
  Eigen::VectorXd row_duals;
  std::vector<Eigen::VectorXd> cone_duals;
  AccuracyReport accuracy;
};

/// Barrier solve to duality-gap tolerance `tol`. Infeasible and unbounded
/// problems are reported through `status`, not thrown; thrown exceptions are
/// reserved for malformed inputs.
SolveOutcome solve(const ConicProblem& problem, double tol);

/// Complex Hermitian d x d matrices represented as real symmetric 2d x 2d
/// blocks [[Re X, -Im X], [Im X, Re X]]. Traces double under the embedding;
/// real inner products obey Re<A,X> = (1/2) <embed(A), embed(X)>, which is
/// why `inner_coeffs` carries the 1/2.
class HermitianEmbedding {
 public:
  explicit HermitianEmbedding(int dim);

  int dim() const { return dim_; }
  int real_dim() const { return 2 * dim_; }
  int svec_size() const { return svec_dim(2 * dim_); }

  Eigen::MatrixXd embed(const Eigen::MatrixXcd& hermitian) const;

  /// Inverse of embed on exact embeddings; arbitrary symmetric input is first
  /// projected onto the embedding subspace (average with its conjugation by
  /// the complex-structure rotation), so PSD-ness is preserved.
  Eigen::MatrixXcd lift(const Eigen::MatrixXd& symmetric) const;

  /// svec coefficients c with c . svec(embed(X)) = Re trace(A^dag X) for the
  /// given Hermitian A. Ready to drop into LinTerms against a PsdSym block.
  Eigen::VectorXd inner_coeffs(const Eigen::MatrixXcd& hermitian_a) const;

 private:
  int dim_;
};

/// Max of primal-feasibility violation and KKT stationarity/complementarity
/// residual at a primal candidate. Row duals are estimated by sign-constrained
/// least squares on the active set when not supplied; problems containing PSD
/// blocks require `row_duals` from a solve.
double kkt_residual(const ConicProblem& problem, const std::vector<Eigen::VectorXd>& primal,
                    const std::optional<Eigen::VectorXd>& row_duals = std::nullopt);

}  // namespace mgmc
