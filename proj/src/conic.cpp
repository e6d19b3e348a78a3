// SPDX-License-Identifier: Apache-2.0
//
// Primal barrier interior-point method over products of free, nonnegative,
// and PSD blocks. Inequalities are slackified into equalities, a shifted
// Phase I establishes strict feasibility (or certifies infeasibility), and
// Phase II follows the central path with infeasible-start Newton steps. The
// KKT systems are solved through a Schur complement on the equality rows,
// which keeps every factorization block-diagonal.
#include "conic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace mgmc {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

int checked_svec_dim(int d) { return d * (d + 1) / 2; }

}  // namespace

int svec_dim(int matrix_dim) {
  if (matrix_dim < 1) throw std::invalid_argument("svec_dim: bad dimension");
  return checked_svec_dim(matrix_dim);
}

Eigen::VectorXd svec(const Eigen::MatrixXd& m) {
  const int d = static_cast<int>(m.rows());
  if (m.cols() != d) throw std::invalid_argument("svec: not square");
  Eigen::VectorXd out(checked_svec_dim(d));
  int idx = 0;
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i <= j; ++i) {
      out(idx++) = (i == j) ? m(i, j) : kSqrt2 * 0.5 * (m(i, j) + m(j, i));
    }
  }
  return out;
}

Eigen::MatrixXd smat(const Eigen::VectorXd& v) {
  const int n = static_cast<int>(v.size());
  const int d = static_cast<int>(std::round((std::sqrt(8.0 * n + 1.0) - 1.0) / 2.0));
  if (checked_svec_dim(d) != n) throw std::invalid_argument("smat: bad packed length");
  Eigen::MatrixXd out(d, d);
  int idx = 0;
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i <= j; ++i) {
      const double x = v(idx++);
      if (i == j) {
        out(i, j) = x;
      } else {
        out(i, j) = x / kSqrt2;
        out(j, i) = x / kSqrt2;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// ConicProblem

int ConicProblem::add_block(BlockKind kind, int dim) {
  if (dim < 1) throw std::invalid_argument("add_block: dim must be >= 1");
  BlockRec rec;
  rec.kind = kind;
  rec.dim = dim;
  rec.size = (kind == BlockKind::PsdSym) ? checked_svec_dim(dim) : dim;
  rec.c = Eigen::VectorXd::Zero(rec.size);
  blocks_.push_back(std::move(rec));
  return static_cast<int>(blocks_.size()) - 1;
}

void ConicProblem::set_objective(int block, Eigen::VectorXd c) {
  auto& rec = blocks_.at(block);
  if (c.size() != rec.size) throw std::invalid_argument("set_objective: length mismatch");
  rec.c = std::move(c);
}

void ConicProblem::set_quadratic(int block, Eigen::MatrixXd q) {
  auto& rec = blocks_.at(block);
  if (q.rows() != rec.size || q.cols() != rec.size) {
    throw std::invalid_argument("set_quadratic: shape mismatch");
  }
  const double asym = (q - q.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * std::max(1.0, q.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("set_quadratic: matrix must be symmetric");
  }
  rec.q = std::move(q);
}

int ConicProblem::add_constraint(Constraint c) {
  for (const auto& t : c.terms) {
    if (t.block < 0 || t.block >= n_blocks() || t.index < 0 ||
        t.index >= blocks_[static_cast<std::size_t>(t.block)].size) {
      throw std::invalid_argument("add_constraint: term out of range");
    }
  }
  if (!std::isfinite(c.rhs)) throw std::invalid_argument("add_constraint: rhs not finite");
  constraints_.push_back(std::move(c));
  return static_cast<int>(constraints_.size()) - 1;
}

double ConicProblem::objective_value(const std::vector<Eigen::VectorXd>& x) const {
  if (static_cast<int>(x.size()) != n_blocks()) {
    throw std::invalid_argument("objective_value: block count mismatch");
  }
  double v = 0.0;
  for (int b = 0; b < n_blocks(); ++b) {
    const auto& rec = blocks_[static_cast<std::size_t>(b)];
    if (x[static_cast<std::size_t>(b)].size() != rec.size) {
      throw std::invalid_argument("objective_value: block length mismatch");
    }
    v += rec.c.dot(x[static_cast<std::size_t>(b)]);
    if (rec.q.size() > 0) {
      v += 0.5 * x[static_cast<std::size_t>(b)].dot(rec.q * x[static_cast<std::size_t>(b)]);
    }
  }
  return v;
}

void ConicProblem::validate() const {
  if (blocks_.empty()) throw std::invalid_argument("ConicProblem: no variable blocks");
  for (const auto& rec : blocks_) {
    if (!rec.c.allFinite()) throw std::invalid_argument("ConicProblem: objective not finite");
    if (rec.q.size() > 0) {
      if (!rec.q.allFinite()) throw std::invalid_argument("ConicProblem: quadratic not finite");
      const double asym = (rec.q - rec.q.transpose()).cwiseAbs().maxCoeff();
      if (asym > 1e-10 * std::max(1.0, rec.q.cwiseAbs().maxCoeff())) {
        throw std::invalid_argument("ConicProblem: quadratic term not symmetric");
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (rec.q + rec.q.transpose()));
      if (es.eigenvalues().minCoeff() < -1e-8 * std::max(1.0, es.eigenvalues().maxCoeff())) {
        throw std::invalid_argument("ConicProblem: quadratic term not PSD");
      }
    }
  }
  for (const auto& c : constraints_) {
    for (const auto& t : c.terms) {
      if (!std::isfinite(t.coeff)) throw std::invalid_argument("ConicProblem: coeff not finite");
    }
  }
}

namespace {

void write_double(std::ofstream& os, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  os.write(buf, res.ptr - buf);
}

}  // namespace

void ConicProblem::dump(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("dump: cannot open " + path);
  for (int b = 0; b < n_blocks(); ++b) {
    const auto& rec = blocks_[static_cast<std::size_t>(b)];
    const char* kind = rec.kind == BlockKind::Free     ? "free"
                       : rec.kind == BlockKind::Nonneg ? "nonneg"
                                                       : "psd";
    os << "block " << b << ' ' << kind << ' ' << rec.dim << '\n';
  }
  for (int b = 0; b < n_blocks(); ++b) {
    const auto& rec = blocks_[static_cast<std::size_t>(b)];
    for (int i = 0; i < rec.size; ++i) {
      if (rec.c(i) != 0.0) {
        os << "obj " << b << ' ' << i << ' ';
        write_double(os, rec.c(i));
        os << '\n';
      }
    }
    if (rec.q.size() > 0) {
      for (int i = 0; i < rec.size; ++i) {
        for (int j = i; j < rec.size; ++j) {
          if (rec.q(i, j) != 0.0) {
            os << "quad " << b << ' ' << i << ' ' << j << ' ';
            write_double(os, rec.q(i, j));
            os << '\n';
          }
        }
      }
    }
  }
  for (int r = 0; r < n_constraints(); ++r) {
    const auto& c = constraints_[static_cast<std::size_t>(r)];
    const char* rel = c.rel == Relation::Eq ? "eq" : c.rel == Relation::Le ? "le" : "ge";
    os << "row " << r << ' ' << rel << ' ';
    write_double(os, c.rhs);
    os << '\n';
    for (const auto& t : c.terms) {
      os << "term " << r << ' ' << t.block << ' ' << t.index << ' ';
      write_double(os, t.coeff);
      os << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Hermitian embedding

HermitianEmbedding::HermitianEmbedding(int dim) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("HermitianEmbedding: bad dimension");
}

Eigen::MatrixXd HermitianEmbedding::embed(const Eigen::MatrixXcd& h) const {
  if (h.rows() != dim_ || h.cols() != dim_) {
    throw std::invalid_argument("HermitianEmbedding::embed: shape mismatch");
  }
  Eigen::MatrixXd out(2 * dim_, 2 * dim_);
  out.topLeftCorner(dim_, dim_) = h.real();
  out.bottomRightCorner(dim_, dim_) = h.real();
  out.topRightCorner(dim_, dim_) = -h.imag();
  out.bottomLeftCorner(dim_, dim_) = h.imag();
  return out;
}

Eigen::MatrixXcd HermitianEmbedding::lift(const Eigen::MatrixXd& y) const {
  if (y.rows() != 2 * dim_ || y.cols() != 2 * dim_) {
    throw std::invalid_argument("HermitianEmbedding::lift: shape mismatch");
  }
  const auto y11 = y.topLeftCorner(dim_, dim_);
  const auto y22 = y.bottomRightCorner(dim_, dim_);
  const auto y12 = y.topRightCorner(dim_, dim_);
  const auto y21 = y.bottomLeftCorner(dim_, dim_);
  // Averaging with the conjugation by the complex-structure rotation projects
  // onto exact embeddings without losing PSD-ness.
  Eigen::MatrixXcd x(dim_, dim_);
  x.real() = 0.5 * (y11 + y22);
  x.imag() = 0.5 * (y21 - y12);
  // Enforce exact Hermitian symmetry against roundoff.
  Eigen::MatrixXcd xh = 0.5 * (x + x.adjoint());
  return xh;
}

Eigen::VectorXd HermitianEmbedding::inner_coeffs(const Eigen::MatrixXcd& a) const {
  return 0.5 * svec(embed(a));
}

// ---------------------------------------------------------------------------
// Standardized internal form

namespace {

struct StdBlock {
  BlockKind kind = BlockKind::Free;
  int dim = 0;     // matrix side for PsdSym
  int size = 0;    // flat length
  int offset = 0;  // position in the stacked variable vector
  const Eigen::MatrixXd* q = nullptr;
};

// Equality-only system over the stacked variable: A x = b, x in K.
struct Inner {
  std::vector<StdBlock> blocks;
  int n = 0;
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  double m_barrier = 0.0;  // barrier complexity
  // Bookkeeping to map solution/duals back to user rows.
  std::vector<int> ineq_rows;   // inner row index -> user row (or -1)
  std::vector<int> row_of_user; // user row -> inner row (or -1 if dropped)
  std::vector<double> row_scale;  // user row -> equilibration divisor
  std::vector<int> user_sign;     // user row -> +1 (kept) / -1 (Ge negated)
  int slack_block = -1;
  int n_user_blocks = 0;
};

struct BuildResult {
  Inner inner;
  bool trivially_infeasible = false;
};

BuildResult standardize(const ConicProblem& p) {
  BuildResult out;
  Inner& in = out.inner;
  in.n_user_blocks = p.n_blocks();
  int offset = 0;
  for (int b = 0; b < p.n_blocks(); ++b) {
    StdBlock sb;
    sb.kind = p.block_kind(b);
    sb.dim = p.block_dim(b);
    sb.size = p.block_size(b);
    sb.offset = offset;
    sb.q = p.has_quadratic(b) ? &p.quadratic(b) : nullptr;
    offset += sb.size;
    if (sb.kind == BlockKind::Nonneg) in.m_barrier += sb.size;
    if (sb.kind == BlockKind::PsdSym) in.m_barrier += sb.dim;
    in.blocks.push_back(sb);
  }

  const int m_user = p.n_constraints();
  in.row_of_user.assign(static_cast<std::size_t>(m_user), -1);
  in.row_scale.assign(static_cast<std::size_t>(m_user), 1.0);
  in.user_sign.assign(static_cast<std::size_t>(m_user), 1);

  struct Row {
    Eigen::VectorXd a;
    double b;
    bool ineq;
    int user;
  };
  std::vector<Row> rows;
  for (int r = 0; r < m_user; ++r) {
    const Constraint& c = p.constraint(r);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(offset);
    for (const auto& t : c.terms) {
      a(in.blocks[static_cast<std::size_t>(t.block)].offset + t.index) += t.coeff;
    }
    double rhs = c.rhs;
    const int sign = (c.rel == Relation::Ge) ? -1 : 1;
    if (sign < 0) {
      a = -a;
      rhs = -rhs;
    }
    in.user_sign[static_cast<std::size_t>(r)] = sign;
    const double scale = a.cwiseAbs().maxCoeff();
    if (scale < 1e-300) {
      // Row has no variables: either vacuous or plainly infeasible.
      const bool ok = (c.rel == Relation::Eq) ? std::abs(rhs) <= 1e-12
                                              : rhs >= -1e-12;
      if (!ok) out.trivially_infeasible = true;
      continue;
    }
    Row row;
    row.a = a / scale;
    row.b = rhs / scale;
    row.ineq = (c.rel != Relation::Eq);
    row.user = r;
    in.row_scale[static_cast<std::size_t>(r)] = scale;
    rows.push_back(std::move(row));
  }

  int n_ineq = 0;
  for (const auto& row : rows) n_ineq += row.ineq ? 1 : 0;
  int n_total = offset;
  if (n_ineq > 0) {
    StdBlock sb;
    sb.kind = BlockKind::Nonneg;
    sb.dim = n_ineq;
    sb.size = n_ineq;
    sb.offset = offset;
    in.slack_block = static_cast<int>(in.blocks.size());
    in.blocks.push_back(sb);
    in.m_barrier += n_ineq;
    n_total += n_ineq;
  }
  in.n = n_total;

  in.a.setZero(static_cast<int>(rows.size()), n_total);
  in.b.resize(static_cast<int>(rows.size()));
  in.ineq_rows.assign(rows.size(), -1);
  int slack_idx = 0;
  for (int r = 0; r < static_cast<int>(rows.size()); ++r) {
    in.a.row(r).head(offset) = rows[static_cast<std::size_t>(r)].a;
    in.b(r) = rows[static_cast<std::size_t>(r)].b;
    in.row_of_user[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)].user)] = r;
    if (rows[static_cast<std::size_t>(r)].ineq) {
      in.a(r, in.blocks[static_cast<std::size_t>(in.slack_block)].offset + slack_idx) = 1.0;
      in.ineq_rows[static_cast<std::size_t>(r)] = slack_idx;
      ++slack_idx;
    }
  }

  in.c = Eigen::VectorXd::Zero(n_total);
  for (int b = 0; b < p.n_blocks(); ++b) {
    in.c.segment(in.blocks[static_cast<std::size_t>(b)].offset, p.block_size(b)) = p.objective(b);
  }
  return out;
}

// --- barrier pieces --------------------------------------------------------

struct BarrierEval {
  bool interior = false;
  Eigen::VectorXd grad;                 // full length
  std::vector<Eigen::MatrixXd> psd_h;   // dense Hessian per PSD block
  std::vector<Eigen::VectorXd> diag_h;  // per Nonneg block: 1/x^2
};

// Unit svec basis element as a matrix.
Eigen::MatrixXd svec_basis(int d, int idx) {
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(d, d);
  int k = 0;
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i <= j; ++i) {
      if (k == idx) {
        if (i == j) {
          e(i, i) = 1.0;
        } else {
          e(i, j) = 1.0 / kSqrt2;
          e(j, i) = 1.0 / kSqrt2;
        }
        return e;
      }
      ++k;
    }
  }
  throw std::logic_error("svec_basis: index out of range");
}

bool eval_barrier(const Inner& in, const Eigen::VectorXd& x, BarrierEval& ev) {
  ev.interior = true;
  ev.grad = Eigen::VectorXd::Zero(in.n);
  ev.psd_h.assign(in.blocks.size(), Eigen::MatrixXd());
  ev.diag_h.assign(in.blocks.size(), Eigen::VectorXd());
  for (std::size_t bi = 0; bi < in.blocks.size(); ++bi) {
    const StdBlock& blk = in.blocks[bi];
    if (blk.kind == BlockKind::Nonneg) {
      const auto seg = x.segment(blk.offset, blk.size);
      if ((seg.array() <= 0.0).any()) return ev.interior = false;
      ev.grad.segment(blk.offset, blk.size) = -seg.cwiseInverse();
      ev.diag_h[bi] = seg.cwiseInverse().cwiseAbs2();
    } else if (blk.kind == BlockKind::PsdSym) {
      const Eigen::MatrixXd xm = smat(x.segment(blk.offset, blk.size));
      Eigen::LLT<Eigen::MatrixXd> llt(xm);
      if (llt.info() != Eigen::Success) return ev.interior = false;
      const Eigen::MatrixXd xinv =
          llt.solve(Eigen::MatrixXd::Identity(blk.dim, blk.dim));
      ev.grad.segment(blk.offset, blk.size) = -svec(0.5 * (xinv + xinv.transpose()));
      Eigen::MatrixXd h(blk.size, blk.size);
      for (int k = 0; k < blk.size; ++k) {
        const Eigen::MatrixXd ek = svec_basis(blk.dim, k);
        const Eigen::MatrixXd col = xinv * ek * xinv;
        h.col(k) = svec(0.5 * (col + col.transpose()));
      }
      ev.psd_h[bi] = 0.5 * (h + h.transpose());
    }
  }
  return true;
}

double inner_objective(const Inner& in, const Eigen::VectorXd& x) {
  double v = in.c.dot(x);
  for (const StdBlock& blk : in.blocks) {
    if (blk.q != nullptr) {
      const auto seg = x.segment(blk.offset, blk.size);
      v += 0.5 * seg.dot((*blk.q) * seg);
    }
  }
  return v;
}

Eigen::VectorXd objective_grad(const Inner& in, const Eigen::VectorXd& x) {
  Eigen::VectorXd g = in.c;
  for (const StdBlock& blk : in.blocks) {
    if (blk.q != nullptr) {
      g.segment(blk.offset, blk.size) += (*blk.q) * x.segment(blk.offset, blk.size);
    }
  }
  return g;
}

// Block-diagonal Hessian H = t*Q + hess(barrier), held factored per block.
struct HessianFactors {
  struct BlockFactor {
    bool diag = false;
    Eigen::VectorXd d;          // diagonal case
    Eigen::LLT<Eigen::MatrixXd> llt;  // dense case
  };
  std::vector<BlockFactor> f;

  Eigen::VectorXd solve(const Inner& in, const Eigen::VectorXd& r) const {
    Eigen::VectorXd out(in.n);
    for (std::size_t bi = 0; bi < in.blocks.size(); ++bi) {
      const StdBlock& blk = in.blocks[bi];
      const auto seg = r.segment(blk.offset, blk.size);
      if (f[bi].diag) {
        out.segment(blk.offset, blk.size) = seg.cwiseQuotient(f[bi].d);
      } else {
        out.segment(blk.offset, blk.size) = f[bi].llt.solve(seg);
      }
    }
    return out;
  }
};

bool factor_hessian(const Inner& in, const BarrierEval& ev, double t, HessianFactors& hf) {
  hf.f.assign(in.blocks.size(), {});
  for (std::size_t bi = 0; bi < in.blocks.size(); ++bi) {
    const StdBlock& blk = in.blocks[bi];
    const bool has_q = blk.q != nullptr;
    if (blk.kind == BlockKind::Nonneg && !has_q) {
      hf.f[bi].diag = true;
      hf.f[bi].d = ev.diag_h[bi];
    } else {
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(blk.size, blk.size);
      if (blk.kind == BlockKind::Nonneg) h.diagonal() = ev.diag_h[bi];
      if (blk.kind == BlockKind::PsdSym) h = ev.psd_h[bi];
      if (has_q) h += t * (*blk.q);
      if (blk.kind == BlockKind::Free && !has_q) {
        // Rank-deficient free block: proximal regularization, corrected by
        // iterative refinement on the full KKT system.
        h = 1e-10 * Eigen::MatrixXd::Identity(blk.size, blk.size);
      }
      // Factor exactly when possible: a ridge sized by the largest curvature
      // wrecks the small-curvature directions of a barrier Hessian whose
      // spectrum spans many decades. Regularize only on breakdown.
      hf.f[bi].llt.compute(h);
      double reg = 1e-14 * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
      for (int attempt = 0; hf.f[bi].llt.info() != Eigen::Success; ++attempt) {
        if (attempt >= 4) return false;
        Eigen::MatrixXd hr = h;
        hr.diagonal().array() += reg;
        hf.f[bi].llt.compute(hr);
        reg *= 1e4;
      }
    }
  }
  return true;
}

// Barrier value at x; false outside the cone interior.
bool barrier_value(const Inner& in, const Eigen::VectorXd& x, double& val) {
  val = 0.0;
  for (const StdBlock& blk : in.blocks) {
    if (blk.kind == BlockKind::Nonneg) {
      const auto seg = x.segment(blk.offset, blk.size);
      if ((seg.array() <= 0.0).any()) return false;
      val -= seg.array().log().sum();
    } else if (blk.kind == BlockKind::PsdSym) {
      Eigen::LLT<Eigen::MatrixXd> llt(smat(x.segment(blk.offset, blk.size)));
      if (llt.info() != Eigen::Success) return false;
      val -= 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    }
  }
  return true;
}

// Dense H = t*Q + hess(barrier) over all stacked coordinates.
Eigen::MatrixXd dense_hessian(const Inner& in, const BarrierEval& ev, double t) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(in.n, in.n);
  for (std::size_t bi = 0; bi < in.blocks.size(); ++bi) {
    const StdBlock& blk = in.blocks[bi];
    auto ref = h.block(blk.offset, blk.offset, blk.size, blk.size);
    if (blk.kind == BlockKind::Nonneg) {
      ref.diagonal() = ev.diag_h[bi];
    } else if (blk.kind == BlockKind::PsdSym) {
      ref = ev.psd_h[bi];
    } else if (blk.q == nullptr) {
      // Flat free block: proximal term keeps the reduced Hessian factorable.
      ref.diagonal().setConstant(1e-10);
    }
    if (blk.q != nullptr) ref += t * (*blk.q);
  }
  return h;
}

struct CenterResult {
  bool ok = false;
  int steps = 0;
  double primal_residual = 0.0;
  bool diverged = false;
};

struct Phase1Spec {
  int gamma_coord = -1;   // stacked index of the shifted-slack scalar q
  double gamma_lo = 0.0;  // gamma = gamma_lo + q
  double gamma_scale = 1.0;
};

// Minimize t*f(x) + barrier(x) subject to A x = b from a cone-interior point.
// Feasible-start reduced Newton: the entry iterate is restored onto the affine
// set once (minimum-norm correction through a rank-revealing QR of A'), after
// which every step moves in the null space of A. Equality feasibility is then
// exact by construction, the line search backtracks on the true value of the
// centering objective, and the reduced Hessian stays positive definite no
// matter how many rows tighten, so degenerate vertices and linearly dependent
// rows cost nothing. Multipliers are recovered by least squares on exit only.
// With a Phase1Spec the loop returns as soon as the feasibility shift goes
// decisively negative: a strictly feasible iterate is the goal there, and
// waiting for a centered one can spin forever when the feasible set is
// unbounded.
CenterResult center(const Inner& in, double t, Eigen::VectorXd& x, Eigen::VectorXd& nu,
                    int max_steps, double lambda_tol = 0.3, const Phase1Spec* p1 = nullptr) {
  CenterResult cr;
  const int m = static_cast<int>(in.a.rows());
  if (nu.size() != m) nu = Eigen::VectorXd::Zero(m);
  const double b_scale = 1.0 + (m > 0 ? in.b.cwiseAbs().maxCoeff() : 0.0);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
  Eigen::MatrixXd z;  // orthonormal basis of null(A)
  if (m > 0) {
    qr.compute(in.a.transpose());
    const int rank = static_cast<int>(qr.rank());
    const Eigen::MatrixXd qfull = qr.householderQ();
    z = qfull.rightCols(in.n - rank);
    // Minimum-norm restoration of A x = b. Callers hand over points that are
    // feasible up to roundoff, so the correction cannot leave the cone.
    const Eigen::VectorXd res = qr.colsPermutation().transpose() * (in.b - in.a * x);
    if (rank > 0) {
      const Eigen::VectorXd w = qr.matrixR()
                                    .topLeftCorner(rank, rank)
                                    .triangularView<Eigen::Upper>()
                                    .transpose()
                                    .solve(res.head(rank));
      x += qfull.leftCols(rank) * w;
    }
    if ((in.a * x - in.b).cwiseAbs().maxCoeff() > 1e-6 * b_scale) return cr;
  }

  auto finish = [&]() -> CenterResult& {
    if (m > 0) {
      BarrierEval ev;
      if (eval_barrier(in, x, ev)) {
        nu = qr.solve(-(t * objective_grad(in, x) + ev.grad));
      }
      cr.primal_residual = (in.a * x - in.b).cwiseAbs().maxCoeff();
    }
    cr.ok = true;
    return cr;
  };

  double best_lambda = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (int it = 0; it < max_steps; ++it) {
    BarrierEval ev;
    if (!eval_barrier(in, x, ev)) return cr;
    const Eigen::VectorXd g = t * objective_grad(in, x) + ev.grad;

    Eigen::VectorXd dx;
    double lambda2 = 0.0;
    if (m == 0) {
      HessianFactors hf;
      if (!factor_hessian(in, ev, t, hf)) return cr;
      dx = -hf.solve(in, g);
      if (!dx.allFinite()) return cr;
      lambda2 = -g.dot(dx);
    } else if (z.cols() == 0) {
      // A pins x completely; the restored point is the centered point.
      dx = Eigen::VectorXd::Zero(in.n);
    } else {
      Eigen::MatrixXd hz = z.transpose() * (dense_hessian(in, ev, t) * z);
      hz = 0.5 * (hz + hz.transpose());
      const Eigen::VectorXd gz = z.transpose() * g;
      Eigen::LLT<Eigen::MatrixXd> llt(hz);
      // Factor exactly when possible: a ridge sized by the largest curvature
      // wrecks the small-curvature directions of a barrier Hessian whose
      // spectrum spans many decades. Regularize only on breakdown.
      double reg = 1e-14 * std::max(1.0, hz.diagonal().cwiseAbs().maxCoeff());
      for (int attempt = 0; llt.info() != Eigen::Success; ++attempt) {
        if (attempt >= 4) return cr;
        Eigen::MatrixXd hr = hz;
        hr.diagonal().array() += reg;
        llt.compute(hr);
        reg *= 1e4;
      }
      Eigen::VectorXd dy = -llt.solve(gz);
      if (!dy.allFinite()) return cr;
      // One monitored refinement pass against the exact reduced system.
      const Eigen::VectorXd rres = gz + hz * dy;
      const Eigen::VectorXd dyr = dy - llt.solve(rres);
      if (dyr.allFinite() && (gz + hz * dyr).norm() < rres.norm()) dy = dyr;
      dx = z * dy;
      lambda2 = -gz.dot(dy);
    }
    ++cr.steps;
    const double lambda = std::sqrt(std::max(0.0, lambda2));
#ifdef MGMC_CONIC_TRACE
    fprintf(stderr, "center t=%g it=%d lambda=%g\n", t, it, lambda);
#endif
    if (lambda <= lambda_tol) return finish();
    // Noise floor: at extreme curvature the decrement cannot be driven below
    // the roundoff of the reduced solve. A plateau with lambda < 1 is still an
    // approximately centered point (the gap bound degrades by a constant
    // factor only), so take it rather than burn the budget.
    if (lambda < 0.99 * best_lambda) {
      best_lambda = lambda;
      stalled = 0;
    } else if (++stalled >= 5 && lambda < 1.0) {
      return finish();
    }

    double f0;
    if (!barrier_value(in, x, f0)) return cr;
    f0 += t * inner_objective(in, x);
    const double dir_f = g.dot(dx);
    if (!(dir_f < 0.0)) {
      return lambda <= 1.0 ? finish() : cr;
    }

    // Step cap: stay strictly inside the nonnegative coordinates. PSD walls
    // reject inside the search through the barrier value itself.
    double s = 1.0;
    for (const StdBlock& blk : in.blocks) {
      if (blk.kind != BlockKind::Nonneg) continue;
      for (int i = 0; i < blk.size; ++i) {
        const double di = dx(blk.offset + i);
        if (di < 0.0) s = std::min(s, -0.99 * x(blk.offset + i) / di);
      }
    }

    // No absolute floor on s: the boundary cap can legitimately be tiny when
    // the direction is huge, and 60 halvings bound the loop on their own.
    bool accepted = false;
    for (int bt = 0; bt < 60 && s > 0.0; ++bt, s *= 0.5) {
      const Eigen::VectorXd xt = x + s * dx;
      double ft;
      if (!barrier_value(in, xt, ft)) continue;
      ft += t * inner_objective(in, xt);
#ifdef MGMC_CONIC_TRACE
      fprintf(stderr, "    bt s=%g f0=%.17g ft=%.17g need=%.17g\n", s, f0, ft,
              f0 + 0.25 * s * dir_f + 1e-14 * std::abs(f0));
#endif
      // The absolute slack covers the roundoff floor of the comparison at
      // large t, where a genuine decrease can sit below one ulp of f0.
      if (ft <= f0 + 0.25 * s * dir_f + 1e-14 * std::abs(f0)) {
        x = xt;
        accepted = true;
        break;
      }
    }
#ifdef MGMC_CONIC_TRACE
    fprintf(stderr, "  step s=%g accepted=%d lambda=%g\n", s, accepted ? 1 : 0, lambda);
#endif
    if (!accepted) {
      // Line search at the noise floor: the point is as centered as the
      // arithmetic allows.
      return lambda <= 1.0 ? finish() : cr;
    }
    if (p1 != nullptr && p1->gamma_lo + x(p1->gamma_coord) <= -1e-4 * p1->gamma_scale) {
      return finish();
    }
    if (x.cwiseAbs().maxCoeff() > 1e14) {
      cr.diverged = true;
      return cr;
    }
  }
  return cr;
}

struct PathResult {
  enum class Kind { Converged, EarlyFeasible, Infeasible, Unbounded, Fail } kind = Kind::Fail;
  double t_final = 0.0;
  int steps = 0;
  double primal_residual = 0.0;
};

// Follow the central path. For Phase I (spec != nullptr) exits early on a
// strictly feasible iterate or an infeasibility certificate.
PathResult follow_path(const Inner& in, Eigen::VectorXd& x, Eigen::VectorXd& nu, double t0,
                       double mu, double tol, const Phase1Spec* spec) {
  PathResult pr;
  double t = t0;
  const double b_scale = 1.0 + (in.a.rows() > 0 ? in.b.cwiseAbs().maxCoeff() : 0.0);
  // A huge linear objective produces huge yet legitimate values, so the
  // runaway test must scale with the objective data as well as the rhs.
  const double f_scale = b_scale + in.c.cwiseAbs().maxCoeff();
  bool has_quad = false;
  for (const StdBlock& blk : in.blocks) has_quad = has_quad || blk.q != nullptr;
  for (int stage = 0; stage < 90; ++stage) {
    CenterResult cr = center(in, t, x, nu, 80, 0.3, spec);
    pr.steps += cr.steps;
    if (cr.diverged) {
      pr.kind = spec != nullptr ? PathResult::Kind::Fail : PathResult::Kind::Unbounded;
      return pr;
    }
    if (!cr.ok) {
      pr.kind = PathResult::Kind::Fail;
      return pr;
    }
    pr.primal_residual = cr.primal_residual;
    pr.t_final = t;
    const double gap = in.m_barrier / t;
    const double f = inner_objective(in, x);

    if (spec != nullptr) {
      const double gamma = spec->gamma_lo + x(spec->gamma_coord);
      if (gamma < 0.0 &&
          (gamma <= -1e-4 * spec->gamma_scale || gap <= std::max(1e-12, 1e-3 * -gamma))) {
        pr.kind = PathResult::Kind::EarlyFeasible;
        return pr;
      }
      // Central-path lower bound on the optimal shift, with slack for
      // approximate centering.
      if (gamma - 2.0 * gap > 1e-9 * spec->gamma_scale) {
        pr.kind = PathResult::Kind::Infeasible;
        return pr;
      }
      if (gap <= 1e-11 * spec->gamma_scale) {
        pr.kind = gamma <= 0.0 ? PathResult::Kind::EarlyFeasible : PathResult::Kind::Infeasible;
        return pr;
      }
    } else {
      if (f < -1e13 * f_scale || x.cwiseAbs().maxCoeff() > 1e14) {
        pr.kind = PathResult::Kind::Unbounded;
        return pr;
      }
      // With a quadratic objective the relative gap can close long before the
      // slacks of the active rows separate from the inactive ones, and the
      // active-set polish needs that separation. Keep pushing t until the
      // slack threshold is data-driven rather than t-driven.
      const bool slacks_separated = !has_quad || 2.0 / t <= 1e-8 * b_scale;
      if ((gap <= tol * std::max(1.0, std::abs(f)) && slacks_separated) ||
          in.m_barrier == 0.0) {
        // Recovered duals scale like 1/(t*slack), so their accuracy tracks
        // the final Newton decrement. Re-center tightly, best effort.
        CenterResult fin = center(in, t, x, nu, 40, 1e-5);
        pr.steps += fin.steps;
        if (fin.ok) pr.primal_residual = fin.primal_residual;
        pr.kind = PathResult::Kind::Converged;
        return pr;
      }
    }
    t *= mu;
    if (t > 1e17) {
      pr.kind = spec != nullptr ? PathResult::Kind::Infeasible : PathResult::Kind::Converged;
      return pr;
    }
  }
  pr.kind = PathResult::Kind::Fail;
  return pr;
}

Eigen::VectorXd default_interior(const Inner& in) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(in.n);
  for (const StdBlock& blk : in.blocks) {
    if (blk.kind == BlockKind::Nonneg) {
      x.segment(blk.offset, blk.size).setOnes();
    } else if (blk.kind == BlockKind::PsdSym) {
      x.segment(blk.offset, blk.size) = svec(Eigen::MatrixXd::Identity(blk.dim, blk.dim));
    }
  }
  return x;
}

// Phase I: minimize the slack shift gamma with w_r = s_r + gamma, gamma
// reparameterized as gamma_lo + q, q >= 0 so the Hessian stays definite.
// Feasible instances surface an interior point; infeasible ones a certificate.
struct Phase1Outcome {
  PathResult::Kind kind = PathResult::Kind::Fail;
  Eigen::VectorXd x;  // strictly feasible point for the original inner system
  int steps = 0;
};

Phase1Outcome run_phase1(const Inner& in) {
  Phase1Outcome out;
  Inner ph;
  ph.blocks = in.blocks;
  // Feasibility only; the user objective (and its curvature) must not leak
  // into the shift minimization.
  for (auto& blk : ph.blocks) blk.q = nullptr;
  ph.n = in.n + 2;
  ph.n_user_blocks = in.n_user_blocks;
  ph.slack_block = in.slack_block;
  StdBlock qblk;
  qblk.kind = BlockKind::Nonneg;
  qblk.dim = 1;
  qblk.size = 1;
  qblk.offset = in.n;
  ph.blocks.push_back(qblk);
  StdBlock mblk;  // slack of the coercivity bound added below
  mblk.kind = BlockKind::Nonneg;
  mblk.dim = 1;
  mblk.size = 1;
  mblk.offset = in.n + 1;
  ph.blocks.push_back(mblk);
  ph.m_barrier = in.m_barrier + 2.0;

  const int m = static_cast<int>(in.a.rows());
  // Start from the default interior core; slacks absorb the shift.
  Eigen::VectorXd x_core = default_interior(in);
  double gamma0 = 1.0;
  std::vector<double> sigma(static_cast<std::size_t>(m), 0.0);
  for (int r = 0; r < m; ++r) {
    if (in.ineq_rows[static_cast<std::size_t>(r)] < 0) continue;
    // Core contribution only; the slack coordinate of x_core is zeroed below.
    double dot = 0.0;
    for (int j = 0; j < in.n; ++j) {
      const bool is_slack =
          in.slack_block >= 0 &&
          j >= in.blocks[static_cast<std::size_t>(in.slack_block)].offset;
      if (!is_slack) dot += in.a(r, j) * x_core(j);
    }
    sigma[static_cast<std::size_t>(r)] = in.b(r) - dot;
    gamma0 = std::max(gamma0, 1.0 - sigma[static_cast<std::size_t>(r)]);
  }
  const double gamma_lo = -10.0 * std::max(1.0, gamma0);

  Phase1Spec spec;
  spec.gamma_coord = in.n;
  spec.gamma_lo = gamma_lo;
  spec.gamma_scale = std::max(1.0, gamma0);

  // Rows: a'x + w - gamma = b  =>  a'x + w - q = b + gamma_lo (w reuses the
  // slack coordinates). Equality rows carry no shift.
  ph.a.setZero(m + 1, ph.n);
  ph.a.topLeftCorner(m, in.n) = in.a;
  ph.b.setZero(m + 1);
  ph.b.head(m) = in.b;
  ph.ineq_rows = in.ineq_rows;
  ph.ineq_rows.push_back(-1);
  for (int r = 0; r < m; ++r) {
    if (in.ineq_rows[static_cast<std::size_t>(r)] < 0) continue;
    ph.a(r, spec.gamma_coord) = -1.0;
    ph.b(r) += gamma_lo;
  }
  // Coercivity bound: sum of every barriered coordinate (nonnegative entries
  // plus PSD traces) stays below a large M, so centering cannot run off along
  // a recession ray of an unbounded feasible set. Infeasibility certificates
  // then formally apply to the M-bounded problem; M sits far above any
  // operating scale of interest.
  for (const StdBlock& blk : ph.blocks) {
    if (blk.kind == BlockKind::Nonneg) {
      for (int i = 0; i < blk.size; ++i) ph.a(m, blk.offset + i) = 1.0;
    } else if (blk.kind == BlockKind::PsdSym) {
      for (int j = 0; j < blk.dim; ++j) ph.a(m, blk.offset + j * (j + 1) / 2 + j) = 1.0;
    }
  }
  ph.c = Eigen::VectorXd::Zero(ph.n);
  ph.c(spec.gamma_coord) = 1.0;

  Eigen::VectorXd x(ph.n);
  x.head(in.n) = x_core;
  if (in.slack_block >= 0) {
    const StdBlock& sb = in.blocks[static_cast<std::size_t>(in.slack_block)];
    for (int r = 0; r < m; ++r) {
      const int k = in.ineq_rows[static_cast<std::size_t>(r)];
      if (k >= 0) x(sb.offset + k) = sigma[static_cast<std::size_t>(r)] + gamma0;
    }
  }
  x(spec.gamma_coord) = gamma0 - gamma_lo;
  // Keep M moderate: the Phase I analytic center sits near the bound for
  // unbounded feasible sets, and the Newton systems there carry a condition
  // number on the order of (M / slack scale)^2. s0 already tracks the data
  // scale through the initial slacks.
  const double s0 = ph.a.row(m).head(in.n + 1).dot(x.head(in.n + 1));
  const double m_bound = 1e3 * std::max(1.0, s0);
  ph.b(m) = m_bound;
  x(mblk.offset) = m_bound - s0;

  Eigen::VectorXd nu = Eigen::VectorXd::Zero(m + 1);
  PathResult pr = follow_path(ph, x, nu, 1.0, 20.0, 1e-9, &spec);
  out.kind = pr.kind;
  out.steps = pr.steps;
  if (pr.kind == PathResult::Kind::EarlyFeasible) {
    const double gamma = gamma_lo + x(spec.gamma_coord);
    out.x = x.head(in.n);
    if (in.slack_block >= 0) {
      const StdBlock& sb = in.blocks[static_cast<std::size_t>(in.slack_block)];
      for (int r = 0; r < m; ++r) {
        const int k = in.ineq_rows[static_cast<std::size_t>(r)];
        if (k >= 0) out.x(sb.offset + k) -= gamma;  // s = w - gamma > 0
      }
    }
  }
  return out;
}

// --- QP polish -------------------------------------------------------------

// Snap a barrier solution of an all-Free/Nonneg quadratic program onto its
// active face by solving the equality-constrained KKT system, then verify
// feasibility and multiplier signs. Returns false to keep the barrier point.
bool polish_qp(const ConicProblem& p, const Inner& in, const Eigen::VectorXd& x_inner,
               double t_final, std::vector<Eigen::VectorXd>& primal, Eigen::VectorXd& row_duals) {
  for (int b = 0; b < p.n_blocks(); ++b) {
    if (p.block_kind(b) == BlockKind::PsdSym) return false;
  }
  const int n = in.slack_block >= 0 ? in.blocks[static_cast<std::size_t>(in.slack_block)].offset
                                    : in.n;
  // Assemble objective pieces over core coordinates.
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd c = in.c.head(n);
  for (int b = 0; b < p.n_blocks(); ++b) {
    const StdBlock& blk = in.blocks[static_cast<std::size_t>(b)];
    if (blk.q != nullptr) q.block(blk.offset, blk.offset, blk.size, blk.size) = *blk.q;
  }

  const int m = static_cast<int>(in.a.rows());
  const double b_scale = 1.0 + (m > 0 ? in.b.cwiseAbs().maxCoeff() : 0.0);
  const double slack_tol = std::max(1e-8 * b_scale, 2.0 / std::max(t_final, 1.0));

  // Candidate active set: near-tight inequality rows and near-zero
  // nonnegative coordinates; equality rows always included.
  std::vector<Eigen::VectorXd> act_rows;
  std::vector<double> act_rhs;
  std::vector<int> act_user;  // inner row id, or -(coord+1) for bounds
  for (int r = 0; r < m; ++r) {
    const int k = in.ineq_rows[static_cast<std::size_t>(r)];
    const double slack =
        (k >= 0) ? x_inner(in.blocks[static_cast<std::size_t>(in.slack_block)].offset + k) : 0.0;
    if (k < 0 || slack <= slack_tol) {
      act_rows.push_back(in.a.row(r).head(n).transpose());
      act_rhs.push_back(in.b(r));
      act_user.push_back(r);
    }
  }
  for (int b = 0; b < p.n_blocks(); ++b) {
    const StdBlock& blk = in.blocks[static_cast<std::size_t>(b)];
    if (blk.kind != BlockKind::Nonneg) continue;
    for (int i = 0; i < blk.size; ++i) {
      if (x_inner(blk.offset + i) <= slack_tol) {
        // Normalized like a Le row (-x_i <= 0) so every active multiplier is
        // expected nonnegative.
        Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
        row(blk.offset + i) = -1.0;
        act_rows.push_back(row);
        act_rhs.push_back(0.0);
        act_user.push_back(-(blk.offset + i) - 1);
      }
    }
  }

  // Null-space solve of the equality-constrained QP. A saddle KKT system
  // would mix multipliers of size ~|c| into the primal rows and cancellation
  // could wipe out the primal coordinates entirely when the objective data is
  // huge; restricting to null(C) keeps the primal solve at primal scale.
  const int ma = static_cast<int>(act_rows.size());
  Eigen::MatrixXd ct(n, ma);
  Eigen::VectorXd d(ma);
  for (int i = 0; i < ma; ++i) {
    ct.col(i) = act_rows[static_cast<std::size_t>(i)];
    d(i) = act_rhs[static_cast<std::size_t>(i)];
  }
  const double ridge = 1e-12 * std::max(1.0, q.trace() / std::max(n, 1));
  Eigen::VectorXd xp(n);
  Eigen::VectorXd lam(ma);
  if (ma == 0) {
    Eigen::MatrixXd qr_q = q;
    qr_q.diagonal().array() += ridge;
    xp = qr_q.ldlt().solve(-c);
  } else {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_ct(ct);
    const Eigen::VectorXd x_part = ct.transpose().colPivHouseholderQr().solve(d);
    if ((ct.transpose() * x_part - d).cwiseAbs().maxCoeff() > 1e-7 * b_scale) return false;
    const int rank = static_cast<int>(qr_ct.rank());
    const Eigen::MatrixXd qfull = qr_ct.householderQ();
    const Eigen::MatrixXd z = qfull.rightCols(n - rank);
    if (z.cols() == 0) {
      xp = x_part;
    } else {
      Eigen::MatrixXd hred = z.transpose() * q * z;
      hred.diagonal().array() += ridge;
      const Eigen::VectorXd y = hred.ldlt().solve(-z.transpose() * (c + q * x_part));
      xp = x_part + z * y;
    }
    lam = qr_ct.solve(-(c + q * xp));
  }
  if (!xp.allFinite() || !lam.allFinite()) return false;

  // Verify: all rows feasible, active multipliers correctly signed.
  const double feas_tol = 1e-9 * b_scale;
  for (int r = 0; r < m; ++r) {
    const double lhs = in.a.row(r).head(n).dot(xp);
    const int k = in.ineq_rows[static_cast<std::size_t>(r)];
    if (k >= 0) {
      if (lhs > in.b(r) + feas_tol) return false;
    } else if (std::abs(lhs - in.b(r)) > feas_tol) {
      return false;
    }
  }
  for (int b = 0; b < p.n_blocks(); ++b) {
    const StdBlock& blk = in.blocks[static_cast<std::size_t>(b)];
    if (blk.kind == BlockKind::Nonneg &&
        xp.segment(blk.offset, blk.size).minCoeff() < -feas_tol) {
      return false;
    }
  }
  for (int i = 0; i < ma; ++i) {
    const int id = act_user[static_cast<std::size_t>(i)];
    const bool ineq = id >= 0 ? in.ineq_rows[static_cast<std::size_t>(id)] >= 0 : true;
    if (ineq && lam(i) < -1e-7 * (1.0 + lam.cwiseAbs().maxCoeff())) return false;
  }

  // Accept: overwrite primal and the affected row duals.
  for (int b = 0; b < p.n_blocks(); ++b) {
    const StdBlock& blk = in.blocks[static_cast<std::size_t>(b)];
    Eigen::VectorXd seg = xp.segment(blk.offset, blk.size);
    if (blk.kind == BlockKind::Nonneg) seg = seg.cwiseMax(0.0);
    primal[static_cast<std::size_t>(b)] = seg;
  }
  for (int i = 0; i < ma; ++i) {
    const int id = act_user[static_cast<std::size_t>(i)];
    if (id >= 0) {
      const int user = [&] {
        for (int u = 0; u < static_cast<int>(in.row_of_user.size()); ++u) {
          if (in.row_of_user[static_cast<std::size_t>(u)] == id) return u;
        }
        return -1;
      }();
      if (user >= 0) {
        row_duals(user) =
            std::max(0.0, lam(i)) / in.row_scale[static_cast<std::size_t>(user)];
      }
    }
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// solve

SolveOutcome solve(const ConicProblem& problem, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve: tol must be > 0");
  problem.validate();

  SolveOutcome out;
  BuildResult br = standardize(problem);
  Inner& in = br.inner;
  if (br.trivially_infeasible) {
    out.status = SolveStatus::Infeasible;
    return out;
  }

  const int m = static_cast<int>(in.a.rows());
  Eigen::VectorXd x;
  bool have_start = false;
  int phase1_steps = 0;

  // Direct start: default interior core with strictly positive slacks.
  {
    Eigen::VectorXd x0 = default_interior(in);
    if (in.slack_block >= 0) {
      const StdBlock& sb = in.blocks[static_cast<std::size_t>(in.slack_block)];
      bool ok = true;
      const double margin = 1e-6 * (1.0 + in.b.cwiseAbs().maxCoeff());
      for (int r = 0; r < m && ok; ++r) {
        const int k = in.ineq_rows[static_cast<std::size_t>(r)];
        if (k < 0) continue;
        double dot = 0.0;
        for (int j = 0; j < sb.offset; ++j) dot += in.a(r, j) * x0(j);
        const double s = in.b(r) - dot;
        if (s <= margin) ok = false;
        x0(sb.offset + k) = s;
      }
      if (ok) {
        x = x0;
        have_start = true;
      }
    } else {
      x = x0;
      have_start = true;
    }
  }

  if (!have_start) {
    Phase1Outcome p1 = run_phase1(in);
    phase1_steps = p1.steps;
    out.accuracy.phase1_used = true;
    if (p1.kind == PathResult::Kind::Infeasible) {
      out.status = SolveStatus::Infeasible;
      out.accuracy.newton_steps = phase1_steps;
      return out;
    }
    if (p1.kind != PathResult::Kind::EarlyFeasible) {
      out.status = SolveStatus::NumericalFailure;
      out.accuracy.newton_steps = phase1_steps;
      return out;
    }
    x = p1.x;
  }

  Eigen::VectorXd nu = Eigen::VectorXd::Zero(m);
  // Balance the first stage against the barrier so a large objective cannot
  // blow up the initial Newton direction; the path itself is unchanged, this
  // only reparameterizes where it starts. Moderate objectives keep t0 = 1.
  const double t0 = std::min(1.0, 100.0 / (1.0 + in.c.cwiseAbs().maxCoeff()));
  PathResult pr = follow_path(in, x, nu, t0, 20.0, tol, nullptr);
  out.accuracy.newton_steps = phase1_steps + pr.steps;
  out.accuracy.primal_residual = pr.primal_residual;
  if (pr.kind == PathResult::Kind::Unbounded) {
    out.status = SolveStatus::Unbounded;
    return out;
  }
  if (pr.kind != PathResult::Kind::Converged) {
    out.status = SolveStatus::NumericalFailure;
    return out;
  }

  const double t_final = pr.t_final;
  out.accuracy.gap = in.m_barrier / t_final;

  // Decode primal blocks.
  out.primal.resize(static_cast<std::size_t>(problem.n_blocks()));
  for (int b = 0; b < problem.n_blocks(); ++b) {
    const StdBlock& blk = in.blocks[static_cast<std::size_t>(b)];
    out.primal[static_cast<std::size_t>(b)] = x.segment(blk.offset, blk.size);
  }

  // Row duals: 1/(t*s) for inequality rows, nu/t for equality rows, mapped
  // back through the row equilibration.
  out.row_duals = Eigen::VectorXd::Zero(problem.n_constraints());
  for (int u = 0; u < problem.n_constraints(); ++u) {
    const int r = in.row_of_user[static_cast<std::size_t>(u)];
    if (r < 0) continue;
    const int k = in.ineq_rows[static_cast<std::size_t>(r)];
    double lam;
    if (k >= 0) {
      const double s = x(in.blocks[static_cast<std::size_t>(in.slack_block)].offset + k);
      lam = 1.0 / (t_final * std::max(s, 1e-300));
    } else {
      lam = nu(r) / t_final;
    }
    out.row_duals(u) = lam / in.row_scale[static_cast<std::size_t>(u)];
  }

  // Cone duals: z = -grad(barrier)/t per user block.
  BarrierEval ev;
  if (eval_barrier(in, x, ev)) {
    out.cone_duals.resize(static_cast<std::size_t>(problem.n_blocks()));
    for (int b = 0; b < problem.n_blocks(); ++b) {
      const StdBlock& blk = in.blocks[static_cast<std::size_t>(b)];
      out.cone_duals[static_cast<std::size_t>(b)] =
          -ev.grad.segment(blk.offset, blk.size) / t_final;
    }
  }

  bool has_quad = false;
  for (int b = 0; b < problem.n_blocks(); ++b) has_quad = has_quad || problem.has_quadratic(b);
  if (has_quad) polish_qp(problem, in, x, t_final, out.primal, out.row_duals);

  out.objective = problem.objective_value(out.primal);
  out.status = SolveStatus::Optimal;
  return out;
}

// ---------------------------------------------------------------------------
// KKT residual oracle

namespace {

// Lawson-Hanson nonnegative least squares with optional free columns:
// minimize ||M u - y|| with u_i >= 0 for constrained columns.
Eigen::VectorXd nnls_free(const Eigen::MatrixXd& mm, const Eigen::VectorXd& y,
                          const std::vector<bool>& constrained) {
  const int nc = static_cast<int>(mm.cols());
  Eigen::VectorXd u = Eigen::VectorXd::Zero(nc);
  std::vector<bool> passive(static_cast<std::size_t>(nc), false);
  for (int j = 0; j < nc; ++j) {
    if (!constrained[static_cast<std::size_t>(j)]) passive[static_cast<std::size_t>(j)] = true;
  }

  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<int> cols;
    for (int j = 0; j < nc; ++j) {
      if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
    }
    z = Eigen::VectorXd::Zero(nc);
    if (cols.empty()) return;
    Eigen::MatrixXd mp(mm.rows(), static_cast<int>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) mp.col(static_cast<int>(k)) = mm.col(cols[k]);
    const Eigen::VectorXd zp = mp.colPivHouseholderQr().solve(y);
    for (std::size_t k = 0; k < cols.size(); ++k) z(cols[k]) = zp(static_cast<int>(k));
  };

  const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
  bool any_free = false;
  for (int j = 0; j < nc; ++j) any_free = any_free || !constrained[static_cast<std::size_t>(j)];
  if (any_free) {
    Eigen::VectorXd z;
    solve_passive(z);
    u = z;  // free columns enter the fit before any sign-constrained one
  }
  for (int outer = 0; outer < 8 * nc + 8; ++outer) {
    const Eigen::VectorXd w = mm.transpose() * (y - mm * u);
    int best = -1;
    double best_w = 1e-10 * scale;
    for (int j = 0; j < nc; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
        best = j;
        best_w = w(j);
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    for (int inner = 0; inner < 8 * nc + 8; ++inner) {
      Eigen::VectorXd z;
      solve_passive(z);
      bool all_ok = true;
      double alpha = 1.0;
      for (int j = 0; j < nc; ++j) {
        if (passive[static_cast<std::size_t>(j)] && constrained[static_cast<std::size_t>(j)] &&
            z(j) <= 0.0) {
          all_ok = false;
          const double denom = u(j) - z(j);
          if (denom > 0.0) alpha = std::min(alpha, u(j) / denom);
        }
      }
      if (all_ok) {
        u = z;
        break;
      }
      u += alpha * (z - u);
      for (int j = 0; j < nc; ++j) {
        if (passive[static_cast<std::size_t>(j)] && constrained[static_cast<std::size_t>(j)] &&
            u(j) <= 1e-12 * scale) {
          passive[static_cast<std::size_t>(j)] = false;
          u(j) = 0.0;
        }
      }
    }
  }
  return u;
}

}  // namespace

double kkt_residual(const ConicProblem& problem, const std::vector<Eigen::VectorXd>& primal,
                    const std::optional<Eigen::VectorXd>& row_duals) {
  problem.validate();
  if (static_cast<int>(primal.size()) != problem.n_blocks()) {
    throw std::invalid_argument("kkt_residual: block count mismatch");
  }
  std::vector<int> offsets(static_cast<std::size_t>(problem.n_blocks()), 0);
  int n = 0;
  bool has_psd = false;
  for (int b = 0; b < problem.n_blocks(); ++b) {
    if (primal[static_cast<std::size_t>(b)].size() != problem.block_size(b)) {
      throw std::invalid_argument("kkt_residual: block length mismatch");
    }
    offsets[static_cast<std::size_t>(b)] = n;
    n += problem.block_size(b);
    has_psd = has_psd || problem.block_kind(b) == BlockKind::PsdSym;
  }
  Eigen::VectorXd x(n);
  for (int b = 0; b < problem.n_blocks(); ++b) {
    x.segment(offsets[static_cast<std::size_t>(b)], problem.block_size(b)) =
        primal[static_cast<std::size_t>(b)];
  }

  // Primal feasibility: rows.
  double viol = 0.0;
  double rhs_scale = 0.0;
  const int m = problem.n_constraints();
  Eigen::MatrixXd rows(m, n);
  Eigen::VectorXd slack(m);
  for (int r = 0; r < m; ++r) {
    const Constraint& c = problem.constraint(r);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    for (const auto& t : c.terms) {
      a(offsets[static_cast<std::size_t>(t.block)] + t.index) += t.coeff;
    }
    rows.row(r) = a;
    rhs_scale = std::max(rhs_scale, std::abs(c.rhs));
    const double lhs = a.dot(x);
    switch (c.rel) {
      case Relation::Eq:
        viol = std::max(viol, std::abs(lhs - c.rhs));
        slack(r) = 0.0;
        break;
      case Relation::Le:
        viol = std::max(viol, std::max(0.0, lhs - c.rhs));
        slack(r) = c.rhs - lhs;
        break;
      case Relation::Ge:
        viol = std::max(viol, std::max(0.0, c.rhs - lhs));
        slack(r) = lhs - c.rhs;
        break;
    }
  }
  // Primal feasibility: cones.
  for (int b = 0; b < problem.n_blocks(); ++b) {
    const auto& xb = primal[static_cast<std::size_t>(b)];
    if (problem.block_kind(b) == BlockKind::Nonneg) {
      viol = std::max(viol, std::max(0.0, -xb.minCoeff()));
    } else if (problem.block_kind(b) == BlockKind::PsdSym) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(smat(xb));
      viol = std::max(viol, std::max(0.0, -es.eigenvalues().minCoeff()));
    }
  }

  // Optimality terms only make sense at (near-)feasible candidates; an
  // infeasible point is scored by its violation alone.
  const double gate = 1e-6 * (1.0 + x.cwiseAbs().maxCoeff() + rhs_scale);
  if (viol > gate) return viol;
  double resid = viol;

  // Objective gradient.
  Eigen::VectorXd grad(n);
  for (int b = 0; b < problem.n_blocks(); ++b) {
    Eigen::VectorXd g = problem.objective(b);
    if (problem.has_quadratic(b)) g += problem.quadratic(b) * primal[static_cast<std::size_t>(b)];
    grad.segment(offsets[static_cast<std::size_t>(b)], problem.block_size(b)) = g;
  }

  const double scale = std::max(1.0, grad.cwiseAbs().maxCoeff());
  Eigen::VectorXd lam;
  if (row_duals.has_value()) {
    if (row_duals->size() != m) throw std::invalid_argument("kkt_residual: dual length mismatch");
    lam = *row_duals;
  } else {
    if (has_psd) {
      throw std::invalid_argument(
          "kkt_residual: problems with PSD blocks need duals from a solve");
    }
    // Estimate duals from the active set by sign-constrained least squares.
    // Stationarity: grad + sum(active rows' signed duals) - z = 0 with z >= 0
    // supported on active bounds.
    const double act_tol = 1e-6 * std::max(1.0, x.cwiseAbs().maxCoeff());
    std::vector<int> col_row;
    std::vector<Eigen::VectorXd> cols;
    std::vector<bool> constrained;
    for (int r = 0; r < m; ++r) {
      const Constraint& c = problem.constraint(r);
      const bool active = c.rel == Relation::Eq || slack(r) <= act_tol;
      if (!active) continue;
      const double sgn = c.rel == Relation::Ge ? 1.0 : -1.0;
      // Columns are -signed rows so that estimated coefficients are the
      // multipliers themselves.
      cols.push_back(sgn * rows.row(r).transpose());
      constrained.push_back(c.rel != Relation::Eq);
      col_row.push_back(r);
    }
    for (int b = 0; b < problem.n_blocks(); ++b) {
      if (problem.block_kind(b) != BlockKind::Nonneg) continue;
      for (int i = 0; i < problem.block_size(b); ++i) {
        if (primal[static_cast<std::size_t>(b)](i) <= act_tol) {
          Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
          e(offsets[static_cast<std::size_t>(b)] + i) = 1.0;
          cols.push_back(e);
          constrained.push_back(true);
          col_row.push_back(-1);
        }
      }
    }
    lam = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd stat = grad;
    if (!cols.empty()) {
      Eigen::MatrixXd mm(n, static_cast<int>(cols.size()));
      for (std::size_t k = 0; k < cols.size(); ++k) mm.col(static_cast<int>(k)) = cols[k];
      const Eigen::VectorXd u = nnls_free(mm, grad, constrained);
      stat = grad - mm * u;
      for (std::size_t k = 0; k < cols.size(); ++k) {
        if (col_row[k] >= 0) lam(col_row[k]) = u(static_cast<int>(k));
      }
    }
    return std::max(resid, stat.cwiseAbs().maxCoeff());
  }

  // Duals supplied: stationarity with cone dual recovered as the residual
  // itself, then checked for cone membership and complementarity.
  Eigen::VectorXd stat = grad;
  for (int r = 0; r < m; ++r) {
    const Constraint& c = problem.constraint(r);
    const double sgn = c.rel == Relation::Ge ? -1.0 : 1.0;
    stat += sgn * lam(r) * rows.row(r).transpose();
    if (c.rel != Relation::Eq) {
      resid = std::max(resid, std::max(0.0, -lam(r)));                 // dual feasibility
      resid = std::max(resid, std::abs(lam(r) * std::max(slack(r), 0.0)));  // complementarity
    }
  }
  for (int b = 0; b < problem.n_blocks(); ++b) {
    const auto seg = stat.segment(offsets[static_cast<std::size_t>(b)], problem.block_size(b));
    const auto& xb = primal[static_cast<std::size_t>(b)];
    switch (problem.block_kind(b)) {
      case BlockKind::Free:
        resid = std::max(resid, seg.cwiseAbs().maxCoeff());
        break;
      case BlockKind::Nonneg:
        // z = stat must be a nonnegative vector complementary to x.
        resid = std::max(resid, std::max(0.0, -seg.minCoeff()) );
        resid = std::max(resid, seg.cwiseProduct(xb).cwiseAbs().maxCoeff());
        break;
      case BlockKind::PsdSym: {
        const Eigen::MatrixXd z = smat(seg);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(z);
        resid = std::max(resid, std::max(0.0, -es.eigenvalues().minCoeff()));
        resid = std::max(resid, std::abs(seg.dot(xb)));
        break;
      }
    }
  }
  (void)scale;
  return resid;
}

}  // namespace mgmc
