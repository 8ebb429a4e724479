#include "drce/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace drce::sdp {

// ---------------------------------------------------------------------------
// AffineMatrix

AffineMatrix::AffineMatrix(Index rows, Index cols) : constant_(MatrixXd::Zero(rows, cols)) {}

AffineMatrix::AffineMatrix(const MatrixXd& constant) : constant_(constant) {}

void AffineMatrix::add_term(int var, const MatrixXd& coeff) {
  if (coeff.rows() != rows() || coeff.cols() != cols())
    throw std::invalid_argument("AffineMatrix::add_term: shape mismatch");
  auto it = terms_.find(var);
  if (it == terms_.end())
    terms_.emplace(var, coeff);
  else
    it->second += coeff;
}

AffineMatrix AffineMatrix::operator+(const AffineMatrix& o) const {
  if (o.rows() != rows() || o.cols() != cols())
    throw std::invalid_argument("AffineMatrix: shape mismatch in +");
  AffineMatrix r(*this);
  r.constant_ += o.constant_;
  for (const auto& [k, c] : o.terms_) r.add_term(k, c);
  return r;
}

AffineMatrix AffineMatrix::operator-(const AffineMatrix& o) const { return *this + o.scaled(-1.0); }

AffineMatrix AffineMatrix::scaled(double s) const {
  AffineMatrix r(constant_ * s);
  for (const auto& [k, c] : terms_) r.terms_.emplace(k, c * s);
  return r;
}

AffineMatrix AffineMatrix::operator*(const MatrixXd& right) const {
  if (cols() != right.rows()) throw std::invalid_argument("AffineMatrix: shape mismatch in *");
  AffineMatrix r(constant_ * right);
  for (const auto& [k, c] : terms_) r.terms_.emplace(k, c * right);
  return r;
}

AffineMatrix operator*(const MatrixXd& left, const AffineMatrix& m) {
  if (left.cols() != m.rows()) throw std::invalid_argument("AffineMatrix: shape mismatch in *");
  AffineMatrix r(left * m.constant_);
  for (const auto& [k, c] : m.terms_) r.terms_.emplace(k, left * c);
  return r;
}

AffineMatrix AffineMatrix::transpose() const {
  AffineMatrix r(MatrixXd(constant_.transpose()));
  for (const auto& [k, c] : terms_) r.terms_.emplace(k, MatrixXd(c.transpose()));
  return r;
}

AffineMatrix AffineMatrix::trace() const {
  AffineMatrix r(MatrixXd::Constant(1, 1, constant_.trace()));
  for (const auto& [k, c] : terms_) r.terms_.emplace(k, MatrixXd::Constant(1, 1, c.trace()));
  return r;
}

MatrixXd AffineMatrix::evaluate(const VectorXd& y) const {
  MatrixXd r = constant_;
  for (const auto& [k, c] : terms_) r += y(k) * c;
  return r;
}

AffineMatrix block2x2(const AffineMatrix& tl, const AffineMatrix& tr, const AffineMatrix& bl,
                      const AffineMatrix& br) {
  if (tl.rows() != tr.rows() || bl.rows() != br.rows() || tl.cols() != bl.cols() ||
      tr.cols() != br.cols())
    throw std::invalid_argument("block2x2: inconsistent block shapes");
  const Index r0 = tl.rows(), r1 = bl.rows(), c0 = tl.cols(), c1 = tr.cols();
  auto place = [&](AffineMatrix& out, const AffineMatrix& part, Index ro, Index co) {
    MatrixXd c = MatrixXd::Zero(r0 + r1, c0 + c1);
    c.block(ro, co, part.rows(), part.cols()) = part.constant();
    out = out + AffineMatrix(c);
    for (const auto& [k, coeff] : part.terms()) {
      MatrixXd t = MatrixXd::Zero(r0 + r1, c0 + c1);
      t.block(ro, co, part.rows(), part.cols()) = coeff;
      out.add_term(k, t);
    }
  };
  AffineMatrix out(r0 + r1, c0 + c1);
  place(out, tl, 0, 0);
  place(out, tr, 0, c0);
  place(out, bl, r0, 0);
  place(out, br, r0, c0);
  return out;
}

// ---------------------------------------------------------------------------
// LmiProblem

AffineMatrix LmiProblem::add_symmetric_variable(Index n) {
  AffineMatrix m(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i <= j; ++i) {
      MatrixXd e = MatrixXd::Zero(n, n);
      e(i, j) = 1.0;
      e(j, i) = 1.0;
      m.add_term(num_vars_++, e);
    }
  }
  return m;
}

AffineMatrix LmiProblem::add_matrix_variable(Index rows, Index cols) {
  AffineMatrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      MatrixXd e = MatrixXd::Zero(rows, cols);
      e(i, j) = 1.0;
      m.add_term(num_vars_++, e);
    }
  }
  return m;
}

int LmiProblem::add_lmi(const AffineMatrix& expr, std::string name) {
  if (expr.rows() != expr.cols()) throw std::invalid_argument("add_lmi: expression is not square");
  Block b;
  b.name = std::move(name);
  b.constant = 0.5 * (expr.constant() + expr.constant().transpose());
  for (const auto& [k, c] : expr.terms()) {
    MatrixXd s = 0.5 * (c + c.transpose());
    if (s.cwiseAbs().maxCoeff() > 0.0) b.terms.emplace(k, std::move(s));
  }
  blocks_.push_back(std::move(b));
  return static_cast<int>(blocks_.size()) - 1;
}

void LmiProblem::add_objective(const MatrixXd& weight, const AffineMatrix& expr) {
  if (weight.rows() != expr.rows() || weight.cols() != expr.cols())
    throw std::invalid_argument("add_objective: shape mismatch");
  objective_constant_ += weight.cwiseProduct(expr.constant()).sum();
  for (const auto& [k, c] : expr.terms()) objective_[k] += weight.cwiseProduct(c).sum();
}

VectorXd LmiProblem::objective_coefficients() const {
  VectorXd c = VectorXd::Zero(num_vars_);
  for (const auto& [k, v] : objective_) c(k) = v;
  return c;
}

double LmiProblem::objective_value(const VectorXd& y) const {
  return objective_coefficients().dot(y) + objective_constant_;
}

MatrixXd LmiProblem::evaluate_block(int k, const VectorXd& y) const {
  const auto& b = blocks_.at(static_cast<std::size_t>(k));
  MatrixXd r = b.constant;
  for (const auto& [i, c] : b.terms) r += y(i) * c;
  return r;
}

// ---------------------------------------------------------------------------
// Interior point method
//
// Internally the problem is the standard dual form
//     max b^T y   s.t.  S = C - sum_i y_i A_i >= 0
// with C = F0 and A_i = -F_i; its dual is
//     min <C, X>  s.t.  <A_i, X> = b_i,  X >= 0.

namespace {

struct Coeff {
  int row;
  int col;
  double value;
};

struct VarInBlock {
  int var;
  std::vector<Coeff> coeffs;  // entries of A_i restricted to this block
};

using BlockVec = std::vector<MatrixXd>;

double inner(const BlockVec& a, const BlockVec& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k].cwiseProduct(b[k]).sum();
  return s;
}

double frob(const BlockVec& a) { return std::sqrt(inner(a, a)); }

// Largest step alpha such that X + alpha dX stays PSD (infinity if unbounded).
double max_step(const BlockVec& x, const BlockVec& dx) {
  double alpha = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < x.size(); ++k) {
    Eigen::LLT<MatrixXd> llt(x[k]);
    if (llt.info() != Eigen::Success) return 0.0;
    const auto l = llt.matrixL();
    MatrixXd t = l.solve(dx[k]);
    MatrixXd m = l.solve(MatrixXd(t.transpose()));
    m = 0.5 * (m + m.transpose());
    const double lmin = (m.rows() == 1)
                            ? m(0, 0)
                            : Eigen::SelfAdjointEigenSolver<MatrixXd>(m, Eigen::EigenvaluesOnly)
                                  .eigenvalues()
                                  .minCoeff();
    if (lmin < 0.0) alpha = std::min(alpha, -1.0 / lmin);
  }
  return alpha;
}

class Solver {
 public:
  Solver(const LmiProblem& p, const SolverOptions& opt) : problem_(p), opt_(opt) {
    m_ = p.num_variables();
    const auto& blocks = p.blocks();
    nb_ = blocks.size();
    b_ = p.objective_coefficients();
    b_scale_ = std::max(1e-300, b_.cwiseAbs().maxCoeff());
    if (b_.size() == 0 || b_.cwiseAbs().maxCoeff() == 0.0) b_scale_ = 1.0;
    b_ /= b_scale_;
    in_block_.resize(nb_);
    for (std::size_t k = 0; k < nb_; ++k) {
      c_.push_back(blocks[k].constant);
      n_total_ += static_cast<double>(blocks[k].constant.rows());
      for (const auto& [var, coeff] : blocks[k].terms) {
        VarInBlock vb{var, {}};
        for (Index j = 0; j < coeff.cols(); ++j)
          for (Index i = 0; i < coeff.rows(); ++i)
            if (coeff(i, j) != 0.0)
              vb.coeffs.push_back({static_cast<int>(i), static_cast<int>(j), -coeff(i, j)});
        in_block_[k].push_back(std::move(vb));
      }
    }
  }

  SolverResult run() {
    init_point();
    SolverResult res;
    double best_gap = std::numeric_limits<double>::infinity();
    int stall = 0;
    for (int it = 0; it <= opt_.max_iterations; ++it) {
      compute_residuals();
      const double pobj = inner(c_, x_);
      const double dobj = b_.dot(y_);
      const double lower = dobj * b_scale_ + problem_.objective_constant();
      const double upper = pobj * b_scale_ + problem_.objective_constant();
      const double gap = (upper - lower) / std::max(1.0, std::abs(lower));
      const double pinf = rp_.norm() / (1.0 + b_.norm());
      const double dinf = frob(rd_) / (1.0 + frob(c_));
      if (opt_.verbose)
        std::fprintf(stderr, "it %3d  obj % .10e  upper % .10e  gap %.2e  pinf %.2e  dinf %.2e\n",
                     it, lower, upper, gap, pinf, dinf);
      const bool feasible = pinf <= opt_.feasibility_tol && dinf <= 1e-2 * opt_.feasibility_tol;
      if (feasible && gap >= 0.0 && gap <= opt_.gap_tol) {
        res.y = y_;
        res.objective = lower;
        res.upper_bound = upper;
        res.gap = gap;
        res.iterations = it;
        res.multipliers.reserve(nb_);
        for (const auto& x : x_) res.multipliers.push_back(x * b_scale_);
        return res;
      }
      if (it == opt_.max_iterations) break;
      if (std::abs(gap) < 0.9 * best_gap) {
        best_gap = std::abs(gap);
        stall = 0;
      } else if (++stall > 15) {
        break;
      }
      if (!step()) break;
    }
    std::ostringstream os;
    os << "interior point method did not reach gap tolerance " << opt_.gap_tol << " (best "
       << best_gap << ")";
    throw SolverFailure(os.str());
  }

 private:
  void init_point() {
    double max_a = 0.0;
    double xi = 0.0;
    std::vector<double> anorm(static_cast<std::size_t>(m_), 0.0);
    for (std::size_t k = 0; k < nb_; ++k)
      for (const auto& vb : in_block_[k])
        for (const auto& e : vb.coeffs) anorm[static_cast<std::size_t>(vb.var)] += e.value * e.value;
    for (int i = 0; i < m_; ++i) {
      const double a = std::sqrt(anorm[static_cast<std::size_t>(i)]);
      max_a = std::max(max_a, a);
      xi = std::max(xi, (1.0 + std::abs(b_(i))) / (1.0 + a));
    }
    const double sq = std::sqrt(n_total_);
    xi = std::max({10.0, sq, n_total_ * xi});
    const double eta = std::max({10.0, sq, max_a, frob(c_)});
    x_.clear();
    s_.clear();
    for (std::size_t k = 0; k < nb_; ++k) {
      const auto n = c_[k].rows();
      x_.push_back(xi * MatrixXd::Identity(n, n));
      s_.push_back(eta * MatrixXd::Identity(n, n));
    }
    y_ = VectorXd::Zero(m_);
  }

  // Rp = b - A(X), Rd = C - A^T(y) - S
  void compute_residuals() {
    rp_ = b_;
    rd_ = c_;
    for (std::size_t k = 0; k < nb_; ++k) {
      rd_[k] -= s_[k];
      for (const auto& vb : in_block_[k]) {
        double ax = 0.0;
        for (const auto& e : vb.coeffs) {
          ax += e.value * x_[k](e.row, e.col);
          rd_[k](e.row, e.col) -= y_(vb.var) * e.value;
        }
        rp_(vb.var) -= ax;
      }
    }
  }

  // <A_i, K> for all i
  VectorXd apply_a(const BlockVec& k) const {
    VectorXd r = VectorXd::Zero(m_);
    for (std::size_t b = 0; b < nb_; ++b)
      for (const auto& vb : in_block_[b])
        for (const auto& e : vb.coeffs) r(vb.var) += e.value * k[b](e.row, e.col);
    return r;
  }

  BlockVec apply_at(const VectorXd& dy) const {
    BlockVec r;
    for (std::size_t b = 0; b < nb_; ++b) {
      MatrixXd m = MatrixXd::Zero(c_[b].rows(), c_[b].cols());
      for (const auto& vb : in_block_[b])
        for (const auto& e : vb.coeffs) m(e.row, e.col) += dy(vb.var) * e.value;
      r.push_back(std::move(m));
    }
    return r;
  }

  void build_schur() {
    schur_ = MatrixXd::Zero(m_, m_);
    for (std::size_t b = 0; b < nb_; ++b) {
      const MatrixXd& x = x_[b];
      const MatrixXd& si = s_inv_[b];
      const auto n = x.rows();
      MatrixXd w(n, n);
      for (const auto& vi : in_block_[b]) {
        // W = X A_i S^{-1}
        w.setZero();
        for (const auto& e : vi.coeffs) w.noalias() += e.value * x.col(e.row) * si.row(e.col);
        for (const auto& vj : in_block_[b]) {
          if (vj.var < vi.var) continue;
          double s = 0.0;
          for (const auto& e : vj.coeffs) s += e.value * w(e.row, e.col);
          schur_(vi.var, vj.var) += s;
        }
      }
    }
    schur_ = schur_.selfadjointView<Eigen::Upper>();
  }

  bool factor_schur() {
    llt_.compute(schur_);
    if (llt_.info() == Eigen::Success) return true;
    const double reg = 1e-14 * std::max(1.0, schur_.diagonal().cwiseAbs().maxCoeff());
    for (double r = reg; r < 1e-2; r *= 100.0) {
      MatrixXd m = schur_;
      m.diagonal().array() += r;
      llt_.compute(m);
      if (llt_.info() == Eigen::Success) return true;
    }
    return false;
  }

  // Solves the Newton system for a complementarity right-hand side rc
  // (X dS + dX S = rc), returning (dX, dy, dS).
  void direction(const BlockVec& rc, BlockVec& dx, VectorXd& dy, BlockVec& ds) const {
    BlockVec k(nb_);
    for (std::size_t b = 0; b < nb_; ++b) k[b] = (rc[b] - x_[b] * rd_[b]) * s_inv_[b];
    const VectorXd rhs = rp_ - apply_a(k);
    dy = llt_.solve(rhs);
    ds = apply_at(dy);
    dx.resize(nb_);
    for (std::size_t b = 0; b < nb_; ++b) {
      ds[b] = rd_[b] - ds[b];
      MatrixXd t = (rc[b] - x_[b] * ds[b]) * s_inv_[b];
      dx[b] = 0.5 * (t + t.transpose());
    }
  }

  bool step() {
    s_inv_.clear();
    for (const auto& s : s_) {
      Eigen::LLT<MatrixXd> llt(s);
      if (llt.info() != Eigen::Success) return false;
      MatrixXd inv = llt.solve(MatrixXd::Identity(s.rows(), s.cols()));
      s_inv_.push_back(0.5 * (inv + inv.transpose()));
    }
    build_schur();
    if (!factor_schur()) return false;

    const double mu = inner(x_, s_) / n_total_;

    // predictor
    BlockVec rc(nb_);
    for (std::size_t b = 0; b < nb_; ++b) rc[b] = -x_[b] * s_[b];
    BlockVec dx, ds;
    VectorXd dy;
    direction(rc, dx, dy, ds);
    const double ap = std::min(1.0, max_step(x_, dx));
    const double ad = std::min(1.0, max_step(s_, ds));
    double mu_aff = 0.0;
    for (std::size_t b = 0; b < nb_; ++b)
      mu_aff += (x_[b] + ap * dx[b]).cwiseProduct(s_[b] + ad * ds[b]).sum();
    mu_aff /= n_total_;
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    // corrector
    for (std::size_t b = 0; b < nb_; ++b) {
      rc[b] = -x_[b] * s_[b] - dx[b] * ds[b];
      rc[b].diagonal().array() += sigma * mu;
    }
    direction(rc, dx, dy, ds);
    constexpr double kGamma = 0.95;
    const double ap2 = std::min(1.0, kGamma * max_step(x_, dx));
    const double ad2 = std::min(1.0, kGamma * max_step(s_, ds));
    if (!(ap2 > 0.0) || !(ad2 > 0.0)) return false;
    for (std::size_t b = 0; b < nb_; ++b) {
      x_[b] += ap2 * dx[b];
      s_[b] += ad2 * ds[b];
      x_[b] = 0.5 * (x_[b] + x_[b].transpose());
      s_[b] = 0.5 * (s_[b] + s_[b].transpose());
    }
    y_ += ad2 * dy;
    return true;
  }

  const LmiProblem& problem_;
  SolverOptions opt_;
  int m_ = 0;
  std::size_t nb_ = 0;
  double n_total_ = 0.0;
  double b_scale_ = 1.0;
  VectorXd b_;
  BlockVec c_;
  std::vector<std::vector<VarInBlock>> in_block_;

  BlockVec x_, s_, s_inv_, rd_;
  VectorXd y_, rp_;
  MatrixXd schur_;
  Eigen::LLT<MatrixXd> llt_;
};

}  // namespace

SolverResult InteriorPointBackend::solve(const LmiProblem& problem,
                                         const SolverOptions& options) const {
  if (problem.num_blocks() == 0) throw SolverFailure("problem has no constraints");
  Solver s(problem, options);
  return s.run();
}

const Backend& default_backend() {
  static const InteriorPointBackend backend;
  return backend;
}

}  // namespace drce::sdp
