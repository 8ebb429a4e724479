#pragma once

// Small dense semidefinite programs in linear-matrix-inequality form:
//
//   maximize    c^T y + c0
//   subject to  F_k(y) = F_k0 + sum_i y_i F_ki  >= 0   for every block k
//
// Problems are assembled from AffineMatrix expressions, which keep the
// construction code close to the block-matrix notation of the models that
// use them. The solver is a primal-dual path-following method (HKM search
// direction, Mehrotra predictor-corrector) that works on the block-diagonal
// dual pair directly.

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace drce::sdp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// constant + sum_k y_k * term_k, with dense per-variable coefficients.
class AffineMatrix {
 public:
  AffineMatrix() = default;
  AffineMatrix(Index rows, Index cols);
  explicit AffineMatrix(const MatrixXd& constant);

  Index rows() const { return constant_.rows(); }
  Index cols() const { return constant_.cols(); }
  const MatrixXd& constant() const { return constant_; }
  const std::map<int, MatrixXd>& terms() const { return terms_; }

  void add_term(int var, const MatrixXd& coeff);

  AffineMatrix operator+(const AffineMatrix& o) const;
  AffineMatrix operator-(const AffineMatrix& o) const;
  AffineMatrix operator*(const MatrixXd& right) const;
  AffineMatrix scaled(double s) const;
  AffineMatrix transpose() const;
  AffineMatrix trace() const;  // 1x1

  MatrixXd evaluate(const VectorXd& y) const;

  friend AffineMatrix operator*(const MatrixXd& left, const AffineMatrix& m);

 private:
  MatrixXd constant_;
  std::map<int, MatrixXd> terms_;
};

// [[tl, tr], [bl, br]]
AffineMatrix block2x2(const AffineMatrix& tl, const AffineMatrix& tr, const AffineMatrix& bl,
                      const AffineMatrix& br);

class LmiProblem {
 public:
  // Symmetric n x n matrix variable, n(n+1)/2 scalar unknowns.
  AffineMatrix add_symmetric_variable(Index n);
  // Unstructured rows x cols matrix variable.
  AffineMatrix add_matrix_variable(Index rows, Index cols);

  // expr >= 0 (expr is symmetrized). Returns the block index.
  int add_lmi(const AffineMatrix& expr, std::string name);

  // objective += Tr[weight^T expr]
  void add_objective(const MatrixXd& weight, const AffineMatrix& expr);

  int num_variables() const { return num_vars_; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }

  struct Block {
    std::string name;
    MatrixXd constant;
    std::map<int, MatrixXd> terms;
  };
  const std::vector<Block>& blocks() const { return blocks_; }
  VectorXd objective_coefficients() const;
  double objective_constant() const { return objective_constant_; }

  double objective_value(const VectorXd& y) const;
  MatrixXd evaluate_block(int k, const VectorXd& y) const;

 private:
  int num_vars_ = 0;
  std::vector<Block> blocks_;
  std::map<int, double> objective_;
  double objective_constant_ = 0.0;
};

struct SolverOptions {
  // Stop once (upper bound - objective) / max(1, |objective|) <= gap_tol.
  double gap_tol = 1e-3;
  double feasibility_tol = 1e-9;
  int max_iterations = 120;
  bool verbose = false;
};

struct SolverResult {
  VectorXd y;
  double objective = 0.0;    // c^T y + c0 at the returned point
  double upper_bound = 0.0;  // dual objective
  double gap = 0.0;          // relative gap as in SolverOptions::gap_tol
  int iterations = 0;
  std::vector<MatrixXd> multipliers;  // dual matrices, one per block
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual SolverResult solve(const LmiProblem& problem, const SolverOptions& options) const = 0;
};

class InteriorPointBackend final : public Backend {
 public:
  SolverResult solve(const LmiProblem& problem, const SolverOptions& options) const override;
};

const Backend& default_backend();

}  // namespace drce::sdp
