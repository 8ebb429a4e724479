#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "drce/model.hpp"

namespace drce {

class LambdaInfeasible : public std::runtime_error {
 public:
  LambdaInfeasible(int stage, double lambda, double p_max);
  int stage() const { return stage_; }

 private:
  int stage_;
};

class SingularSystem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoFeasibleLambda : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Backward-recursion coefficients of the penalized minimax LQ problem.
//   P, S, r, q : t = 0..T     K, L, H, G : t = 0..T-1
// The controller is u_t = K_t xbar_t + L_t and the adversary's mean is
// wbar_t = H_t xbar_t + G_t.
struct RiccatiSolution {
  std::vector<MatrixXd> P, S;
  std::vector<VectorXd> r;
  std::vector<double> q;
  std::vector<MatrixXd> K;
  std::vector<VectorXd> L;
  std::vector<MatrixXd> H;
  std::vector<VectorXd> G;
  MatrixXd Phi;
  double lambda = 0.0;
  // Classical LQG recursion (no adversary): H = 0, G = nominal mean.
  bool lqg = false;

  int horizon() const { return static_cast<int>(K.size()); }
};

// Requires lambda I > P_t for t = 1..T; throws LambdaInfeasible otherwise.
RiccatiSolution backward_pass(const LinearSystem& system, const NominalModel& nominal,
                              double lambda);

RiccatiSolution lqg_backward_pass(const LinearSystem& system, const NominalModel& nominal);

// inf{lambda : lambda I > P_t(lambda), t = 1..T} by doubling + bisection.
double lambda_hat(const LinearSystem& system, const NominalModel& nominal);

bool lambda_feasible(const LinearSystem& system, const NominalModel& nominal, double lambda);

// Minimizes worst_case_value(lambda) + lambda * theta_w^2 * T over
// (lambda_hat (1 + 1e-4), lambda_hi]: a 50-point grid scan followed by a
// golden-section refinement around the best grid point.
using WorstCaseValueFn = std::function<double(double lambda)>;
double lambda_select(const LinearSystem& system, const NominalModel& nominal, double theta_w,
                     const WorstCaseValueFn& worst_case_value);

}  // namespace drce
