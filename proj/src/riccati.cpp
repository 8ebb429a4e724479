#include "drce/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "drce/matops.hpp"

namespace drce {

LambdaInfeasible::LambdaInfeasible(int stage, double lambda, double p_max)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "lambda = " << lambda << " violates lambda I > P_" << stage
           << " (largest eigenvalue of P_" << stage << " is " << p_max << ")";
        return os.str();
      }()),
      stage_(stage) {}

namespace {

RiccatiSolution run_recursion(const LinearSystem& sys, const NominalModel& nom, double lambda,
                              bool lqg) {
  const auto nx = sys.nx();
  const int T = sys.T;
  const MatrixXd I = MatrixXd::Identity(nx, nx);
  const MatrixXd R_inv_Bt = spd_solve(sys.R, sys.B.transpose());

  RiccatiSolution sol;
  sol.lqg = lqg;
  sol.lambda = lqg ? 0.0 : lambda;
  sol.Phi = sys.B * R_inv_Bt;
  if (!lqg) sol.Phi -= I / lambda;

  const auto n = static_cast<std::size_t>(T) + 1;
  sol.P.resize(n);
  sol.S.resize(n);
  sol.r.resize(n);
  sol.q.resize(n);
  sol.K.resize(n - 1);
  sol.L.resize(n - 1);
  sol.H.resize(n - 1);
  sol.G.resize(n - 1);

  sol.P[n - 1] = symmetrize(sys.Qf);
  sol.S[n - 1] = MatrixXd::Zero(nx, nx);
  sol.r[n - 1] = VectorXd::Zero(nx);
  sol.q[n - 1] = 0.0;

  for (int t = T - 1; t >= 0; --t) {
    const auto k = static_cast<std::size_t>(t);
    const MatrixXd& Pn = sol.P[k + 1];
    const VectorXd& rn = sol.r[k + 1];
    const VectorXd& w_hat = nom.w_mean[k];

    MatrixXd lam_minus_p;
    if (!lqg) {
      lam_minus_p = lambda * I - Pn;
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(Pn, Eigen::EigenvaluesOnly);
      const double p_max = es.eigenvalues().maxCoeff();
      if (!(lambda > p_max)) throw LambdaInfeasible(t + 1, lambda, p_max);
    }

    // (I + P Phi)^{-1} applied to [P A, P w_hat + r, r]
    const MatrixXd M = I + Pn * sol.Phi;
    MatrixXd rhs(nx, 2 * nx + 2);
    rhs << Pn * sys.A, Pn, Pn * w_hat + rn, rn;
    MatrixXd sol_rhs;
    try {
      sol_rhs = general_solve(M, rhs, "I + P_{t+1} Phi");
    } catch (const std::runtime_error& e) {
      throw SingularSystem(e.what());
    }
    const MatrixXd Minv_PA = sol_rhs.leftCols(nx);
    const MatrixXd Minv_P = sol_rhs.middleCols(nx, nx);
    const VectorXd Minv_Pw_r = sol_rhs.col(2 * nx);
    const VectorXd Minv_r = sol_rhs.col(2 * nx + 1);

    sol.P[k] = symmetrize(sys.Q + sys.A.transpose() * Minv_PA);
    sol.S[k] = symmetrize(sys.Q + sys.A.transpose() * Pn * sys.A - sol.P[k]);
    sol.r[k] = sys.A.transpose() * Minv_Pw_r;
    sol.q[k] = sol.q[k + 1] + (2.0 * w_hat - sol.Phi * rn).dot(Minv_r) +
               w_hat.dot(Minv_P * w_hat);
    if (!lqg) sol.q[k] -= lambda * nom.w_cov[k].trace();

    sol.K[k] = -R_inv_Bt * Minv_PA;
    sol.L[k] = -R_inv_Bt * Minv_Pw_r;

    if (lqg) {
      sol.H[k] = MatrixXd::Zero(nx, nx);
      sol.G[k] = w_hat;
    } else {
      MatrixXd rhs2(nx, nx + 1);
      rhs2 << Pn * (sys.A + sys.B * sol.K[k]), Pn * sys.B * sol.L[k] + rn + lambda * w_hat;
      const MatrixXd hg = spd_solve(lam_minus_p, rhs2);
      sol.H[k] = hg.leftCols(nx);
      sol.G[k] = hg.col(nx);
    }
  }
  return sol;
}

}  // namespace

RiccatiSolution backward_pass(const LinearSystem& system, const NominalModel& nominal,
                              double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("backward_pass: lambda must be positive");
  return run_recursion(system, nominal, lambda, false);
}

RiccatiSolution lqg_backward_pass(const LinearSystem& system, const NominalModel& nominal) {
  return run_recursion(system, nominal, 0.0, true);
}

bool lambda_feasible(const LinearSystem& system, const NominalModel& nominal, double lambda) {
  if (!(lambda > 0.0)) return false;
  try {
    backward_pass(system, nominal, lambda);
    return true;
  } catch (const LambdaInfeasible&) {
    return false;
  } catch (const SingularSystem&) {
    return false;
  }
}

double lambda_hat(const LinearSystem& system, const NominalModel& nominal) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(system.Qf), Eigen::EigenvaluesOnly);
  double lo = std::max(0.0, es.eigenvalues().maxCoeff());
  double hi = lo > 0.0 ? 2.0 * lo : 1.0;
  while (!lambda_feasible(system, nominal, hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw NoFeasibleLambda("no feasible lambda below 1e12");
  }
  while (hi - lo > 1e-8 * hi) {
    if (hi < 1e-12) return 0.0;
    const double mid = 0.5 * (lo + hi);
    if (lambda_feasible(system, nominal, mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

double lambda_select(const LinearSystem& system, const NominalModel& nominal, double theta_w,
                     const WorstCaseValueFn& worst_case_value) {
  if (!(theta_w >= 0.0)) throw std::invalid_argument("lambda_select: theta_w must be >= 0");
  const double penalty = theta_w * theta_w * system.T;
  auto objective = [&](double lam) { return worst_case_value(lam) + lam * penalty; };

  const double hat = lambda_hat(system, nominal);
  const double lo = hat > 0.0 ? hat * (1.0 + 1e-4) : 1e-4;

  // Upper end: double until the objective stops decreasing.
  double hi = 2.0 * lo;
  double f_prev = objective(lo);
  double f_hi = objective(hi);
  for (int i = 0; i < 40 && f_hi < f_prev; ++i) {
    f_prev = f_hi;
    hi *= 2.0;
    f_hi = objective(hi);
  }

  constexpr int kGrid = 50;
  std::vector<double> grid(kGrid);
  int best = 0;
  double f_best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGrid; ++i) {
    grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (kGrid - 1);
    const double f = objective(grid[static_cast<std::size_t>(i)]);
    if (f < f_best) {
      f_best = f;
      best = i;
    }
  }

  double a = grid[static_cast<std::size_t>(std::max(best - 1, 0))];
  double b = grid[static_cast<std::size_t>(std::min(best + 1, kGrid - 1))];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  while (b - a > 1e-4 * std::max(1e-12, 0.5 * (a + b))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  const double x = 0.5 * (a + b);
  const double fx = objective(x);
  return fx <= f_best ? x : grid[static_cast<std::size_t>(best)];
}

}  // namespace drce
