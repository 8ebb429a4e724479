#include <gtest/gtest.h>

#include <cmath>

#include "drce/riccati.hpp"

using namespace drce;

namespace {

LinearSystem scalar_system(int T) {
  LinearSystem s;
  s.A = s.B = s.C = s.Q = s.Qf = s.R = MatrixXd::Identity(1, 1);
  s.T = T;
  return s;
}

NominalModel scalar_nominal(int T, double w_mean = 0.0) {
  const VectorXd z = VectorXd::Zero(1);
  const MatrixXd one = MatrixXd::Identity(1, 1);
  return NominalModel::time_invariant(T, VectorXd::Constant(1, w_mean), one, z, one, z, one);
}

LinearSystem chain_system(int n, int T) {
  LinearSystem s;
  s.A = 0.2 * MatrixXd::Identity(n, n);
  for (int i = 0; i + 1 < n; ++i) s.A(i, i + 1) = 0.2;
  s.B = s.C = s.Q = s.Qf = s.R = MatrixXd::Identity(n, n);
  s.T = T;
  return s;
}

}  // namespace

TEST(BackwardPass, ScalarHandRecursion) {
  const auto sol = backward_pass(scalar_system(1), scalar_nominal(1), 10.0);
  EXPECT_NEAR(sol.Phi(0, 0), 0.9, 1e-15);
  EXPECT_EQ(sol.P[1](0, 0), 1.0);
  EXPECT_NEAR(sol.P[0](0, 0), 1.0 + 1.0 / 1.9, 1e-12);
  EXPECT_NEAR(sol.K[0](0, 0), -1.0 / 1.9, 1e-12);
  EXPECT_NEAR(sol.S[0](0, 0), 2.0 - (1.0 + 1.0 / 1.9), 1e-12);
  EXPECT_NEAR(sol.H[0](0, 0), 1.0 / 19.0, 1e-12);
  EXPECT_NEAR(sol.G[0](0), 0.0, 1e-15);
}

TEST(BackwardPass, TerminalConditions) {
  const auto sys = chain_system(3, 4);
  const auto nom = NominalModel::time_invariant(4, VectorXd::Ones(3), MatrixXd::Identity(3, 3),
                                                VectorXd::Zero(3), MatrixXd::Identity(3, 3),
                                                VectorXd::Zero(3), MatrixXd::Identity(3, 3));
  const auto sol = backward_pass(sys, nom, 20.0);
  EXPECT_EQ(sol.P[4], sys.Qf);
  EXPECT_EQ(sol.S[4], MatrixXd::Zero(3, 3));
  EXPECT_EQ(sol.r[4], VectorXd::Zero(3));
  EXPECT_EQ(sol.q[4], 0.0);
  EXPECT_EQ(sol.horizon(), 4);
}

TEST(BackwardPass, ZeroNominalMeanGivesZeroAffineTerms) {
  const auto sol = backward_pass(chain_system(3, 5),
                                 NominalModel::time_invariant(5, VectorXd::Zero(3), MatrixXd::Identity(3, 3),
                                                              VectorXd::Zero(3), MatrixXd::Identity(3, 3),
                                                              VectorXd::Zero(3), MatrixXd::Identity(3, 3)),
                                 20.0);
  for (int t = 0; t <= 5; ++t) EXPECT_EQ(sol.r[t].norm(), 0.0);
  for (int t = 0; t < 5; ++t) EXPECT_EQ(sol.L[t].norm(), 0.0);
}

TEST(BackwardPass, RecursionResidualAndSymmetry) {
  const int n = 4, T = 6;
  const auto sys = chain_system(n, T);
  const auto nom = NominalModel::time_invariant(T, VectorXd::LinSpaced(n, 0.1, 0.4), 0.1 * MatrixXd::Identity(n, n),
                                                VectorXd::Zero(n), MatrixXd::Identity(n, n),
                                                VectorXd::Zero(n), MatrixXd::Identity(n, n));
  const double lambda = 15.0;
  const auto sol = backward_pass(sys, nom, lambda);
  const MatrixXd I = MatrixXd::Identity(n, n);
  // Independent re-evaluation with explicit inverses.
  const MatrixXd Phi = sys.B * sys.R.inverse() * sys.B.transpose() - I / lambda;
  for (int t = 0; t < T; ++t) {
    const MatrixXd& Pn = sol.P[t + 1];
    const MatrixXd M = (I + Pn * Phi).inverse();
    const MatrixXd P = sys.Q + sys.A.transpose() * M * Pn * sys.A;
    const VectorXd r = sys.A.transpose() * M * (sol.r[t + 1] + Pn * nom.w_mean[t]);
    EXPECT_LE((P - sol.P[t]).norm(), 1e-10 * P.norm());
    EXPECT_LE((r - sol.r[t]).norm(), 1e-10 * std::max(1.0, r.norm()));
    EXPECT_LE((sol.P[t] - sol.P[t].transpose()).norm(), 1e-12);
    EXPECT_LE((sol.S[t] - sol.S[t].transpose()).norm(), 1e-12);
    EXPECT_GT((lambda * I - Pn).eigenvalues().real().minCoeff(), 0.0);
  }
}

TEST(BackwardPass, InfeasibleLambda) {
  try {
    backward_pass(scalar_system(1), scalar_nominal(1), 0.5);
    FAIL() << "expected LambdaInfeasible";
  } catch (const LambdaInfeasible& e) {
    EXPECT_EQ(e.stage(), 1);
  }
}

TEST(LqgBackwardPass, ScalarGain) {
  const auto sol = lqg_backward_pass(scalar_system(1), scalar_nominal(1));
  EXPECT_NEAR(sol.K[0](0, 0), -0.5, 1e-14);
  EXPECT_TRUE(sol.lqg);
}

TEST(LqgBackwardPass, ZeroCostGivesZeroGains) {
  auto sys = scalar_system(3);
  sys.Q.setZero();
  sys.Qf.setZero();
  const auto sol = lqg_backward_pass(sys, scalar_nominal(3));
  for (const auto& K : sol.K) EXPECT_EQ(K.norm(), 0.0);
}

TEST(LqgBackwardPass, LargeLambdaLimit) {
  const auto sys = chain_system(3, 5);
  const auto nom = NominalModel::time_invariant(5, VectorXd::Constant(3, 0.2), MatrixXd::Identity(3, 3),
                                                VectorXd::Zero(3), MatrixXd::Identity(3, 3),
                                                VectorXd::Zero(3), MatrixXd::Identity(3, 3));
  const auto a = backward_pass(sys, nom, 1e9);
  const auto b = lqg_backward_pass(sys, nom);
  for (int t = 0; t < 5; ++t) {
    EXPECT_LE((a.K[t] - b.K[t]).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE((a.L[t] - b.L[t]).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(LambdaHat, ScalarSingleConstraint) {
  EXPECT_NEAR(lambda_hat(scalar_system(1), scalar_nominal(1)), 1.0, 1e-7);
}

TEST(LambdaHat, ZeroCost) {
  auto sys = scalar_system(2);
  sys.Q.setZero();
  sys.Qf.setZero();
  EXPECT_EQ(lambda_hat(sys, scalar_nominal(2)), 0.0);
}

TEST(LambdaHat, MatchesSweepOracle) {
  const auto sys = scalar_system(2);
  const auto nom = scalar_nominal(2);
  const double lh = lambda_hat(sys, nom);
  EXPECT_TRUE(lambda_feasible(sys, nom, lh * (1 + 1e-6)));
  EXPECT_FALSE(lambda_feasible(sys, nom, lh * (1 - 1e-6)));
  // Sweep oracle: scalar P_1(lambda) = 1 + 1 / (1 + 1 - 1/lambda) must stay below lambda.
  double first = 0.0;
  for (double l = 1.0; l < 3.0; l += 1e-6) {
    const double p1 = 1.0 + 1.0 / (2.0 - 1.0 / l);
    if (l > p1 && 2.0 - 1.0 / l > 0.0) {
      first = l;
      break;
    }
  }
  EXPECT_NEAR(lh, first, 1e-6 * first + 1e-6);
}

TEST(LambdaSelect, UnimodalSynthetic) {
  const auto sys = scalar_system(1);
  const auto nom = scalar_nominal(1);
  const double l = lambda_select(sys, nom, 0.0, [](double x) { return (x - 5.0) * (x - 5.0); });
  EXPECT_NEAR(l, 5.0, 1e-3 * 5.0);
}

TEST(LambdaSelect, LargerRadiusPushesTowardLambdaHat) {
  const auto sys = scalar_system(1);
  const auto nom = scalar_nominal(1);
  const auto f = [](double x) { return 1.0 / (x - 1.0) + 0.01 * x; };
  const double small = lambda_select(sys, nom, 0.1, f);
  const double large = lambda_select(sys, nom, 10.0, f);
  EXPECT_LE(large, small);
}

TEST(LambdaSelect, MatchesGridOracle) {
  const auto sys = scalar_system(1);
  const auto nom = scalar_nominal(1);
  const auto f = [](double x) { return 4.0 / (x - 1.0) + 0.5 * x; };
  const double got = lambda_select(sys, nom, 0.0, f);
  // Analytic minimizer 1 + sqrt(8); grid oracle with step (hi - lo) / 200.
  const double lo = 1.0, hi = 16.0, step = (hi - lo) / 200.0;
  double best = lo + step, best_val = f(best);
  for (double x = lo + step; x <= hi; x += step)
    if (f(x) < best_val) best_val = f(x), best = x;
  EXPECT_LE(std::abs(got - best), step);
}
