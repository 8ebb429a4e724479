#include <gtest/gtest.h>

#include "drce/sdp.hpp"

using namespace drce::sdp;

namespace {

AffineMatrix scalar_var(LmiProblem& p) { return p.add_matrix_variable(1, 1); }

MatrixXd c11(double v) { return MatrixXd::Constant(1, 1, v); }

}  // namespace

TEST(AffineMatrix, Algebra) {
  LmiProblem p;
  const AffineMatrix x = p.add_symmetric_variable(2);  // 3 unknowns
  EXPECT_EQ(p.num_variables(), 3);
  VectorXd y(3);
  y << 1, 2, 3;
  const MatrixXd X = x.evaluate(y);
  EXPECT_EQ(X, X.transpose());
  const MatrixXd L = MatrixXd::Random(2, 2);
  EXPECT_TRUE((L * x).evaluate(y).isApprox(L * X));
  EXPECT_TRUE((x * L).transpose().evaluate(y).isApprox((X * L).transpose()));
  EXPECT_NEAR(x.trace().evaluate(y)(0, 0), X.trace(), 1e-15);
  EXPECT_TRUE((x - x.scaled(2.0)).evaluate(y).isApprox(-X));
  const MatrixXd B = block2x2(x, x, x, x).evaluate(y);
  EXPECT_EQ(B.rows(), 4);
  EXPECT_EQ(B.bottomRightCorner(2, 2), X);
}

// maximize y s.t. [[1, y], [y, 1]] >= 0  ->  y = 1.
TEST(InteriorPoint, BoundaryOptimum) {
  LmiProblem p;
  const AffineMatrix y = scalar_var(p);
  const AffineMatrix one(c11(1.0));
  p.add_lmi(block2x2(one, y, y, one), "box");
  p.add_objective(c11(1.0), y);
  const auto res = default_backend().solve(p, SolverOptions{1e-8});
  EXPECT_NEAR(res.objective, 1.0, 1e-6);
  EXPECT_LE(res.gap, 1e-8);
  EXPECT_GE(res.upper_bound, res.objective - 1e-12);
}

// maximize Tr[C X] s.t. Tr X <= 1, X >= 0  ->  lambda_max(C).
TEST(InteriorPoint, MaxEigenvalue) {
  MatrixXd C(3, 3);
  C << 2, 1, 0, 1, 3, 1, 0, 1, 1;
  LmiProblem p;
  const AffineMatrix X = p.add_symmetric_variable(3);
  p.add_lmi(X, "psd");
  p.add_lmi(AffineMatrix(c11(1.0)) - X.trace(), "trace");
  p.add_objective(C, X);
  const auto res = default_backend().solve(p, SolverOptions{1e-9});
  const double lmax = Eigen::SelfAdjointEigenSolver<MatrixXd>(C).eigenvalues().maxCoeff();
  EXPECT_NEAR(res.objective, lmax, 1e-7);
  for (int k = 0; k < p.num_blocks(); ++k)
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<MatrixXd>(p.evaluate_block(k, res.y)).eigenvalues().minCoeff(),
              -1e-9);
}

TEST(InteriorPoint, UnboundedOrInfeasibleThrows) {
  LmiProblem p;
  const AffineMatrix y = scalar_var(p);
  p.add_lmi(y, "nonneg");
  p.add_objective(c11(1.0), y);
  EXPECT_THROW(default_backend().solve(p, SolverOptions{}), SolverFailure);
}
