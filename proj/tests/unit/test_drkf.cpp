#include <gtest/gtest.h>

#include "drce/drkf.hpp"

using namespace drce;

namespace {

MatrixXd c11(double v) { return MatrixXd::Constant(1, 1, v); }

OfflineSchedule scalar_schedule(double lambda = 10.0) {
  LinearSystem sys;
  sys.A = sys.B = sys.C = sys.Q = sys.Qf = sys.R = c11(1.0);
  sys.T = 1;
  const VectorXd z = VectorXd::Zero(1);
  const auto nom = NominalModel::time_invariant(1, z, c11(1.0), z, c11(1.0), z, c11(1.0));
  return synthesize(Method::WdrCe, sys, nom, RobustnessConfig{0.1, 0.0, 0.0, lambda}, 1e-6);
}

// Replaces the stage-0 covariances with chosen values and recomputes the gain.
void set_stage0(OfflineSchedule& s, double prior, double noise) {
  s.init.sigma_x_prior = c11(prior);
  s.init.sigma_v = c11(noise);
  s.compute_gains();
}

FilterState at(double prior_mean) {
  FilterState st;
  st.x_prior_mean = VectorXd::Constant(1, prior_mean);
  return st;
}

}  // namespace

TEST(MeasurementUpdate, ZeroInnovationKeepsPrior) {
  auto s = scalar_schedule();
  const auto st = measurement_update(at(0.7), VectorXd::Constant(1, 0.7), s);
  EXPECT_DOUBLE_EQ(st.x_post_mean(0), 0.7);
}

TEST(MeasurementUpdate, ScalarHalfGain) {
  auto s = scalar_schedule();
  set_stage0(s, 1.0, 1.0);
  const auto st = measurement_update(at(0.0), VectorXd::Constant(1, 2.0), s);
  EXPECT_NEAR(st.x_post_mean(0), 1.0, 1e-15);
}

TEST(MeasurementUpdate, VanishingGain) {
  auto s = scalar_schedule();
  set_stage0(s, 1.0, 1e12);
  const auto st = measurement_update(at(0.0), VectorXd::Constant(1, 3.0), s);
  EXPECT_LE(std::abs(st.x_post_mean(0)), 1e-10 * 3.0);
}

TEST(MeasurementUpdate, OutOfRangeStage) {
  auto s = scalar_schedule();
  FilterState st = at(0.0);
  st.t = 5;
  EXPECT_THROW(measurement_update(st, VectorXd::Zero(1), s), std::out_of_range);
}

TEST(Control, ScalarExample) {
  const auto s = scalar_schedule();
  FilterState st = at(0.0);
  st.x_post_mean = VectorXd::Constant(1, 2.0);
  EXPECT_NEAR(control(st, s)(0), -2.0 / 1.9, 1e-6);
  st.x_post_mean.setZero();
  EXPECT_EQ(control(st, s)(0), 0.0);
}

TEST(WorstCaseMean, ScalarExampleAndNominalLimit) {
  const auto s = scalar_schedule();
  FilterState st = at(0.0);
  st.x_post_mean = VectorXd::Constant(1, 1.0);
  EXPECT_NEAR(worst_case_mean(st, s)(0), 1.0 / 19.0, 1e-6);

  LinearSystem sys = s.system;
  sys.T = 3;
  const auto nom = NominalModel::time_invariant(3, VectorXd::Constant(1, 0.4), c11(1.0), VectorXd::Zero(1),
                                                c11(1.0), VectorXd::Zero(1), c11(1.0));
  const auto big = synthesize(Method::Wdrc, sys, nom, RobustnessConfig{0.0, 0.0, 0.0, 1e9});
  EXPECT_NEAR(worst_case_mean(st, big)(0), 0.4, 1e-5);
}

TEST(Predict, ChainedScalarExample) {
  const auto s = scalar_schedule();
  FilterState st = at(0.0);
  st.x_post_mean = VectorXd::Constant(1, 1.0);
  const VectorXd u = control(st, s);
  const auto next = predict(st, u, s);
  EXPECT_EQ(next.t, 1);
  EXPECT_NEAR(next.x_prior_mean(0), 1.0 - 1.0 / 1.9 + 1.0 / 19.0, 1e-6);
}

TEST(Predict, IdentityNoInputNoDisturbance) {
  auto s = scalar_schedule(1e9);
  s.system.B.setZero();
  s.riccati.H[0].setZero();
  s.riccati.G[0].setZero();
  FilterState st = at(0.0);
  st.x_post_mean = VectorXd::Constant(1, 0.3);
  EXPECT_DOUBLE_EQ(predict(st, VectorXd::Constant(1, 5.0), s).x_prior_mean(0), 0.3);
}
