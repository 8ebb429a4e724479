#include "drce/drkf.hpp"

#include <string>

namespace drce {

namespace {

void check_stage(int t, int last, const char* what) {
  if (t < 0 || t > last)
    throw std::out_of_range(std::string(what) + ": stage " + std::to_string(t) + " outside horizon");
}

}  // namespace

FilterState initial_state(const OfflineSchedule& schedule) {
  FilterState s;
  s.t = 0;
  s.x_prior_mean = schedule.nominal.x0_mean;
  return s;
}

FilterState measurement_update(const FilterState& state, const VectorXd& y,
                               const OfflineSchedule& schedule) {
  check_stage(state.t, schedule.horizon(), "measurement_update");
  const auto k = static_cast<std::size_t>(state.t);
  if (schedule.gains.size() <= k || schedule.gains[k].size() == 0)
    throw SingularInnovation("innovation covariance at stage " + std::to_string(state.t) +
                             " is not positive definite");
  const MatrixXd& C = schedule.system.C;
  FilterState out = state;
  out.x_post_mean = state.x_prior_mean +
                    schedule.gains[k] * (y - C * state.x_prior_mean - schedule.nominal.v_mean[k]);
  return out;
}

VectorXd control(const FilterState& state, const OfflineSchedule& schedule) {
  check_stage(state.t, schedule.horizon() - 1, "control");
  const auto k = static_cast<std::size_t>(state.t);
  return schedule.riccati.K[k] * state.x_post_mean + schedule.riccati.L[k];
}

VectorXd worst_case_mean(const FilterState& state, const OfflineSchedule& schedule) {
  check_stage(state.t, schedule.horizon() - 1, "worst_case_mean");
  const auto k = static_cast<std::size_t>(state.t);
  return schedule.riccati.H[k] * state.x_post_mean + schedule.riccati.G[k];
}

FilterState predict(const FilterState& state, const VectorXd& u, const OfflineSchedule& schedule) {
  const auto& sys = schedule.system;
  FilterState out;
  out.t = state.t + 1;
  out.x_prior_mean =
      sys.A * state.x_post_mean + sys.B * u + worst_case_mean(state, schedule);
  return out;
}

}  // namespace drce
