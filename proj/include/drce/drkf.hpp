#pragma once

#include <stdexcept>

#include "drce/worstcase.hpp"

namespace drce {

class SingularInnovation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Means only; every covariance lives in the schedule.
struct FilterState {
  int t = 0;
  VectorXd x_prior_mean;
  VectorXd x_post_mean;
};

// t = 0 with the nominal initial mean as prior.
FilterState initial_state(const OfflineSchedule& schedule);

FilterState measurement_update(const FilterState& state, const VectorXd& y,
                               const OfflineSchedule& schedule);

VectorXd control(const FilterState& state, const OfflineSchedule& schedule);

VectorXd worst_case_mean(const FilterState& state, const OfflineSchedule& schedule);

// Prior mean at t + 1: A xbar_t + B u + wbar*_t.
FilterState predict(const FilterState& state, const VectorXd& u, const OfflineSchedule& schedule);

}  // namespace drce
