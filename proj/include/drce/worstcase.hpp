#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "drce/model.hpp"
#include "drce/riccati.hpp"
#include "drce/sdp.hpp"

namespace drce {

class AssumptionViolated : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ScheduleFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using sdp::SolverFailure;

inline constexpr double kDefaultGapTol = 1e-3;
inline constexpr double kStrictGapTol = 1e-6;

// Worst-case initial-state prior, its posterior and the worst-case noise
// covariance at t = 0.
struct InitSolution {
  MatrixXd sigma_x_prior;
  MatrixXd sigma_x_post;
  MatrixXd sigma_v;
  MatrixXd Y;
  MatrixXd Z;
  double objective = 0.0;
  double gap = 0.0;
};

// One forward step t -> t+1: prior/posterior covariance at t+1, worst-case
// disturbance covariance at t and noise covariance at t+1.
struct StageSdpSolution {
  MatrixXd sigma_x_prior;
  MatrixXd sigma_x_post;
  MatrixXd sigma_w;
  MatrixXd sigma_v;
  MatrixXd Y;
  MatrixXd Z;
  double objective = 0.0;
  double gap = 0.0;
};

struct InitInputs {
  MatrixXd S0;
  MatrixXd x0_cov;  // nominal
  MatrixXd v_cov;   // nominal, t = 0
  MatrixXd C;
  double theta_v = 0.0;
  double theta_x0 = 0.0;
  double tol = kDefaultGapTol;
};

struct StageInputs {
  MatrixXd sigma_x_post;  // posterior covariance at t
  MatrixXd S_next;
  MatrixXd P_next;
  double lambda = 1.0;
  MatrixXd w_cov;       // nominal, t
  MatrixXd v_cov_next;  // nominal, t + 1
  MatrixXd A;
  MatrixXd C;
  double theta_v = 0.0;
  double tol = kDefaultGapTol;
};

InitSolution solve_init_sdp(const InitInputs& in,
                            const sdp::Backend& backend = sdp::default_backend());
StageSdpSolution solve_stage_sdp(const StageInputs& in,
                                 const sdp::Backend& backend = sdp::default_backend());

enum class Method { WdrCe, Wdrc, Lqg };
std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct OfflineSchedule {
  Method method = Method::WdrCe;
  LinearSystem system;
  NominalModel nominal;
  RobustnessConfig cfg;
  double solver_tol = kDefaultGapTol;
  RiccatiSolution riccati;
  InitSolution init;
  std::vector<StageSdpSolution> stages;  // t = 0..T-1
  double bound_value = 0.0;

  // Kalman gains Sigma^-_t C^T (C Sigma^-_t C^T + Sigma_v,t)^{-1}, t = 0..T.
  // Empty entries mark stages with a singular innovation covariance.
  std::vector<MatrixXd> gains;

  int horizon() const { return system.T; }
  const MatrixXd& prior_cov(int t) const;
  const MatrixXd& post_cov(int t) const;
  const MatrixXd& noise_cov(int t) const;

  void compute_gains();
};

// Solves the initial problem with weight S_0 and then every stage problem
// forward in time, chaining posterior covariances.
OfflineSchedule forward_pass(const LinearSystem& system, const RiccatiSolution& riccati,
                             const NominalModel& nominal, const RobustnessConfig& cfg,
                             double tol = kDefaultGapTol,
                             const sdp::Backend& backend = sdp::default_backend());

// Riccati + forward pass for one method. Wdrc zeroes the estimator radii;
// Lqg uses the classical recursion and the nominal Kalman filter.
OfflineSchedule synthesize(Method method, const LinearSystem& system, const NominalModel& nominal,
                           const RobustnessConfig& cfg, double tol = kDefaultGapTol);

// Expected cost of the approximate problem under the worst-case initial-state
// distribution: xhat^T P0 xhat + Tr[P0 Sigma^-_0] + Tr[S0 Sigma_0] + 2 r0^T xhat
// + q0 + sum_t z_t.
double bound_value(const RiccatiSolution& riccati, const NominalModel& nominal,
                   const InitSolution& init, const std::vector<StageSdpSolution>& stages);

struct CheckResult {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = true;
};

struct VerificationReport {
  std::string stage;  // "init" or "stage t"
  std::vector<CheckResult> checks;

  bool ok() const;
  std::vector<std::string> failures() const;
};

inline constexpr double kLmiTol = 1e-7;

VerificationReport verify_solution(const InitSolution& sol, const InitInputs& in);
VerificationReport verify_solution(const StageSdpSolution& sol, const StageInputs& in);

// Rebuilds every stage's inputs from the schedule and verifies all solutions.
// tol overrides the gap tolerance stored in the schedule.
std::vector<VerificationReport> verify_schedule(const OfflineSchedule& schedule,
                                                std::optional<double> tol = std::nullopt);

InitInputs init_inputs(const OfflineSchedule& schedule);
StageInputs stage_inputs(const OfflineSchedule& schedule, int t);

json schedule_to_json(const OfflineSchedule& s);
OfflineSchedule schedule_from_json(const json& j);
void save_schedule(const OfflineSchedule& s, const std::string& path);
OfflineSchedule load_schedule(const std::string& path);

}  // namespace drce
