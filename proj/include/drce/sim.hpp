#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "drce/drkf.hpp"
#include "drce/model.hpp"
#include "drce/worstcase.hpp"

namespace drce {

class EmptySampleSet : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class CaseGap : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

using Rng = std::mt19937_64;

// Inverse CDF of the U-Quadratic law on [a, b].
double sample_uquadratic(double a, double b, double u);

VectorXd draw(const DistributionSpec& d, Rng& rng);

inline constexpr double kNoiseJitter = 1e-6;

struct Moments {
  VectorXd mean;
  MatrixXd cov;
};

// Moments of the empirical measure (1/N normalization); jitter * I is added to
// the covariance, pass kNoiseJitter for measurement-noise nominals.
Moments empirical_moments(const std::vector<VectorXd>& samples, double jitter = 0.0);

// Independent generator for one (seed, stream) pair.
Rng make_rng(std::uint64_t seed, std::uint64_t stream);

inline std::uint64_t run_seed(std::uint64_t base_seed, std::uint64_t run_id) {
  return base_seed ^ run_id;
}

// One draw of every random quantity of a closed-loop run.
struct Realization {
  VectorXd x0;
  std::vector<VectorXd> w;  // t = 0..T-1
  std::vector<VectorXd> v;  // t = 0..T-1
};

Realization sample_realization(const TrueDistributionSpec& dists, int T, std::uint64_t seed);

struct RunResult {
  int run_id = 0;
  std::uint64_t seed = 0;
  Method method = Method::WdrCe;
  double total_cost = 0.0;
  double wall_time_ms = 0.0;
  // Filled when logging is requested.
  std::vector<VectorXd> states, prior_means, post_means, controls;
};

RunResult run_closed_loop(const OfflineSchedule& schedule, const Realization& realization,
                          bool keep_log = false);
RunResult run_closed_loop(const OfflineSchedule& schedule, const TrueDistributionSpec& dists,
                          std::uint64_t seed, bool keep_log = false);

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  double std_error = 0.0;
  double min = 0.0, q05 = 0.0, q25 = 0.0, median = 0.0, q75 = 0.0, q95 = 0.0, max = 0.0;
};

Summary summarize(std::vector<double> values);
json to_json(const Summary& s);

// Worker count: DRCE_THREADS if set, else the hardware concurrency.
unsigned worker_count();

// Runs every schedule on the same realizations (run r uses seed base_seed ^ r),
// so costs of different schedules are paired. Result [i][r] belongs to
// schedules[i]. Deterministic for any thread count.
std::vector<std::vector<RunResult>> monte_carlo(const std::vector<const OfflineSchedule*>& schedules,
                                                const TrueDistributionSpec& dists, int n_runs,
                                                std::uint64_t base_seed);

// bound_value + lambda theta_w^2 T
double guaranteed_bound(const OfflineSchedule& schedule, double theta_w);

struct RadiusSource {
  int n = 1;  // dimension
  double c1 = 1.0;
  double c2 = 1.0;
  double c = 3.0;
};

struct RadiusSelectionParams {
  double beta = 0.05;
  int N = 1;
  int T = 1;
  std::vector<RadiusSource> sources;
};

double radius_exponent_a(double beta, int N, int T, const RadiusSource& src);
double radius_from_a(double a, int n, double c);
std::vector<double> select_radius(const RadiusSelectionParams& params);

}  // namespace drce
