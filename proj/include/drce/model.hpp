#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace drce {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

// x_{t+1} = A x_t + B u_t + w_t,  y_t = C x_t + v_t, with stage cost
// x^T Q x + u^T R u and terminal cost x_T^T Qf x_T over horizon T.
struct LinearSystem {
  MatrixXd A, B, C, Q, Qf, R;
  int T = 1;

  Eigen::Index nx() const { return A.rows(); }
  Eigen::Index nu() const { return B.cols(); }
  Eigen::Index ny() const { return C.rows(); }
};

// Per-stage nominal moments. w_* has T entries (t = 0..T-1); v_* has T + 1
// entries (t = 0..T) because the last stage problem looks one measurement ahead.
struct NominalModel {
  std::vector<VectorXd> w_mean;
  std::vector<MatrixXd> w_cov;
  std::vector<VectorXd> v_mean;
  std::vector<MatrixXd> v_cov;
  VectorXd x0_mean;
  MatrixXd x0_cov;

  static NominalModel time_invariant(int T, const VectorXd& w_mean, const MatrixXd& w_cov,
                                     const VectorXd& v_mean, const MatrixXd& v_cov,
                                     const VectorXd& x0_mean, const MatrixXd& x0_cov);
};

struct RobustnessConfig {
  double theta_w = 0.0;
  double theta_v = 0.0;
  double theta_x0 = 0.0;
  double lambda = 1.0;
};

struct DistributionSpec {
  enum class Kind { Gaussian, UQuadratic };
  Kind kind = Kind::Gaussian;
  VectorXd mean;  // gaussian
  MatrixXd cov;   // gaussian
  double a = 0.0;  // uquadratic support [a, b], per coordinate
  double b = 1.0;
  Eigen::Index dim = 0;

  static DistributionSpec gaussian(const VectorXd& mean, const MatrixXd& cov);
  static DistributionSpec uquadratic(double a, double b, Eigen::Index dim);

  VectorXd true_mean() const;
  MatrixXd true_cov() const;
};

struct TrueDistributionSpec {
  DistributionSpec w, v, x0;
};

struct Violation {
  std::string field;
  std::string rule;

  bool operator==(const Violation&) const = default;
};

std::vector<Violation> validate(const LinearSystem& system, const NominalModel& nominal,
                                const RobustnessConfig& cfg);
std::vector<Violation> validate(const TrueDistributionSpec& dists);

std::string to_string(const std::vector<Violation>& violations);

// Row-major nested arrays.
json matrix_to_json(const MatrixXd& m);
MatrixXd matrix_from_json(const json& j);
json vector_to_json(const VectorXd& v);
VectorXd vector_from_json(const json& j);

void to_json(json& j, const LinearSystem& s);
void from_json(const json& j, LinearSystem& s);
void to_json(json& j, const NominalModel& n);
void from_json(const json& j, NominalModel& n);
void to_json(json& j, const RobustnessConfig& c);
void from_json(const json& j, RobustnessConfig& c);
void to_json(json& j, const DistributionSpec& d);
void from_json(const json& j, DistributionSpec& d);
void to_json(json& j, const TrueDistributionSpec& d);
void from_json(const json& j, TrueDistributionSpec& d);

}  // namespace drce
