#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace drce {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class NotPsdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense symmetric matrix. The stored value is always (M + M^T) / 2 of
// whatever it was built from.
class SymMatrix {
 public:
  SymMatrix() = default;
  SymMatrix(const MatrixXd& m);  // NOLINT(google-explicit-constructor)

  static SymMatrix identity(Eigen::Index n) { return SymMatrix(MatrixXd::Identity(n, n)); }

  const MatrixXd& matrix() const { return m_; }
  operator const MatrixXd&() const { return m_; }  // NOLINT
  Eigen::Index dim() const { return m_.rows(); }

 private:
  MatrixXd m_;
};

MatrixXd symmetrize(const MatrixXd& m);

// PSD iff lambda_min >= -1e-9 * max(1, lambda_max).
bool is_psd(const MatrixXd& m);
// PD iff lambda_min >= 1e-12 * max(1, lambda_max).
bool is_pd(const MatrixXd& m);
double min_eigenvalue(const MatrixXd& m);

// Unique PSD square root through a symmetric eigendecomposition. Small negative
// eigenvalues inside the PSD tolerance are clamped to zero.
SymMatrix psd_sqrt(const SymMatrix& m);

// Tr[(S2^{1/2} S1 S2^{1/2})^{1/2}]
double sqrt_trace(const SymMatrix& s1, const SymMatrix& s2);

// Squared Bures-Wasserstein distance Tr[S1 + S2 - 2 (S2^{1/2} S1 S2^{1/2})^{1/2}].
double bures_sq(const SymMatrix& s1, const SymMatrix& s2);

// Gelbrich distance sqrt(|mu1 - mu2|^2 + B^2(S1, S2)).
double gelbrich(const VectorXd& mu1, const SymMatrix& s1, const VectorXd& mu2,
                const SymMatrix& s2);

// Solves (A) X = B for symmetric positive definite A via Cholesky, falling back
// to a pivoted LU when the factorization fails.
MatrixXd spd_solve(const MatrixXd& a, const MatrixXd& b);

// Returns A^{-1} B via a column-pivoted QR factorization; throws
// std::runtime_error when A is numerically singular.
MatrixXd general_solve(const MatrixXd& a, const MatrixXd& b, const std::string& what);

}  // namespace drce
