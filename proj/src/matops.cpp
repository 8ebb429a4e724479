#include "drce/matops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace drce {

SymMatrix::SymMatrix(const MatrixXd& m) : m_(symmetrize(m)) {}

MatrixXd symmetrize(const MatrixXd& m) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << "expected a square matrix, got " << m.rows() << "x" << m.cols();
    throw DimensionMismatchError(os.str());
  }
  return 0.5 * (m + m.transpose());
}

namespace {

Eigen::VectorXd sym_eigenvalues(const MatrixXd& m) {
  if (m.size() == 0) return {};
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace

double min_eigenvalue(const MatrixXd& m) {
  const auto ev = sym_eigenvalues(m);
  return ev.size() == 0 ? 0.0 : ev.minCoeff();
}

bool is_psd(const MatrixXd& m) {
  const auto ev = sym_eigenvalues(m);
  if (ev.size() == 0) return true;
  if (!ev.allFinite()) return false;
  return ev.minCoeff() >= -1e-9 * std::max(1.0, ev.maxCoeff());
}

bool is_pd(const MatrixXd& m) {
  const auto ev = sym_eigenvalues(m);
  if (ev.size() == 0) return true;
  if (!ev.allFinite()) return false;
  return ev.minCoeff() >= 1e-12 * std::max(1.0, ev.maxCoeff());
}

SymMatrix psd_sqrt(const SymMatrix& m) {
  const auto n = m.dim();
  if (n == 0) return m;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m.matrix());
  Eigen::VectorXd ev = es.eigenvalues();
  const double tol = 1e-9 * std::max(1.0, ev.maxCoeff());
  if (ev.minCoeff() < -tol) {
    std::ostringstream os;
    os << "matrix is not PSD (min eigenvalue " << ev.minCoeff() << ")";
    throw NotPsdError(os.str());
  }
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return SymMatrix(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

double sqrt_trace(const SymMatrix& s1, const SymMatrix& s2) {
  if (s1.dim() != s2.dim()) throw DimensionMismatchError("sqrt_trace: dimension mismatch");
  const MatrixXd r2 = psd_sqrt(s2);
  if (!is_psd(s1)) throw NotPsdError("sqrt_trace: first argument is not PSD");
  const auto ev = sym_eigenvalues(r2 * s1.matrix() * r2);
  return ev.cwiseMax(0.0).cwiseSqrt().sum();
}

double bures_sq(const SymMatrix& s1, const SymMatrix& s2) {
  const double b = s1.matrix().trace() + s2.matrix().trace() - 2.0 * sqrt_trace(s1, s2);
  return std::max(0.0, b);
}

double gelbrich(const VectorXd& mu1, const SymMatrix& s1, const VectorXd& mu2,
                const SymMatrix& s2) {
  if (mu1.size() != mu2.size() || mu1.size() != s1.dim())
    throw DimensionMismatchError("gelbrich: dimension mismatch");
  return std::sqrt((mu1 - mu2).squaredNorm() + bures_sq(s1, s2));
}

MatrixXd spd_solve(const MatrixXd& a, const MatrixXd& b) {
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt.solve(b);
  return a.partialPivLu().solve(b);
}

MatrixXd general_solve(const MatrixXd& a, const MatrixXd& b, const std::string& what) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(a);
  qr.setThreshold(1e-13);
  if (qr.rank() < a.cols()) throw std::runtime_error(what + ": matrix is numerically singular");
  return qr.solve(b);
}

}  // namespace drce
