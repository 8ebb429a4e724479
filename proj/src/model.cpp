#include "drce/model.hpp"

#include <sstream>

#include "drce/matops.hpp"

namespace drce {

NominalModel NominalModel::time_invariant(int T, const VectorXd& w_mean, const MatrixXd& w_cov,
                                          const VectorXd& v_mean, const MatrixXd& v_cov,
                                          const VectorXd& x0_mean, const MatrixXd& x0_cov) {
  NominalModel n;
  n.w_mean.assign(static_cast<std::size_t>(T), w_mean);
  n.w_cov.assign(static_cast<std::size_t>(T), w_cov);
  n.v_mean.assign(static_cast<std::size_t>(T) + 1, v_mean);
  n.v_cov.assign(static_cast<std::size_t>(T) + 1, v_cov);
  n.x0_mean = x0_mean;
  n.x0_cov = x0_cov;
  return n;
}

DistributionSpec DistributionSpec::gaussian(const VectorXd& mean, const MatrixXd& cov) {
  DistributionSpec d;
  d.kind = Kind::Gaussian;
  d.mean = mean;
  d.cov = cov;
  d.dim = mean.size();
  return d;
}

DistributionSpec DistributionSpec::uquadratic(double a, double b, Eigen::Index dim) {
  DistributionSpec d;
  d.kind = Kind::UQuadratic;
  d.a = a;
  d.b = b;
  d.dim = dim;
  return d;
}

VectorXd DistributionSpec::true_mean() const {
  if (kind == Kind::Gaussian) return mean;
  return VectorXd::Constant(dim, 0.5 * (a + b));
}

MatrixXd DistributionSpec::true_cov() const {
  if (kind == Kind::Gaussian) return cov;
  return MatrixXd::Identity(dim, dim) * (3.0 * (b - a) * (b - a) / 20.0);
}

namespace {

class Checker {
 public:
  explicit Checker(std::vector<Violation>& out) : out_(out) {}

  bool shape(const std::string& field, const MatrixXd& m, Eigen::Index r, Eigen::Index c) {
    if (m.rows() == r && m.cols() == c) return true;
    std::ostringstream os;
    os << "expected " << r << "x" << c << ", got " << m.rows() << "x" << m.cols();
    out_.push_back({field, os.str()});
    return false;
  }

  bool length(const std::string& field, const VectorXd& v, Eigen::Index n) {
    if (v.size() == n) return true;
    std::ostringstream os;
    os << "expected length " << n << ", got " << v.size();
    out_.push_back({field, os.str()});
    return false;
  }

  void finite(const std::string& field, const MatrixXd& m) {
    if (!m.allFinite()) out_.push_back({field, "not finite"});
  }

  void symmetric(const std::string& field, const MatrixXd& m) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
      out_.push_back({field, "not symmetric"});
  }

  void psd(const std::string& field, const MatrixXd& m) {
    symmetric(field, m);
    if (!is_psd(m)) out_.push_back({field, "not PSD"});
  }

  void pd(const std::string& field, const MatrixXd& m) {
    symmetric(field, m);
    if (!is_pd(m)) out_.push_back({field, "not PD"});
  }

  void add(std::string field, std::string rule) { out_.push_back({std::move(field), std::move(rule)}); }

 private:
  std::vector<Violation>& out_;
};

std::string indexed(const std::string& name, std::size_t t) {
  return name + "[" + std::to_string(t) + "]";
}

}  // namespace

std::vector<Violation> validate(const LinearSystem& s, const NominalModel& n,
                                const RobustnessConfig& cfg) {
  std::vector<Violation> out;
  Checker ck(out);
  const auto nx = s.A.rows(), nu = s.B.cols(), ny = s.C.rows();

  if (s.T < 1) ck.add("T", "must be >= 1");
  ck.shape("A", s.A, nx, nx);
  ck.shape("B", s.B, nx, nu);
  ck.shape("C", s.C, ny, nx);
  ck.finite("A", s.A);
  ck.finite("B", s.B);
  ck.finite("C", s.C);
  if (ck.shape("Q", s.Q, nx, nx)) ck.psd("Q", s.Q);
  if (ck.shape("Qf", s.Qf, nx, nx)) ck.psd("Qf", s.Qf);
  if (ck.shape("R", s.R, nu, nu)) ck.pd("R", s.R);

  const auto T = static_cast<std::size_t>(std::max(s.T, 0));
  if (n.w_mean.size() != T || n.w_cov.size() != T)
    ck.add("w_mean/w_cov", "expected " + std::to_string(T) + " stages");
  if (n.v_mean.size() != T + 1 || n.v_cov.size() != T + 1)
    ck.add("v_mean/v_cov", "expected " + std::to_string(T + 1) + " stages");
  for (std::size_t t = 0; t < n.w_mean.size(); ++t) ck.length(indexed("w_mean", t), n.w_mean[t], nx);
  for (std::size_t t = 0; t < n.w_cov.size(); ++t)
    if (ck.shape(indexed("w_cov", t), n.w_cov[t], nx, nx)) ck.psd(indexed("w_cov", t), n.w_cov[t]);
  for (std::size_t t = 0; t < n.v_mean.size(); ++t) ck.length(indexed("v_mean", t), n.v_mean[t], ny);
  for (std::size_t t = 0; t < n.v_cov.size(); ++t)
    if (ck.shape(indexed("v_cov", t), n.v_cov[t], ny, ny)) ck.pd(indexed("v_cov", t), n.v_cov[t]);
  ck.length("x0_mean", n.x0_mean, nx);
  if (ck.shape("x0_cov", n.x0_cov, nx, nx)) ck.psd("x0_cov", n.x0_cov);

  if (!(cfg.theta_w >= 0.0)) ck.add("theta_w", "must be >= 0");
  if (!(cfg.theta_v >= 0.0)) ck.add("theta_v", "must be >= 0");
  if (!(cfg.theta_x0 >= 0.0)) ck.add("theta_x0", "must be >= 0");
  if (!(cfg.lambda > 0.0)) ck.add("lambda", "must be > 0");
  return out;
}

std::vector<Violation> validate(const TrueDistributionSpec& d) {
  std::vector<Violation> out;
  Checker ck(out);
  auto one = [&](const std::string& name, const DistributionSpec& s) {
    if (s.kind == DistributionSpec::Kind::UQuadratic) {
      if (!(s.a < s.b)) ck.add(name, "uquadratic requires a < b");
    } else {
      if (ck.shape(name + ".cov", s.cov, s.mean.size(), s.mean.size())) ck.psd(name + ".cov", s.cov);
    }
  };
  one("w", d.w);
  one("v", d.v);
  one("x0", d.x0);
  return out;
}

std::string to_string(const std::vector<Violation>& violations) {
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << violations[i].field << ": " << violations[i].rule;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// JSON

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("matrix must be an array of rows");
  const auto r = static_cast<Eigen::Index>(j.size());
  if (r == 0) return MatrixXd(0, 0);
  const auto c = static_cast<Eigen::Index>(j.at(0).size());
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c)
      throw std::invalid_argument("matrix rows must be arrays of equal length");
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

json vector_to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("vector must be an array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

namespace {

template <typename F>
json list_to_json(const auto& items, F f) {
  json a = json::array();
  for (const auto& x : items) a.push_back(f(x));
  return a;
}

}  // namespace

void to_json(json& j, const LinearSystem& s) {
  j = json{{"A", matrix_to_json(s.A)},   {"B", matrix_to_json(s.B)}, {"C", matrix_to_json(s.C)},
           {"Q", matrix_to_json(s.Q)},   {"Qf", matrix_to_json(s.Qf)}, {"R", matrix_to_json(s.R)},
           {"T", s.T}};
}

void from_json(const json& j, LinearSystem& s) {
  s.A = matrix_from_json(j.at("A"));
  s.B = matrix_from_json(j.at("B"));
  s.C = matrix_from_json(j.at("C"));
  s.Q = matrix_from_json(j.at("Q"));
  s.Qf = matrix_from_json(j.at("Qf"));
  s.R = matrix_from_json(j.at("R"));
  s.T = j.at("T").get<int>();
}

void to_json(json& j, const NominalModel& n) {
  j = json{{"w_mean", list_to_json(n.w_mean, vector_to_json)},
           {"w_cov", list_to_json(n.w_cov, matrix_to_json)},
           {"v_mean", list_to_json(n.v_mean, vector_to_json)},
           {"v_cov", list_to_json(n.v_cov, matrix_to_json)},
           {"x0_mean", vector_to_json(n.x0_mean)},
           {"x0_cov", matrix_to_json(n.x0_cov)}};
}

void from_json(const json& j, NominalModel& n) {
  n = NominalModel{};
  for (const auto& x : j.at("w_mean")) n.w_mean.push_back(vector_from_json(x));
  for (const auto& x : j.at("w_cov")) n.w_cov.push_back(matrix_from_json(x));
  for (const auto& x : j.at("v_mean")) n.v_mean.push_back(vector_from_json(x));
  for (const auto& x : j.at("v_cov")) n.v_cov.push_back(matrix_from_json(x));
  n.x0_mean = vector_from_json(j.at("x0_mean"));
  n.x0_cov = matrix_from_json(j.at("x0_cov"));
}

void to_json(json& j, const RobustnessConfig& c) {
  j = json{{"theta_w", c.theta_w}, {"theta_v", c.theta_v}, {"theta_x0", c.theta_x0},
           {"lambda", c.lambda}};
}

void from_json(const json& j, RobustnessConfig& c) {
  c.theta_w = j.at("theta_w").get<double>();
  c.theta_v = j.at("theta_v").get<double>();
  c.theta_x0 = j.at("theta_x0").get<double>();
  c.lambda = j.at("lambda").get<double>();
}

void to_json(json& j, const DistributionSpec& d) {
  if (d.kind == DistributionSpec::Kind::Gaussian)
    j = json{{"kind", "gaussian"}, {"mean", vector_to_json(d.mean)}, {"cov", matrix_to_json(d.cov)}};
  else
    j = json{{"kind", "uquadratic"}, {"a", d.a}, {"b", d.b}, {"dim", d.dim}};
}

void from_json(const json& j, DistributionSpec& d) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "gaussian") {
    d = DistributionSpec::gaussian(vector_from_json(j.at("mean")), matrix_from_json(j.at("cov")));
  } else if (kind == "uquadratic") {
    d = DistributionSpec::uquadratic(j.at("a").get<double>(), j.at("b").get<double>(),
                                     j.at("dim").get<Eigen::Index>());
  } else {
    throw std::invalid_argument("unknown distribution kind '" + kind + "'");
  }
}

void to_json(json& j, const TrueDistributionSpec& d) { j = json{{"w", d.w}, {"v", d.v}, {"x0", d.x0}}; }

void from_json(const json& j, TrueDistributionSpec& d) {
  d.w = j.at("w").get<DistributionSpec>();
  d.v = j.at("v").get<DistributionSpec>();
  d.x0 = j.at("x0").get<DistributionSpec>();
}

}  // namespace drce
