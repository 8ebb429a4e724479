#include "drce/worstcase.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "drce/matops.hpp"

namespace drce {

namespace {

using sdp::AffineMatrix;
using sdp::LmiProblem;

MatrixXd posterior_cov(const MatrixXd& prior, const MatrixXd& noise, const MatrixXd& C) {
  const MatrixXd innov = symmetrize(C * prior * C.transpose() + noise);
  const MatrixXd cp = C * prior;
  return symmetrize(prior - cp.transpose() * spd_solve(innov, cp));
}

MatrixXd floor_pd(const MatrixXd& m) {
  const MatrixXd s = symmetrize(m);
  const double lmin = min_eigenvalue(s);
  const double shift = std::max(0.0, 1e-8 - lmin);
  return s + shift * MatrixXd::Identity(s.rows(), s.cols());
}

// theta^2 - Tr[Sigma + Sigma_hat - 2 X] >= 0 as a 1x1 block.
AffineMatrix gelbrich_trace_slack(const AffineMatrix& sigma, const MatrixXd& sigma_hat,
                                  const AffineMatrix& cross, double theta) {
  const AffineMatrix t = (sigma - cross.scaled(2.0)).trace();
  return AffineMatrix(MatrixXd::Constant(1, 1, theta * theta - sigma_hat.trace())) - t;
}

void require_psd(const MatrixXd& m, const char* what) {
  if (!is_psd(m)) throw NotPsdError(std::string(what) + " is not PSD");
}

// Stage objective with Y at its optimum for the given Sigma_w.
double stage_value(const StageInputs& in, const MatrixXd& sw, const MatrixXd& sv) {
  const auto n = in.A.rows();
  const MatrixXd prior = symmetrize(in.A * in.sigma_x_post * in.A.transpose() + sw);
  return (in.S_next * posterior_cov(prior, sv, in.C)).trace() +
         ((in.P_next - in.lambda * MatrixXd::Identity(n, n)) * sw).trace() +
         2.0 * in.lambda * sqrt_trace(sw, in.w_cov);
}

// Refines Sigma_w with Sigma_v held fixed. Stationarity in Sigma_w reads
//   lambda Shat^{1/2} (Shat^{1/2} Sw Shat^{1/2})^{-1/2} Shat^{1/2} = M(Sw),
//   M(Sw) = lambda I - P - (I - K C)^T S (I - K C),
// and for fixed M its solution is Sw = lambda^2 M^{-1} Shat M^{-1}. The
// iteration contracts quickly when lambda dominates P and S; it is abandoned
// if M loses definiteness or the iterates do not settle.
std::optional<MatrixXd> refine_sigma_w(const StageInputs& in, MatrixXd sw, const MatrixXd& sv) {
  const auto n = in.A.rows();
  const MatrixXd I = MatrixXd::Identity(n, n);
  const MatrixXd base = in.A * in.sigma_x_post * in.A.transpose();
  for (int it = 0; it < 100; ++it) {
    const MatrixXd prior = symmetrize(base + sw);
    const MatrixXd innov = symmetrize(in.C * prior * in.C.transpose() + sv);
    const MatrixXd gain = spd_solve(innov, in.C * prior).transpose();
    const MatrixXd J = I - gain * in.C;
    const MatrixXd M = symmetrize(in.lambda * I - in.P_next - J.transpose() * in.S_next * J);
    Eigen::LLT<MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const MatrixXd Minv_shat = llt.solve(in.w_cov);
    const MatrixXd next = symmetrize(in.lambda * in.lambda * llt.solve(Minv_shat.transpose()));
    const double step = (next - sw).norm();
    sw = next;
    if (!sw.allFinite()) return std::nullopt;
    if (step <= 1e-15 * std::max(1.0, sw.norm())) return sw;
  }
  return std::nullopt;
}

// Y attaining Tr Y = Tr[(Shat^{1/2} Sw Shat^{1/2})^{1/2}] with the coupling
// block singular: Y = Shat^{1/2} R Shat^{-1/2}, R = (Shat^{1/2} Sw Shat^{1/2})^{1/2}.
MatrixXd optimal_coupling(const MatrixXd& shat, const MatrixXd& sw) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(shat));
  const VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const MatrixXd h = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
  const MatrixXd h_inv = es.eigenvectors() * d.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  const MatrixXd r = psd_sqrt(symmetrize(h * sw * h));
  return h * r * h_inv;
}

}  // namespace

InitSolution solve_init_sdp(const InitInputs& in, const sdp::Backend& backend) {
  if (!(in.theta_v >= 0.0) || !(in.theta_x0 >= 0.0))
    throw std::invalid_argument("solve_init_sdp: radii must be nonnegative");
  require_psd(in.S0, "S0");
  require_psd(in.x0_cov, "nominal initial covariance");
  const auto nx = in.x0_cov.rows();
  const auto ny = in.v_cov.rows();
  const MatrixXd& C = in.C;

  InitSolution out;
  if (in.theta_v == 0.0 && in.theta_x0 == 0.0) {
    out.sigma_x_prior = symmetrize(in.x0_cov);
    out.sigma_v = floor_pd(in.v_cov);
    out.sigma_x_post = posterior_cov(out.sigma_x_prior, out.sigma_v, C);
    out.Y = out.sigma_x_prior;
    out.Z = symmetrize(in.v_cov);
    out.objective = (in.S0 * out.sigma_x_post).trace();
    out.gap = 0.0;
    return out;
  }

  LmiProblem p;
  const AffineMatrix post = p.add_symmetric_variable(nx);
  AffineMatrix prior(symmetrize(in.x0_cov));
  AffineMatrix Y(prior.constant());
  if (in.theta_x0 > 0.0) {
    prior = p.add_symmetric_variable(nx);
    Y = p.add_matrix_variable(nx, nx);
  }
  AffineMatrix noise(symmetrize(in.v_cov));
  AffineMatrix Z(noise.constant());
  if (in.theta_v > 0.0) {
    noise = p.add_symmetric_variable(ny);
    Z = p.add_matrix_variable(ny, ny);
  }
  const AffineMatrix prior_ct = prior * MatrixXd(C.transpose());
  p.add_lmi(sdp::block2x2(prior - post, prior_ct, prior_ct.transpose(), C * prior_ct + noise),
            "posterior");
  if (in.theta_x0 > 0.0) {
    p.add_lmi(sdp::block2x2(AffineMatrix(symmetrize(in.x0_cov)), Y, Y.transpose(), prior),
              "prior coupling");
    p.add_lmi(gelbrich_trace_slack(prior, in.x0_cov, Y, in.theta_x0), "prior radius");
  }
  if (in.theta_v > 0.0) {
    p.add_lmi(sdp::block2x2(AffineMatrix(symmetrize(in.v_cov)), Z, Z.transpose(), noise),
              "noise coupling");
    p.add_lmi(gelbrich_trace_slack(noise, in.v_cov, Z, in.theta_v), "noise radius");
  }
  p.add_lmi(post, "posterior psd");
  p.add_objective(in.S0, post);

  sdp::SolverOptions opt;
  opt.gap_tol = 0.1 * in.tol;
  const auto res = backend.solve(p, opt);

  out.sigma_x_prior = symmetrize(prior.evaluate(res.y));
  out.sigma_v = floor_pd(noise.evaluate(res.y));
  out.sigma_x_post = posterior_cov(out.sigma_x_prior, out.sigma_v, C);
  out.Y = Y.evaluate(res.y);
  out.Z = Z.evaluate(res.y);
  out.objective = res.objective;
  out.gap = res.gap;
  return out;
}

StageSdpSolution solve_stage_sdp(const StageInputs& in, const sdp::Backend& backend) {
  if (!(in.theta_v >= 0.0)) throw std::invalid_argument("solve_stage_sdp: theta_v must be >= 0");
  require_psd(in.sigma_x_post, "posterior covariance");
  require_psd(in.w_cov, "nominal disturbance covariance");
  const auto nx = in.A.rows();
  const auto ny = in.C.rows();
  const MatrixXd& A = in.A;
  const MatrixXd& C = in.C;
  const MatrixXd I = MatrixXd::Identity(nx, nx);
  const MatrixXd lam_minus_p = in.lambda * I - in.P_next;
  if (!(min_eigenvalue(lam_minus_p) > 0.0))
    throw AssumptionViolated("lambda I - P_{t+1} is not positive definite");

  LmiProblem p;
  const AffineMatrix post = p.add_symmetric_variable(nx);
  const AffineMatrix sigma_w = p.add_symmetric_variable(nx);
  const AffineMatrix Y = p.add_matrix_variable(nx, nx);
  AffineMatrix noise(symmetrize(in.v_cov_next));
  AffineMatrix Z(noise.constant());
  if (in.theta_v > 0.0) {
    noise = p.add_symmetric_variable(ny);
    Z = p.add_matrix_variable(ny, ny);
  }
  const AffineMatrix prior = AffineMatrix(symmetrize(A * in.sigma_x_post * A.transpose())) + sigma_w;
  const AffineMatrix prior_ct = prior * MatrixXd(C.transpose());
  p.add_lmi(sdp::block2x2(prior - post, prior_ct, prior_ct.transpose(), C * prior_ct + noise),
            "posterior");
  p.add_lmi(sdp::block2x2(AffineMatrix(symmetrize(in.w_cov)), Y, Y.transpose(), sigma_w),
            "disturbance coupling");
  if (in.theta_v > 0.0) {
    p.add_lmi(sdp::block2x2(AffineMatrix(symmetrize(in.v_cov_next)), Z, Z.transpose(), noise),
              "noise coupling");
    p.add_lmi(gelbrich_trace_slack(noise, in.v_cov_next, Z, in.theta_v), "noise radius");
  }
  p.add_lmi(post, "posterior psd");
  p.add_objective(in.S_next, post);
  p.add_objective(-lam_minus_p, sigma_w);
  p.add_objective(2.0 * in.lambda * I, Y);

  sdp::SolverOptions opt;
  opt.gap_tol = 0.1 * in.tol;
  const auto res = backend.solve(p, opt);

  StageSdpSolution out;
  out.sigma_w = symmetrize(sigma_w.evaluate(res.y));
  out.sigma_x_prior = symmetrize(A * in.sigma_x_post * A.transpose() + out.sigma_w);
  out.sigma_v = floor_pd(noise.evaluate(res.y));
  out.sigma_x_post = posterior_cov(out.sigma_x_prior, out.sigma_v, C);
  out.Y = Y.evaluate(res.y);
  out.Z = Z.evaluate(res.y);
  out.objective = res.objective;
  out.gap = res.gap;

  if (is_pd(in.w_cov)) {
    if (auto refined = refine_sigma_w(in, out.sigma_w, out.sigma_v)) {
      const double before = stage_value(in, out.sigma_w, out.sigma_v);
      const double after = stage_value(in, *refined, out.sigma_v);
      if (after >= before) {
        out.sigma_w = *refined;
        out.sigma_x_prior = symmetrize(A * in.sigma_x_post * A.transpose() + out.sigma_w);
        out.sigma_x_post = posterior_cov(out.sigma_x_prior, out.sigma_v, C);
        out.Y = optimal_coupling(in.w_cov, out.sigma_w);
        out.objective = (in.S_next * out.sigma_x_post).trace() - (lam_minus_p * out.sigma_w).trace() +
                        2.0 * in.lambda * out.Y.trace();
        out.gap = std::max(0.0, (res.upper_bound - out.objective) / std::max(1.0, std::abs(out.objective)));
      }
    }
  }
  return out;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::WdrCe:
      return "wdrce";
    case Method::Wdrc:
      return "wdrc";
    case Method::Lqg:
      return "lqg";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "wdrce") return Method::WdrCe;
  if (s == "wdrc") return Method::Wdrc;
  if (s == "lqg") return Method::Lqg;
  throw std::invalid_argument("unknown method '" + s + "'");
}

const MatrixXd& OfflineSchedule::prior_cov(int t) const {
  return t == 0 ? init.sigma_x_prior : stages.at(static_cast<std::size_t>(t - 1)).sigma_x_prior;
}

const MatrixXd& OfflineSchedule::post_cov(int t) const {
  return t == 0 ? init.sigma_x_post : stages.at(static_cast<std::size_t>(t - 1)).sigma_x_post;
}

const MatrixXd& OfflineSchedule::noise_cov(int t) const {
  return t == 0 ? init.sigma_v : stages.at(static_cast<std::size_t>(t - 1)).sigma_v;
}

void OfflineSchedule::compute_gains() {
  gains.assign(static_cast<std::size_t>(system.T) + 1, MatrixXd());
  const MatrixXd& C = system.C;
  for (int t = 0; t <= system.T; ++t) {
    const MatrixXd& prior = prior_cov(t);
    const MatrixXd innov = symmetrize(C * prior * C.transpose() + noise_cov(t));
    Eigen::LLT<MatrixXd> llt(innov);
    if (llt.info() != Eigen::Success) continue;
    gains[static_cast<std::size_t>(t)] = llt.solve(C * prior).transpose();
  }
}

double bound_value(const RiccatiSolution& ric, const NominalModel& nom, const InitSolution& init,
                   const std::vector<StageSdpSolution>& stages) {
  const VectorXd& xh = nom.x0_mean;
  double v = xh.dot(ric.P[0] * xh) + (ric.P[0] * init.sigma_x_prior).trace() +
             (ric.S[0] * init.sigma_x_post).trace() + 2.0 * ric.r[0].dot(xh) + ric.q[0];
  for (const auto& s : stages) v += s.objective;
  return v;
}

OfflineSchedule forward_pass(const LinearSystem& system, const RiccatiSolution& riccati,
                             const NominalModel& nominal, const RobustnessConfig& cfg, double tol,
                             const sdp::Backend& backend) {
  OfflineSchedule s;
  s.method = Method::WdrCe;
  s.system = system;
  s.nominal = nominal;
  s.cfg = cfg;
  s.solver_tol = tol;
  s.riccati = riccati;

  s.init = solve_init_sdp(init_inputs(s), backend);
  s.stages.reserve(static_cast<std::size_t>(system.T));
  for (int t = 0; t < system.T; ++t) s.stages.push_back(solve_stage_sdp(stage_inputs(s, t), backend));
  s.bound_value = bound_value(riccati, nominal, s.init, s.stages);
  if (!std::isfinite(s.bound_value)) throw SolverFailure("bound value is not finite");
  s.compute_gains();
  return s;
}

namespace {

OfflineSchedule nominal_kalman_schedule(const LinearSystem& system, const NominalModel& nominal,
                                        double tol) {
  OfflineSchedule s;
  s.method = Method::Lqg;
  s.system = system;
  s.nominal = nominal;
  s.cfg = RobustnessConfig{0.0, 0.0, 0.0, 0.0};
  s.solver_tol = tol;
  s.riccati = lqg_backward_pass(system, nominal);

  const MatrixXd& A = system.A;
  const MatrixXd& C = system.C;
  s.init.sigma_x_prior = symmetrize(nominal.x0_cov);
  s.init.sigma_v = floor_pd(nominal.v_cov[0]);
  s.init.sigma_x_post = posterior_cov(s.init.sigma_x_prior, s.init.sigma_v, C);
  s.init.Y = s.init.sigma_x_prior;
  s.init.Z = symmetrize(nominal.v_cov[0]);
  s.init.objective = (s.riccati.S[0] * s.init.sigma_x_post).trace();

  const MatrixXd* post = &s.init.sigma_x_post;
  for (int t = 0; t < system.T; ++t) {
    const auto k = static_cast<std::size_t>(t);
    StageSdpSolution st;
    st.sigma_w = symmetrize(nominal.w_cov[k]);
    st.sigma_x_prior = symmetrize(A * (*post) * A.transpose() + st.sigma_w);
    st.sigma_v = floor_pd(nominal.v_cov[k + 1]);
    st.sigma_x_post = posterior_cov(st.sigma_x_prior, st.sigma_v, C);
    st.Y = st.sigma_w;
    st.Z = symmetrize(nominal.v_cov[k + 1]);
    st.objective =
        (s.riccati.S[k + 1] * st.sigma_x_post).trace() + (s.riccati.P[k + 1] * st.sigma_w).trace();
    s.stages.push_back(std::move(st));
    post = &s.stages.back().sigma_x_post;
  }
  s.bound_value = bound_value(s.riccati, nominal, s.init, s.stages);
  s.compute_gains();
  return s;
}

}  // namespace

OfflineSchedule synthesize(Method method, const LinearSystem& system, const NominalModel& nominal,
                           const RobustnessConfig& cfg, double tol) {
  if (method == Method::Lqg) return nominal_kalman_schedule(system, nominal, tol);
  RobustnessConfig eff = cfg;
  if (method == Method::Wdrc) {
    eff.theta_v = 0.0;
    eff.theta_x0 = 0.0;
  }
  const auto ric = backward_pass(system, nominal, eff.lambda);
  auto s = forward_pass(system, ric, nominal, eff, tol);
  s.method = method;
  return s;
}

InitInputs init_inputs(const OfflineSchedule& s) {
  InitInputs in;
  in.S0 = s.riccati.S.at(0);
  in.x0_cov = s.nominal.x0_cov;
  in.v_cov = s.nominal.v_cov.at(0);
  in.C = s.system.C;
  in.theta_v = s.cfg.theta_v;
  in.theta_x0 = s.cfg.theta_x0;
  in.tol = s.solver_tol;
  return in;
}

StageInputs stage_inputs(const OfflineSchedule& s, int t) {
  const auto k = static_cast<std::size_t>(t);
  StageInputs in;
  in.sigma_x_post = s.post_cov(t);
  in.S_next = s.riccati.S.at(k + 1);
  in.P_next = s.riccati.P.at(k + 1);
  in.lambda = s.riccati.lambda;
  in.w_cov = s.nominal.w_cov.at(k);
  in.v_cov_next = s.nominal.v_cov.at(k + 1);
  in.A = s.system.A;
  in.C = s.system.C;
  in.theta_v = s.cfg.theta_v;
  in.tol = s.solver_tol;
  return in;
}

// ---------------------------------------------------------------------------
// Verification

bool VerificationReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

std::vector<std::string> VerificationReport::failures() const {
  std::vector<std::string> out;
  for (const auto& c : checks)
    if (!c.pass) {
      std::ostringstream os;
      os << stage << ": " << c.name << " (value " << c.value << ", threshold " << c.threshold << ")";
      out.push_back(os.str());
    }
  return out;
}

namespace {

class ReportBuilder {
 public:
  explicit ReportBuilder(std::string stage) { report_.stage = std::move(stage); }

  // value >= threshold
  void at_least(const std::string& name, double value, double threshold) {
    report_.checks.push_back({name, value, threshold, std::isfinite(value) && value >= threshold});
  }
  // value <= threshold
  void at_most(const std::string& name, double value, double threshold) {
    report_.checks.push_back({name, value, threshold, std::isfinite(value) && value <= threshold});
  }

  VerificationReport take() { return std::move(report_); }

 private:
  VerificationReport report_;
};

MatrixXd posterior_block(const MatrixXd& prior, const MatrixXd& post, const MatrixXd& noise,
                         const MatrixXd& C) {
  const auto nx = prior.rows(), ny = C.rows();
  MatrixXd m(nx + ny, nx + ny);
  m << prior - post, prior * C.transpose(), C * prior, C * prior * C.transpose() + noise;
  return m;
}

MatrixXd coupling_block(const MatrixXd& hat, const MatrixXd& cross, const MatrixXd& sigma) {
  const auto n = hat.rows();
  MatrixXd m(2 * n, 2 * n);
  m << hat, cross, cross.transpose(), sigma;
  return m;
}

double trace_slack_value(const MatrixXd& sigma, const MatrixXd& hat, const MatrixXd& cross) {
  return (sigma + hat - 2.0 * cross).trace();
}

}  // namespace

VerificationReport verify_solution(const InitSolution& sol, const InitInputs& in) {
  ReportBuilder rb("init");
  rb.at_least("posterior LMI min eigenvalue",
              min_eigenvalue(posterior_block(sol.sigma_x_prior, sol.sigma_x_post, sol.sigma_v, in.C)),
              -kLmiTol);
  rb.at_least("prior coupling LMI min eigenvalue",
              min_eigenvalue(coupling_block(in.x0_cov, sol.Y, sol.sigma_x_prior)), -kLmiTol);
  rb.at_least("noise coupling LMI min eigenvalue",
              min_eigenvalue(coupling_block(in.v_cov, sol.Z, sol.sigma_v)), -kLmiTol);
  rb.at_least("posterior covariance min eigenvalue", min_eigenvalue(sol.sigma_x_post), -kLmiTol);
  rb.at_least("noise covariance min eigenvalue (PD)", min_eigenvalue(sol.sigma_v), 1e-12);
  rb.at_most("prior radius trace", trace_slack_value(sol.sigma_x_prior, in.x0_cov, sol.Y),
             in.theta_x0 * in.theta_x0 + kLmiTol);
  rb.at_most("noise radius trace", trace_slack_value(sol.sigma_v, in.v_cov, sol.Z),
             in.theta_v * in.theta_v + kLmiTol);
  double bx = std::numeric_limits<double>::infinity(), bv = bx;
  try {
    bx = bures_sq(sol.sigma_x_prior, in.x0_cov);
    bv = bures_sq(sol.sigma_v, in.v_cov);
  } catch (const std::exception&) {
  }
  rb.at_most("prior Bures radius", bx, in.theta_x0 * in.theta_x0 + kLmiTol);
  rb.at_most("noise Bures radius", bv, in.theta_v * in.theta_v + kLmiTol);
  const double recomputed = (in.S0 * sol.sigma_x_post).trace();
  const double scale = std::max(1.0, std::abs(sol.objective));
  rb.at_most("objective consistency", std::abs(recomputed - sol.objective), in.tol * scale);
  rb.at_most("duality gap", sol.gap, in.tol);
  return rb.take();
}

VerificationReport verify_solution(const StageSdpSolution& sol, const StageInputs& in) {
  ReportBuilder rb("stage");
  const auto nx = in.A.rows();
  const MatrixXd I = MatrixXd::Identity(nx, nx);
  rb.at_least("posterior LMI min eigenvalue",
              min_eigenvalue(posterior_block(sol.sigma_x_prior, sol.sigma_x_post, sol.sigma_v, in.C)),
              -kLmiTol);
  rb.at_least("disturbance coupling LMI min eigenvalue",
              min_eigenvalue(coupling_block(in.w_cov, sol.Y, sol.sigma_w)), -kLmiTol);
  rb.at_least("noise coupling LMI min eigenvalue",
              min_eigenvalue(coupling_block(in.v_cov_next, sol.Z, sol.sigma_v)), -kLmiTol);
  rb.at_least("posterior covariance min eigenvalue", min_eigenvalue(sol.sigma_x_post), -kLmiTol);
  rb.at_least("noise covariance min eigenvalue (PD)", min_eigenvalue(sol.sigma_v), 1e-12);
  rb.at_most("noise radius trace", trace_slack_value(sol.sigma_v, in.v_cov_next, sol.Z),
             in.theta_v * in.theta_v + kLmiTol);
  const MatrixXd expected_prior = in.A * in.sigma_x_post * in.A.transpose() + sol.sigma_w;
  rb.at_most("prior propagation residual", (sol.sigma_x_prior - expected_prior).cwiseAbs().maxCoeff(),
             kLmiTol);

  const double scale = std::max(1.0, std::abs(sol.objective));
  double exact_trace = std::numeric_limits<double>::infinity();
  try {
    exact_trace = sqrt_trace(sol.sigma_w, in.w_cov);
  } catch (const std::exception&) {
  }
  const double with_y = (in.S_next * sol.sigma_x_post).trace() +
                        ((in.P_next - in.lambda * I) * sol.sigma_w).trace() +
                        2.0 * in.lambda * sol.Y.trace();
  rb.at_most("Y tightness (objective increase)", 2.0 * in.lambda * (exact_trace - sol.Y.trace()),
             in.tol * scale);
  rb.at_most("objective consistency", std::abs(with_y - sol.objective), in.tol * scale);
  rb.at_most("duality gap", sol.gap, in.tol);
  return rb.take();
}

std::vector<VerificationReport> verify_schedule(const OfflineSchedule& s, std::optional<double> tol) {
  std::vector<VerificationReport> out;
  auto ii = init_inputs(s);
  if (tol) ii.tol = *tol;
  out.push_back(verify_solution(s.init, ii));
  for (int t = 0; t < s.system.T; ++t) {
    auto in = stage_inputs(s, t);
    if (tol) in.tol = *tol;
    auto r = verify_solution(s.stages[static_cast<std::size_t>(t)], in);
    r.stage = "stage " + std::to_string(t);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Schedule files

namespace {

constexpr const char* kFormat = "drce-schedule";
constexpr int kVersion = 1;

template <typename T, typename F>
json list(const std::vector<T>& v, F f) {
  json a = json::array();
  for (const auto& x : v) a.push_back(f(x));
  return a;
}

std::vector<MatrixXd> matrices(const json& j) {
  std::vector<MatrixXd> v;
  for (const auto& x : j) v.push_back(matrix_from_json(x));
  return v;
}

std::vector<VectorXd> vectors(const json& j) {
  std::vector<VectorXd> v;
  for (const auto& x : j) v.push_back(vector_from_json(x));
  return v;
}

json stage_json(const MatrixXd& prior, const MatrixXd& post, const MatrixXd* w, const MatrixXd& v,
                const MatrixXd& Y, const MatrixXd& Z, double objective, double gap) {
  json j{{"sigma_x_prior", matrix_to_json(prior)},
         {"sigma_x_post", matrix_to_json(post)},
         {"sigma_v", matrix_to_json(v)},
         {"Y", matrix_to_json(Y)},
         {"Z", matrix_to_json(Z)},
         {"objective", objective},
         {"gap", gap}};
  if (w) j["sigma_w"] = matrix_to_json(*w);
  return j;
}

void check_square(const MatrixXd& m, Eigen::Index n, const std::string& what) {
  if (m.rows() != n || m.cols() != n)
    throw ScheduleFormatError("schedule: " + what + " has wrong dimensions");
}

}  // namespace

json schedule_to_json(const OfflineSchedule& s) {
  const auto& r = s.riccati;
  json ric{{"lambda", r.lambda},
           {"lqg", r.lqg},
           {"Phi", matrix_to_json(r.Phi)},
           {"P", list(r.P, matrix_to_json)},
           {"S", list(r.S, matrix_to_json)},
           {"r", list(r.r, vector_to_json)},
           {"q", r.q},
           {"K", list(r.K, matrix_to_json)},
           {"L", list(r.L, vector_to_json)},
           {"H", list(r.H, matrix_to_json)},
           {"G", list(r.G, vector_to_json)}};
  json stages = json::array();
  for (const auto& st : s.stages)
    stages.push_back(stage_json(st.sigma_x_prior, st.sigma_x_post, &st.sigma_w, st.sigma_v, st.Y,
                                st.Z, st.objective, st.gap));
  return json{{"format", kFormat},
              {"version", kVersion},
              {"method", to_string(s.method)},
              {"dims",
               {{"nx", s.system.nx()}, {"nu", s.system.nu()}, {"ny", s.system.ny()}, {"T", s.system.T}}},
              {"config", s.cfg},
              {"solver_tol", s.solver_tol},
              {"system", s.system},
              {"nominal", s.nominal},
              {"riccati", ric},
              {"init", stage_json(s.init.sigma_x_prior, s.init.sigma_x_post, nullptr, s.init.sigma_v,
                                  s.init.Y, s.init.Z, s.init.objective, s.init.gap)},
              {"stages", stages},
              {"bound_value", s.bound_value}};
}

OfflineSchedule schedule_from_json(const json& j) {
  OfflineSchedule s;
  try {
    if (j.at("format").get<std::string>() != kFormat)
      throw ScheduleFormatError("schedule: unexpected format tag");
    if (j.at("version").get<int>() != kVersion)
      throw ScheduleFormatError("schedule: unsupported version " + j.at("version").dump());
    s.method = method_from_string(j.at("method").get<std::string>());
    s.cfg = j.at("config").get<RobustnessConfig>();
    s.solver_tol = j.at("solver_tol").get<double>();
    s.system = j.at("system").get<LinearSystem>();
    s.nominal = j.at("nominal").get<NominalModel>();
    const auto& d = j.at("dims");
    if (d.at("nx").get<Eigen::Index>() != s.system.nx() || d.at("nu").get<Eigen::Index>() != s.system.nu() ||
        d.at("ny").get<Eigen::Index>() != s.system.ny() || d.at("T").get<int>() != s.system.T)
      throw ScheduleFormatError("schedule: header dimensions disagree with the stored system");

    const auto& r = j.at("riccati");
    auto& ric = s.riccati;
    ric.lambda = r.at("lambda").get<double>();
    ric.lqg = r.at("lqg").get<bool>();
    ric.Phi = matrix_from_json(r.at("Phi"));
    ric.P = matrices(r.at("P"));
    ric.S = matrices(r.at("S"));
    ric.r = vectors(r.at("r"));
    ric.q = r.at("q").get<std::vector<double>>();
    ric.K = matrices(r.at("K"));
    ric.L = vectors(r.at("L"));
    ric.H = matrices(r.at("H"));
    ric.G = vectors(r.at("G"));

    const auto T = static_cast<std::size_t>(s.system.T);
    if (ric.P.size() != T + 1 || ric.S.size() != T + 1 || ric.r.size() != T + 1 ||
        ric.q.size() != T + 1 || ric.K.size() != T || ric.L.size() != T || ric.H.size() != T ||
        ric.G.size() != T)
      throw ScheduleFormatError("schedule: riccati coefficient count does not match T");

    auto read_common = [&](const json& js, auto& out) {
      out.sigma_x_prior = matrix_from_json(js.at("sigma_x_prior"));
      out.sigma_x_post = matrix_from_json(js.at("sigma_x_post"));
      out.sigma_v = matrix_from_json(js.at("sigma_v"));
      out.Y = matrix_from_json(js.at("Y"));
      out.Z = matrix_from_json(js.at("Z"));
      out.objective = js.at("objective").get<double>();
      out.gap = js.at("gap").get<double>();
    };
    read_common(j.at("init"), s.init);
    const auto& st = j.at("stages");
    if (st.size() != T) throw ScheduleFormatError("schedule: stage count does not match T");
    for (const auto& js : st) {
      StageSdpSolution x;
      read_common(js, x);
      x.sigma_w = matrix_from_json(js.at("sigma_w"));
      s.stages.push_back(std::move(x));
    }
    s.bound_value = j.at("bound_value").get<double>();
  } catch (const ScheduleFormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw ScheduleFormatError(std::string("schedule parse error: ") + e.what());
  }

  const auto nx = s.system.nx(), ny = s.system.ny();
  check_square(s.init.sigma_x_prior, nx, "init prior");
  check_square(s.init.sigma_x_post, nx, "init posterior");
  check_square(s.init.sigma_v, ny, "init noise");
  for (const auto& x : s.stages) {
    check_square(x.sigma_x_prior, nx, "stage prior");
    check_square(x.sigma_x_post, nx, "stage posterior");
    check_square(x.sigma_w, nx, "stage disturbance");
    check_square(x.sigma_v, ny, "stage noise");
  }
  s.compute_gains();
  return s;
}

void save_schedule(const OfflineSchedule& s, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write schedule file " + path);
  f << schedule_to_json(s).dump(1) << '\n';
}

OfflineSchedule load_schedule(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read schedule file " + path);
  json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw ScheduleFormatError(std::string("schedule parse error: ") + e.what());
  }
  return schedule_from_json(j);
}

}  // namespace drce
