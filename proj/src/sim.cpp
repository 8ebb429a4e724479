#include "drce/sim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "drce/matops.hpp"

namespace drce {

double sample_uquadratic(double a, double b, double u) {
  const double alpha = 12.0 / std::pow(b - a, 3);
  const double beta = 0.5 * (a + b);
  const double x = beta + std::cbrt(3.0 * u / alpha - std::pow(beta - a, 3));
  return std::clamp(x, a, b);
}

namespace {

VectorXd draw_impl(const DistributionSpec& d, const MatrixXd& factor, Rng& rng) {
  if (d.kind == DistributionSpec::Kind::UQuadratic) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    VectorXd x(d.dim);
    for (Eigen::Index i = 0; i < d.dim; ++i) x(i) = sample_uquadratic(d.a, d.b, unif(rng));
    return x;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd z(d.mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return d.mean + factor * z;
}

MatrixXd gaussian_factor(const DistributionSpec& d) {
  return d.kind == DistributionSpec::Kind::Gaussian ? psd_sqrt(d.cov).matrix() : MatrixXd();
}

}  // namespace

VectorXd draw(const DistributionSpec& d, Rng& rng) { return draw_impl(d, gaussian_factor(d), rng); }

Moments empirical_moments(const std::vector<VectorXd>& samples, double jitter) {
  if (samples.empty()) throw EmptySampleSet("empirical_moments: no samples");
  const auto n = samples.front().size();
  const double N = static_cast<double>(samples.size());
  Moments m;
  m.mean = VectorXd::Zero(n);
  for (const auto& s : samples) m.mean += s;
  m.mean /= N;
  m.cov = MatrixXd::Zero(n, n);
  for (const auto& s : samples) {
    const VectorXd d = s - m.mean;
    m.cov += d * d.transpose();
  }
  m.cov /= N;
  m.cov += jitter * MatrixXd::Identity(n, n);
  return m;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum Stream : std::uint64_t { kStreamX0 = 1, kStreamW = 2, kStreamV = 3 };

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(seed)),
                    static_cast<std::uint32_t>(splitmix64(seed) >> 32),
                    static_cast<std::uint32_t>(splitmix64(stream + 0x632be59bd9b4e019ULL))};
  return Rng(seq);
}

Realization sample_realization(const TrueDistributionSpec& dists, int T, std::uint64_t seed) {
  Realization r;
  Rng gx = make_rng(seed, kStreamX0), gw = make_rng(seed, kStreamW), gv = make_rng(seed, kStreamV);
  const MatrixXd fw = gaussian_factor(dists.w), fv = gaussian_factor(dists.v);
  r.x0 = draw(dists.x0, gx);
  r.w.reserve(static_cast<std::size_t>(T));
  r.v.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    r.w.push_back(draw_impl(dists.w, fw, gw));
    r.v.push_back(draw_impl(dists.v, fv, gv));
  }
  return r;
}

RunResult run_closed_loop(const OfflineSchedule& schedule, const Realization& rz, bool keep_log) {
  const auto start = std::chrono::steady_clock::now();
  const auto& sys = schedule.system;
  RunResult res;
  res.method = schedule.method;

  VectorXd x = rz.x0;
  FilterState fs = initial_state(schedule);
  double cost = 0.0;
  for (int t = 0; t < sys.T; ++t) {
    const auto k = static_cast<std::size_t>(t);
    const VectorXd y = sys.C * x + rz.v[k];
    fs = measurement_update(fs, y, schedule);
    const VectorXd u = control(fs, schedule);
    cost += x.dot(sys.Q * x) + u.dot(sys.R * u);
    if (keep_log) {
      res.states.push_back(x);
      res.prior_means.push_back(fs.x_prior_mean);
      res.post_means.push_back(fs.x_post_mean);
      res.controls.push_back(u);
    }
    x = sys.A * x + sys.B * u + rz.w[k];
    fs = predict(fs, u, schedule);
  }
  cost += x.dot(sys.Qf * x);
  if (keep_log) res.states.push_back(x);
  res.total_cost = cost;
  res.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return res;
}

RunResult run_closed_loop(const OfflineSchedule& schedule, const TrueDistributionSpec& dists,
                          std::uint64_t seed, bool keep_log) {
  auto r = run_closed_loop(schedule, sample_realization(dists, schedule.system.T, seed), keep_log);
  r.seed = seed;
  return r;
}

namespace {

double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.size() == 1) return sorted.front();
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

Summary summarize(std::vector<double> values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
    s.std_error = s.std / std::sqrt(static_cast<double>(s.n));
  }
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  s.q05 = quantile(values, 0.05);
  s.q25 = quantile(values, 0.25);
  s.median = quantile(values, 0.5);
  s.q75 = quantile(values, 0.75);
  s.q95 = quantile(values, 0.95);
  return s;
}

json to_json(const Summary& s) {
  return json{{"n", s.n},         {"mean", s.mean}, {"std", s.std},       {"std_error", s.std_error},
              {"min", s.min},     {"q05", s.q05},   {"q25", s.q25},       {"median", s.median},
              {"q75", s.q75},     {"q95", s.q95},   {"max", s.max}};
}

unsigned worker_count() {
  if (const char* env = std::getenv("DRCE_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<std::vector<RunResult>> monte_carlo(const std::vector<const OfflineSchedule*>& schedules,
                                                const TrueDistributionSpec& dists, int n_runs,
                                                std::uint64_t base_seed) {
  if (n_runs < 1) throw std::invalid_argument("monte_carlo: n_runs must be >= 1");
  if (schedules.empty()) return {};
  const int T = schedules.front()->system.T;
  for (const auto* s : schedules)
    if (s->system.T != T) throw std::invalid_argument("monte_carlo: schedules differ in horizon");

  std::vector<std::vector<RunResult>> out(schedules.size(),
                                          std::vector<RunResult>(static_cast<std::size_t>(n_runs)));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r; (r = next.fetch_add(1)) < n_runs;) {
      const std::uint64_t seed = run_seed(base_seed, static_cast<std::uint64_t>(r));
      const Realization rz = sample_realization(dists, T, seed);
      for (std::size_t i = 0; i < schedules.size(); ++i) {
        RunResult res = run_closed_loop(*schedules[i], rz);
        res.run_id = r;
        res.seed = seed;
        out[i][static_cast<std::size_t>(r)] = std::move(res);
      }
    }
  };
  const unsigned n_threads = std::min<unsigned>(worker_count(), static_cast<unsigned>(n_runs));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return out;
}

double guaranteed_bound(const OfflineSchedule& schedule, double theta_w) {
  return schedule.bound_value + schedule.riccati.lambda * theta_w * theta_w * schedule.system.T;
}

double radius_exponent_a(double beta, int N, int T, const RadiusSource& src) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
  if (N < 1 || T < 1) throw std::invalid_argument("N and T must be positive");
  if (!(src.c1 > 0.0 && src.c2 > 0.0)) throw std::invalid_argument("c1 and c2 must be positive");
  const double tail = 1.0 - std::pow(1.0 - beta, 1.0 / (2.0 * T + 1.0));
  return std::log(src.c1 / tail) / (src.c2 * N);
}

double radius_from_a(double a, int n, double c) {
  if (!(a > 0.0)) throw std::invalid_argument("radius_from_a: a must be positive");
  if (!(c > 2.0)) throw std::invalid_argument("radius_from_a: c must exceed 2");
  if (a > 1.0) return std::pow(a, 2.0 / c);
  if (n < 4) return std::sqrt(a);
  if (n > 4) return std::pow(a, 2.0 / n);
  const double log3 = std::log(3.0);
  if (a > 1.0 / (log3 * log3))
    throw CaseGap("radius rule has no case for n = 4 and a in (1/log(3)^2, 1]");
  // theta / log(2 + 1/theta) = sqrt(a); the left side is increasing in theta.
  const double target = std::sqrt(a);
  auto f = [&](double th) { return th / std::log(2.0 + 1.0 / th) - target; };
  double lo = 0.0, hi = 10.0 * target * log3;
  if (f(hi) < 0.0) throw std::domain_error("radius_from_a: root outside the bisection bracket");
  // Bisect to machine resolution; the residual ends far below 1e-10.
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> select_radius(const RadiusSelectionParams& p) {
  std::vector<double> out;
  for (const auto& s : p.sources) out.push_back(radius_from_a(radius_exponent_a(p.beta, p.N, p.T, s), s.n, s.c));
  return out;
}

}  // namespace drce
