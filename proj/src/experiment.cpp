#include "drce/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "drce/matops.hpp"
#include "drce/riccati.hpp"

namespace drce {

namespace fs = std::filesystem;

LinearSystem builtin_system(const std::string& name, int T) {
  double a;
  if (name == "paper10")
    a = 0.2;
  else if (name == "paper10-shift")
    a = 1.0;
  else
    throw ConfigError("unknown builtin system '" + name + "'");
  if (T < 1) throw ConfigError("horizon T must be >= 1");
  const int n = 10;
  LinearSystem s;
  s.A = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    s.A(i, i) = a;
    if (i + 1 < n) s.A(i, i + 1) = a;
  }
  s.B = s.C = s.Q = s.Qf = s.R = MatrixXd::Identity(n, n);
  s.T = T;
  return s;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Scalars expand to c * ones / c * I.
VectorXd vector_or_scalar(const json& j, Eigen::Index n, const std::string& what) {
  if (j.is_number()) return VectorXd::Constant(n, j.get<double>());
  VectorXd v = vector_from_json(j);
  if (v.size() != n) throw ConfigError(what + ": expected length " + std::to_string(n));
  return v;
}

MatrixXd matrix_or_scalar(const json& j, Eigen::Index n, const std::string& what) {
  if (j.is_number()) return j.get<double>() * MatrixXd::Identity(n, n);
  MatrixXd m = matrix_from_json(j);
  if (m.rows() != n || m.cols() != n)
    throw ConfigError(what + ": expected " + std::to_string(n) + "x" + std::to_string(n));
  return m;
}

DistributionSpec distribution_from_config(const json& j, Eigen::Index n, const std::string& what) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "gaussian")
    return DistributionSpec::gaussian(vector_or_scalar(j.at("mean"), n, what + ".mean"),
                                      matrix_or_scalar(j.at("cov"), n, what + ".cov"));
  if (kind == "uquadratic") {
    const auto dim = j.contains("dim") ? j.at("dim").get<Eigen::Index>() : n;
    if (dim != n) throw ConfigError(what + ": dim must be " + std::to_string(n));
    return DistributionSpec::uquadratic(j.at("a").get<double>(), j.at("b").get<double>(), dim);
  }
  throw ConfigError(what + ": unknown distribution kind '" + kind + "'");
}

Moments moments_from_config(const json& j, Eigen::Index n, const std::string& what) {
  return Moments{vector_or_scalar(j.at("mean"), n, what + ".mean"),
                 matrix_or_scalar(j.at("cov"), n, what + ".cov")};
}

std::vector<double> number_list(const json& j) {
  if (j.is_number()) return {j.get<double>()};
  return j.get<std::vector<double>>();
}

std::string fmt_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

std::string fmt_full(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(1) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path.string());
  try {
    json j;
    f >> j;
    return j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& j, const fs::path& base_dir) {
  ExperimentConfig c;
  try {
    c.name = j.value("name", c.name);

    const auto& sj = j.at("system");
    if (sj.is_string()) {
      c.system = builtin_system(sj.get<std::string>(), j.value("T", 20));
    } else if (sj.contains("builtin")) {
      c.system = builtin_system(sj.at("builtin").get<std::string>(), sj.value("T", j.value("T", 20)));
    } else {
      c.system = sj.get<LinearSystem>();
    }
    const auto nx = c.system.nx(), ny = c.system.ny();

    const auto& tj = j.at("true");
    c.truth.w = distribution_from_config(tj.at("w"), nx, "true.w");
    c.truth.v = distribution_from_config(tj.at("v"), ny, "true.v");
    c.truth.x0 = distribution_from_config(tj.at("x0"), nx, "true.x0");

    const auto& nj = j.at("nominal");
    const auto source = nj.value("source", std::string("generated"));
    if (source == "generated") {
      c.nominal.source = NominalSpec::Source::Generated;
      const int N = nj.value("N", 15);
      c.nominal.N_w = nj.value("N_w", N);
      c.nominal.N_v = nj.value("N_v", N);
      c.nominal.N_x0 = nj.value("N_x0", N);
      c.nominal.seed = nj.value("seed", std::uint64_t{0});
      if (c.nominal.N_w < 1 || c.nominal.N_v < 1 || c.nominal.N_x0 < 1)
        throw ConfigError("nominal sample counts must be >= 1");
    } else if (source == "moments") {
      c.nominal.source = NominalSpec::Source::Moments;
      c.nominal.w = moments_from_config(nj.at("w"), nx, "nominal.w");
      c.nominal.v = moments_from_config(nj.at("v"), ny, "nominal.v");
      c.nominal.x0 = moments_from_config(nj.at("x0"), nx, "nominal.x0");
    } else if (source == "samples") {
      c.nominal.source = NominalSpec::Source::Samples;
      auto resolve = [&](const std::string& key) {
        fs::path p = nj.at(key).get<std::string>();
        return p.is_absolute() ? p : base_dir / p;
      };
      c.nominal.w_file = resolve("w");
      c.nominal.v_file = resolve("v");
      c.nominal.x0_file = resolve("x0");
    } else {
      throw ConfigError("unknown nominal source '" + source + "'");
    }

    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      if (g.contains("theta_w")) c.theta_w = number_list(g.at("theta_w"));
      if (g.contains("theta_v")) c.theta_v = number_list(g.at("theta_v"));
      c.theta_x0 = g.value("theta_x0", c.theta_x0);
    }

    if (j.contains("lambda")) {
      const auto& lj = j.at("lambda");
      if (lj.is_number()) {
        c.lambda = {LambdaSpec::Mode::Fixed, lj.get<double>()};
      } else {
        const auto mode = lj.at("mode").get<std::string>();
        if (mode == "fixed")
          c.lambda = {LambdaSpec::Mode::Fixed, lj.at("value").get<double>()};
        else if (mode == "select")
          c.lambda = {LambdaSpec::Mode::Select, 0.0};
        else
          throw ConfigError("unknown lambda mode '" + mode + "'");
      }
    } else {
      throw ConfigError("missing 'lambda' (a number or {\"mode\": \"select\"})");
    }

    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j.at("methods")) c.methods.push_back(method_from_string(m.get<std::string>()));
    }
    c.n_runs = j.value("n_runs", c.n_runs);
    c.base_seed = j.value("base_seed", c.base_seed);
    c.tol = j.value("tol", c.tol);
    if (j.contains("out")) {
      fs::path p = j.at("out").get<std::string>();
      c.out_dir = p.is_absolute() ? p : base_dir / p;
    } else {
      c.out_dir = base_dir / "out";
    }
    if (j.contains("scaling")) {
      ScalingSpec s;
      s.horizons = j.at("scaling").at("horizons").get<std::vector<int>>();
      s.repeats = j.at("scaling").value("repeats", 5);
      if (s.horizons.empty() || s.repeats < 1) throw ConfigError("scaling: empty horizons or repeats < 1");
      c.scaling = s;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (c.theta_w.empty() || c.theta_v.empty()) throw ConfigError("theta grids must be nonempty");
  for (double t : c.theta_w)
    if (!(t >= 0.0)) throw ConfigError("theta_w values must be >= 0");
  for (double t : c.theta_v)
    if (!(t >= 0.0)) throw ConfigError("theta_v values must be >= 0");
  if (!(c.theta_x0 >= 0.0)) throw ConfigError("theta_x0 must be >= 0");
  if (c.n_runs < 1) throw ConfigError("n_runs must be >= 1");
  if (!(c.tol > 0.0)) throw ConfigError("tol must be positive");
  if (c.lambda.mode == LambdaSpec::Mode::Fixed && !(c.lambda.value > 0.0))
    throw ConfigError("fixed lambda must be positive");
  if (c.methods.empty()) throw ConfigError("methods must be nonempty");
  if (const auto v = validate(c.truth); !v.empty()) throw ConfigError(to_string(v));
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  return config_from_json(read_json(path), path.parent_path());
}

std::vector<VectorXd> read_samples_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read sample file " + path.string());
  std::vector<VectorXd> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (out.empty() && lineno == 1) continue;  // header
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": non-numeric value");
    }
    if (!out.empty() && static_cast<Eigen::Index>(vals.size()) != out.front().size())
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": inconsistent column count");
    out.push_back(Eigen::Map<VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size())));
  }
  if (out.empty()) throw ConfigError(path.string() + ": no samples");
  return out;
}

NominalModel build_nominal(const ExperimentConfig& cfg, int T) {
  Moments w, v, x0;
  const auto& ns = cfg.nominal;
  switch (ns.source) {
    case NominalSpec::Source::Moments:
      w = ns.w;
      v = ns.v;
      x0 = ns.x0;
      break;
    case NominalSpec::Source::Samples:
      w = empirical_moments(read_samples_csv(ns.w_file));
      v = empirical_moments(read_samples_csv(ns.v_file), kNoiseJitter);
      x0 = empirical_moments(read_samples_csv(ns.x0_file));
      break;
    case NominalSpec::Source::Generated: {
      auto gen = [&](const DistributionSpec& d, int N, std::uint64_t stream) {
        Rng rng = make_rng(ns.seed, stream);
        std::vector<VectorXd> xs;
        xs.reserve(static_cast<std::size_t>(N));
        for (int i = 0; i < N; ++i) xs.push_back(draw(d, rng));
        return xs;
      };
      w = empirical_moments(gen(cfg.truth.w, ns.N_w, 101));
      v = empirical_moments(gen(cfg.truth.v, ns.N_v, 102), kNoiseJitter);
      x0 = empirical_moments(gen(cfg.truth.x0, ns.N_x0, 103));
      break;
    }
  }
  if (w.mean.size() != cfg.system.nx() || x0.mean.size() != cfg.system.nx() ||
      v.mean.size() != cfg.system.ny())
    throw ConfigError("nominal moments do not match the system dimensions");
  return NominalModel::time_invariant(T, w.mean, w.cov, v.mean, v.cov, x0.mean, x0.cov);
}

NominalModel build_nominal(const ExperimentConfig& cfg) { return build_nominal(cfg, cfg.system.T); }

double resolve_lambda(const ExperimentConfig& cfg, const NominalModel& nominal, Method method,
                      const RobustnessConfig& radii) {
  if (method == Method::Lqg) return 0.0;
  if (cfg.lambda.mode == LambdaSpec::Mode::Fixed) return cfg.lambda.value;
  RobustnessConfig eff = radii;
  if (method == Method::Wdrc) eff.theta_v = eff.theta_x0 = 0.0;
  auto value = [&](double lam) {
    try {
      eff.lambda = lam;
      const auto ric = backward_pass(cfg.system, nominal, lam);
      return forward_pass(cfg.system, ric, nominal, eff, cfg.tol).bound_value;
    } catch (const SolverFailure&) {
      return std::numeric_limits<double>::infinity();
    } catch (const LambdaInfeasible&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  return lambda_select(cfg.system, nominal, radii.theta_w, value);
}

std::string schedule_file_name(Method method, double theta_w, double theta_v) {
  std::string s = "schedules/" + to_string(method);
  if (method != Method::Lqg) s += "_tw" + fmt_number(theta_w);
  if (method == Method::WdrCe) s += "_tv" + fmt_number(theta_v);
  return s + ".json";
}

namespace {

json cell_json(const CellSchedule& c) {
  return json{{"method", to_string(c.method)},
              {"theta_w", c.cfg.theta_w},
              {"theta_v", c.cfg.theta_v},
              {"theta_x0", c.cfg.theta_x0},
              {"lambda", c.cfg.lambda},
              {"schedule", c.file}};
}

}  // namespace

std::vector<CellSchedule> run_offline(const ExperimentConfig& cfg, std::ostream& log) {
  const NominalModel nominal = build_nominal(cfg);
  if (const auto v = validate(cfg.system, nominal, RobustnessConfig{0, 0, 0, 1}); !v.empty())
    throw ConfigError(to_string(v));
  fs::create_directories(cfg.out_dir / "schedules");

  // Unique schedules in a fixed order: wdrce per (theta_w, theta_v), wdrc per
  // theta_w, one lqg.
  std::vector<CellSchedule> cells;
  auto has = [&](Method m) {
    return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
  };
  for (double tw : cfg.theta_w) {
    if (has(Method::WdrCe))
      for (double tv : cfg.theta_v)
        cells.push_back({Method::WdrCe, {tw, tv, cfg.theta_x0, 0.0}, schedule_file_name(Method::WdrCe, tw, tv)});
    if (has(Method::Wdrc))
      cells.push_back({Method::Wdrc, {tw, 0.0, 0.0, 0.0}, schedule_file_name(Method::Wdrc, tw, 0.0)});
  }
  if (has(Method::Lqg)) cells.push_back({Method::Lqg, {0, 0, 0, 0}, schedule_file_name(Method::Lqg, 0, 0)});

  json timings = json::array();
  for (auto& c : cells) {
    auto t0 = std::chrono::steady_clock::now();
    c.cfg.lambda = resolve_lambda(cfg, nominal, c.method, c.cfg);
    c.lambda_seconds = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const auto schedule = synthesize(c.method, cfg.system, nominal, c.cfg, cfg.tol);
    c.synthesis_seconds = seconds_since(t0);
    save_schedule(schedule, (cfg.out_dir / c.file).string());
    log << c.file << "  lambda " << c.cfg.lambda << "  bound " << schedule.bound_value << "  ("
        << c.synthesis_seconds << " s)\n";
    timings.push_back({{"schedule", c.file},
                       {"synthesis_seconds", c.synthesis_seconds},
                       {"lambda_seconds", c.lambda_seconds}});
  }

  json manifest{{"format", "drce-manifest"}, {"version", 1}, {"name", cfg.name}, {"cells", json::array()}};
  for (const auto& c : cells) manifest["cells"].push_back(cell_json(c));
  write_json(cfg.out_dir / "manifest.json", manifest);
  write_json(cfg.out_dir / "timings.json", json{{"schedules", timings}});
  return cells;
}

std::vector<ScalingResult> run_scaling(const ExperimentConfig& cfg, std::ostream& log) {
  std::vector<ScalingResult> out;
  if (!cfg.scaling) return out;
  const RobustnessConfig radii{cfg.theta_w.front(), cfg.theta_v.front(), cfg.theta_x0, 0.0};
  for (int T : cfg.scaling->horizons) {
    ExperimentConfig c = cfg;
    c.system.T = T;
    const NominalModel nominal = build_nominal(c, T);
    RobustnessConfig r = radii;
    r.lambda = resolve_lambda(c, nominal, Method::WdrCe, r);
    ScalingResult res;
    res.T = T;
    for (int k = 0; k < cfg.scaling->repeats; ++k) {
      const auto t0 = std::chrono::steady_clock::now();
      synthesize(Method::WdrCe, c.system, nominal, r, cfg.tol);
      res.seconds.push_back(seconds_since(t0));
    }
    res.summary = summarize(res.seconds);
    log << "scaling T=" << T << "  mean " << res.summary.mean << " s\n";
    out.push_back(std::move(res));
  }
  return out;
}

json run_simulate(const ExperimentConfig& cfg, const fs::path& schedule_dir, std::ostream& log) {
  const json manifest = read_json(schedule_dir / "manifest.json");
  if (manifest.value("format", "") != "drce-manifest")
    throw ConfigError("manifest.json: unexpected format");

  struct Entry {
    json cell;
    OfflineSchedule schedule;
  };
  std::vector<Entry> entries;
  for (const auto& c : manifest.at("cells")) {
    const fs::path file = schedule_dir / c.at("schedule").get<std::string>();
    if (!fs::exists(file)) throw ConfigError("missing schedule " + file.string());
    entries.push_back({c, load_schedule(file.string())});
  }
  if (entries.empty()) throw ConfigError("manifest lists no schedules");

  std::vector<const OfflineSchedule*> ptrs;
  for (const auto& e : entries) ptrs.push_back(&e.schedule);
  log << "simulating " << entries.size() << " schedules x " << cfg.n_runs << " runs\n";
  const auto runs = monte_carlo(ptrs, cfg.truth, cfg.n_runs, cfg.base_seed);

  // Rows per grid cell and method; wdrc and lqg rows repeat their single
  // schedule's runs at every cell so that each cell carries all methods.
  std::map<std::pair<Method, double>, std::size_t> wdrc_of;
  std::map<std::pair<double, double>, std::size_t> wdrce_of;
  std::optional<std::size_t> lqg_of;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& s = entries[i].schedule;
    const double tw = entries[i].cell.at("theta_w").get<double>();
    const double tv = entries[i].cell.at("theta_v").get<double>();
    if (s.method == Method::WdrCe) wdrce_of[{tw, tv}] = i;
    if (s.method == Method::Wdrc) wdrc_of[{Method::Wdrc, tw}] = i;
    if (s.method == Method::Lqg) lqg_of = i;
  }

  fs::create_directories(cfg.out_dir);
  std::ofstream csv(cfg.out_dir / "results.csv");
  if (!csv) throw std::runtime_error("cannot write results.csv");
  csv << kCsvHeader << '\n';

  json cells = json::array();
  auto emit = [&](std::size_t idx, double tw, double tv) {
    const auto& sched = entries[idx].schedule;
    const double lam = sched.riccati.lambda;
    std::vector<double> costs;
    for (const auto& r : runs[idx]) {
      csv << to_string(sched.method) << ',' << fmt_number(tw) << ',' << fmt_number(tv) << ','
          << fmt_number(cfg.theta_x0) << ',' << fmt_full(lam) << ',' << r.run_id << ',' << r.seed << ','
          << fmt_full(r.total_cost) << ',' << fmt_number(r.wall_time_ms) << '\n';
      costs.push_back(r.total_cost);
    }
    json c{{"method", to_string(sched.method)},
           {"theta_w", tw},
           {"theta_v", tv},
           {"theta_x0", cfg.theta_x0},
           {"lambda", lam},
           {"schedule", entries[idx].cell.at("schedule")},
           {"cost", to_json(summarize(costs))},
           {"bound_value", sched.bound_value}};
    // LQG carries no guarantee; null keeps the cell schema uniform.
    c["guaranteed_bound"] = sched.method == Method::Lqg ? json(nullptr) : json(guaranteed_bound(sched, tw));
    cells.push_back(c);
  };
  for (double tw : cfg.theta_w)
    for (double tv : cfg.theta_v) {
      if (auto it = wdrce_of.find({tw, tv}); it != wdrce_of.end()) emit(it->second, tw, tv);
      if (auto it = wdrc_of.find({Method::Wdrc, tw}); it != wdrc_of.end()) emit(it->second, tw, tv);
      if (lqg_of) emit(*lqg_of, tw, tv);
    }

  json summary{{"format", "drce-summary"},
               {"version", 1},
               {"name", cfg.name},
               {"n_runs", cfg.n_runs},
               {"base_seed", cfg.base_seed},
               {"cells", cells}};

  json timing = json::object();
  if (fs::exists(schedule_dir / "timings.json"))
    timing["offline"] = read_json(schedule_dir / "timings.json").at("schedules");
  if (cfg.scaling) {
    json sc = json::array();
    for (const auto& r : run_scaling(cfg, log))
      sc.push_back({{"T", r.T}, {"seconds", r.seconds}, {"summary", to_json(r.summary)}});
    timing["scaling"] = sc;
  }
  summary["timing"] = timing;
  write_json(cfg.out_dir / "summary.json", summary);
  return summary;
}

namespace {

template <typename F>
int guarded(std::ostream& err, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const ScheduleFormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const LambdaInfeasible& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const NoFeasibleLambda& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const SolverFailure& e) {
    err << "solver failure: " << e.what() << '\n';
    return kExitSolverFailure;
  } catch (const AssumptionViolated& e) {
    err << "solver failure: " << e.what() << '\n';
    return kExitSolverFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitSolverFailure;
  }
}

}  // namespace

int cmd_offline(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cells = run_offline(cfg, out);
    out << "wrote " << cells.size() << " schedules to " << (cfg.out_dir / "schedules").string() << '\n';
    return kExitOk;
  });
}

int cmd_simulate(const ExperimentConfig& cfg, const fs::path& schedule_dir, std::ostream& out,
                 std::ostream& err) {
  return guarded(err, [&] {
    run_simulate(cfg, schedule_dir, out);
    out << "wrote " << (cfg.out_dir / "results.csv").string() << " and "
        << (cfg.out_dir / "summary.json").string() << '\n';
    return kExitOk;
  });
}

int cmd_verify(const fs::path& schedule_file, std::optional<double> tol, std::ostream& out,
               std::ostream& err) {
  return guarded(err, [&] {
    if (!fs::exists(schedule_file)) throw ConfigError("schedule file " + schedule_file.string() + " not found");
    const auto schedule = load_schedule(schedule_file.string());
    const auto reports = verify_schedule(schedule, tol);
    int failed = 0;
    for (const auto& r : reports)
      for (const auto& f : r.failures()) {
        out << "FAIL " << f << '\n';
        ++failed;
      }
    if (failed == 0) {
      out << "ok: " << reports.size() << " stages verified\n";
      return kExitOk;
    }
    out << failed << " check(s) failed\n";
    return kExitVerifyFailed;
  });
}

}  // namespace drce
