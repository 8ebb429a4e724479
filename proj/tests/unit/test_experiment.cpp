#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "drce/experiment.hpp"
#include "drce/matops.hpp"

using namespace drce;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

json tiny_config() {
  return json::parse(R"({
    "name": "tiny",
    "system": {"builtin": "paper10", "T": 3},
    "true": {
      "w": {"kind": "uquadratic", "a": 0.0, "b": 2.0},
      "v": {"kind": "uquadratic", "a": -0.5, "b": 2.5},
      "x0": {"kind": "uquadratic", "a": 0.8, "b": 1.2}
    },
    "nominal": {"source": "generated", "N": 15, "seed": 7},
    "grid": {"theta_w": [0.1], "theta_v": [0.5], "theta_x0": 1.0},
    "lambda": 20.0,
    "n_runs": 2,
    "base_seed": 5
  })");
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args, std::string* output = nullptr) {
  const std::string cmd = std::string(DRCE_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return -1;
  std::string out;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) out += buf;
  const int status = pclose(pipe);
  if (output) *output = out;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(BuiltinSystem, Paper10) {
  const auto s = builtin_system("paper10", 20);
  EXPECT_EQ(s.T, 20);
  ASSERT_EQ(s.A.rows(), 10);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) EXPECT_EQ(s.A(i, j), (i == j || j == i + 1) ? 0.2 : 0.0);
  for (const MatrixXd* m : {&s.B, &s.C, &s.Q, &s.Qf, &s.R}) EXPECT_EQ(*m, MatrixXd::Identity(10, 10));
  EXPECT_EQ(builtin_system("paper10-shift", 5).A(3, 4), 1.0);
  EXPECT_THROW(builtin_system("nope", 5), ConfigError);
}

TEST(Config, ParsesAndValidates) {
  const auto c = config_from_json(tiny_config(), "/base");
  EXPECT_EQ(c.name, "tiny");
  EXPECT_EQ(c.system.T, 3);
  EXPECT_EQ(c.lambda.mode, LambdaSpec::Mode::Fixed);
  EXPECT_EQ(c.lambda.value, 20.0);
  EXPECT_EQ(c.truth.w.kind, DistributionSpec::Kind::UQuadratic);
  EXPECT_EQ(c.truth.w.dim, 10);
  EXPECT_EQ(c.out_dir, fs::path("/base/out"));

  auto j = tiny_config();
  j["lambda"] = {{"mode", "select"}};
  EXPECT_EQ(config_from_json(j).lambda.mode, LambdaSpec::Mode::Select);

  j = tiny_config();
  j.erase("lambda");
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = tiny_config();
  j["n_runs"] = 0;
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = tiny_config();
  j["grid"]["theta_v"] = json::array();
  EXPECT_THROW(config_from_json(j), ConfigError);
}

TEST(Nominal, GeneratedIsDeterministicAndHasNoiseJitter) {
  const auto c = config_from_json(tiny_config());
  const auto a = build_nominal(c), b = build_nominal(c);
  ASSERT_EQ(a.w_cov.size(), 3u);
  ASSERT_EQ(a.v_cov.size(), 4u);
  EXPECT_EQ(a.w_cov[0], b.w_cov[0]);
  EXPECT_EQ(a.x0_mean, b.x0_mean);
  EXPECT_TRUE(is_pd(a.v_cov[0]));
  EXPECT_TRUE(validate(c.system, a, RobustnessConfig{0.1, 0.5, 1.0, 20.0}).empty());
}

TEST(Offline, FileNames) {
  EXPECT_EQ(schedule_file_name(Method::WdrCe, 0.1, 2.0), "schedules/wdrce_tw0.1_tv2.json");
  EXPECT_EQ(schedule_file_name(Method::Wdrc, 0.05, 2.0), "schedules/wdrc_tw0.05.json");
  EXPECT_EQ(schedule_file_name(Method::Lqg, 0.05, 2.0), "schedules/lqg.json");
}

TEST(Cli, RunProducesGoldenOutputsAndIsDeterministic) {
  TempDir dir("drce_test_cli_run");
  std::ofstream(dir.path / "tiny.json") << tiny_config().dump(2);
  const auto out1 = dir.path / "a", out2 = dir.path / "b";
  ASSERT_EQ(run_cli("run --config " + (dir.path / "tiny.json").string() + " --out " + out1.string()), 0);
  ASSERT_EQ(run_cli("run --config " + (dir.path / "tiny.json").string() + " --out " + out2.string()), 0);

  // One schedule per method for a 1x1 grid.
  for (const char* f : {"schedules/wdrce_tw0.1_tv0.5.json", "schedules/wdrc_tw0.1.json", "schedules/lqg.json"}) {
    ASSERT_TRUE(fs::exists(out1 / f)) << f;
    EXPECT_EQ(slurp(out1 / f), slurp(out2 / f)) << f;
  }

  const auto csv = lines(slurp(out1 / "results.csv"));
  ASSERT_EQ(csv.size(), 1u + 3u * 2u);
  EXPECT_EQ(csv[0], kCsvHeader);
  int per_method[3] = {0, 0, 0};
  for (std::size_t i = 1; i < csv.size(); ++i) {
    const auto m = csv[i].substr(0, csv[i].find(','));
    per_method[static_cast<int>(method_from_string(m))]++;
  }
  for (int k : per_method) EXPECT_EQ(k, 2);

  const json s = json::parse(slurp(out1 / "summary.json"));
  EXPECT_EQ(s.at("format"), "drce-summary");
  EXPECT_EQ(s.at("n_runs"), 2);
  ASSERT_EQ(s.at("cells").size(), 3u);
  for (const auto& cell : s.at("cells")) {
    for (const char* k : {"method", "theta_w", "theta_v", "theta_x0", "lambda", "cost", "bound_value",
                          "guaranteed_bound"})
      EXPECT_TRUE(cell.contains(k)) << k;
    EXPECT_TRUE(cell.at("cost").contains("mean"));
    EXPECT_TRUE(cell.at("cost").contains("std"));
  }
  const json m = json::parse(slurp(out1 / "manifest.json"));
  EXPECT_EQ(m.at("format"), "drce-manifest");
  EXPECT_EQ(m.at("cells").size(), 3u);

  // Costs are reproducible; wall times are not, so compare the cost column only.
  const auto csv2 = lines(slurp(out2 / "results.csv"));
  ASSERT_EQ(csv2.size(), csv.size());
  for (std::size_t i = 1; i < csv.size(); ++i)
    EXPECT_EQ(csv[i].substr(0, csv[i].rfind(',')), csv2[i].substr(0, csv2[i].rfind(',')));
}

TEST(Cli, VerifyDetectsCorruption) {
  TempDir dir("drce_test_cli_verify");
  std::ofstream(dir.path / "tiny.json") << tiny_config().dump(2);
  ASSERT_EQ(run_cli("offline --config " + (dir.path / "tiny.json").string() + " --out " + dir.path.string() +
                    " --method wdrce"),
            0);
  const auto good = dir.path / "schedules" / "wdrce_tw0.1_tv0.5.json";
  std::string out;
  EXPECT_EQ(run_cli("verify " + good.string(), &out), 0) << out;

  // Negate one eigenvalue of the stage-1 noise covariance.
  json j = json::parse(slurp(good));
  MatrixXd sv = matrix_from_json(j.at("stages").at(1).at("sigma_v"));
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sv);
  VectorXd ev = es.eigenvalues();
  ev(ev.size() - 1) = -ev(ev.size() - 1);
  sv = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  j["stages"][1]["sigma_v"] = matrix_to_json(sv);
  const auto bad = dir.path / "negated.json";
  std::ofstream(bad) << j.dump();
  EXPECT_EQ(run_cli("verify " + bad.string(), &out), 1);
  EXPECT_NE(out.find("stage 1"), std::string::npos) << out;

  // Truncated file: explicit parse error, config-error exit code.
  const auto text = slurp(good);
  std::ofstream(dir.path / "truncated.json") << text.substr(0, text.size() / 2);
  EXPECT_EQ(run_cli("verify " + (dir.path / "truncated.json").string(), &out), kExitConfigError);
  EXPECT_NE(out.find("parse"), std::string::npos) << out;

  EXPECT_EQ(run_cli("verify " + (dir.path / "missing.json").string()), kExitConfigError);

  // A 1e-12 tolerance is far below what the solver certifies.
  EXPECT_EQ(run_cli("verify " + good.string() + " --tol 1e-12", &out), 1);
  EXPECT_NE(out.find("duality gap"), std::string::npos) << out;
}

TEST(Cli, ConfigErrorsExitTwo) {
  TempDir dir("drce_test_cli_config");
  auto j = tiny_config();
  j["lambda"] = 0.5;  // below lambda_hat
  std::ofstream(dir.path / "bad.json") << j.dump();
  std::string out;
  EXPECT_EQ(run_cli("offline --config " + (dir.path / "bad.json").string() + " --out " + dir.path.string(), &out),
            kExitConfigError)
      << out;
  EXPECT_EQ(run_cli("offline --config " + (dir.path / "nope.json").string()), kExitConfigError);
  EXPECT_EQ(run_cli("simulate --config " + (dir.path / "bad.json").string() + " --out " +
                    (dir.path / "empty").string()),
            kExitConfigError);
  EXPECT_EQ(run_cli("frobnicate"), kExitConfigError);
}
