#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qladder/cli/commands.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qladder::cli;

namespace {

class Workspace : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / ("qladder_cli_" + std::string(info->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  fs::path write_config(const std::string& name, const json& j) {
    const auto path = root_ / name;
    std::ofstream(path) << j.dump(2);
    return path;
  }

  int run(const std::string& command, const fs::path& config, const fs::path& out, const std::string& extra = "") {
    const std::string cmd = std::string(QLADDER_CLI_PATH) + " " + command + " --config " + config.string() +
                            " --out " + out.string() + " " + extra + " > " + (root_ / "stdout.txt").string() +
                            " 2> " + (root_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static json load(const fs::path& p) { return json::parse(slurp(p)); }

  fs::path root_;
};

json reference_params() { return {{"lambda", 2.0}, {"gamma", 1.0}, {"sigma", 5.0}, {"b", 0.342}}; }

}  // namespace

TEST(Config, DefaultsAndRegime) {
  const auto c = parse_config_text(R"({"params": {"b": 0.4}, "phi": 0.3})");
  EXPECT_EQ(c.params.b, 0.4);
  EXPECT_EQ(c.params.lambda, 2.0);
  EXPECT_TRUE(qladder::is_linear(c.regime.spec()));
  ASSERT_TRUE(c.phi.has_value());
}

TEST(Config, UnknownKeyRejected) {
  try {
    parse_config_text(R"({"params": {"bb": 0.4}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("params.bb"), std::string::npos);
  }
}

TEST(Config, OutOfRangeRejected) {
  EXPECT_THROW(parse_config_text(R"({"params": {"b": 1.5}})"), ConfigError);
  EXPECT_THROW(parse_config_text(R"({"phi": 1.0})"), ConfigError);
  EXPECT_THROW(parse_config_text(R"({"params": {"sigma": "five"}})"), ConfigError);
}

TEST(Config, RoundTripsThroughJson) {
  const auto c = parse_config_text(R"({"params": {"b": 0.4, "gamma": 0.9}, "phi": 0.3, "regime": {"kind": "trade_coupled"},
                                       "sweep": {"axes": {"b": {"lo": 0.1, "hi": 0.9, "n": 5}}}, "seed": 7})");
  const auto again = parse_config(to_json(c));
  EXPECT_EQ(to_json(again).dump(), to_json(c).dump());
}

TEST(Io, HashIsStable) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(hex64(fnv1a64("a")), "af63dc4c8601ec8c");
}

TEST_F(Workspace, EquilibriaAtNearAutarky) {
  const auto cfg = write_config("c.json", {{"params", reference_params()}, {"phi", 0.1}});
  ASSERT_EQ(run("equilibria", cfg, root_ / "out"), 0);
  const auto j = load(root_ / "out" / "equilibria.json");
  ASSERT_EQ(j["equilibria"].size(), 1u);
  EXPECT_EQ(j["equilibria"][0]["z_star"], 0.5);
  EXPECT_EQ(j["equilibria"][0]["stability"], "stable");
  const auto m = load(root_ / "out" / "manifest.json");
  EXPECT_EQ(m["command"], "equilibria");
  EXPECT_EQ(m["tool"], "qladder");
  EXPECT_EQ(m["config_hash"].get<std::string>().rfind("fnv1a64:", 0), 0u);
}

TEST_F(Workspace, MalformedConfigExitsWithConfigError) {
  auto params = reference_params();
  params["b"] = 1.5;
  const auto cfg = write_config("c.json", {{"params", params}, {"phi", 0.3}});
  EXPECT_EQ(run("equilibria", cfg, root_ / "out"), 1);
  EXPECT_NE(slurp(root_ / "stderr.txt").find("b"), std::string::npos);
  EXPECT_EQ(run("equilibria", root_ / "missing.json", root_ / "out"), 1);
}

TEST_F(Workspace, MissingPhiIsConfigError) {
  const auto cfg = write_config("c.json", {{"params", reference_params()}});
  EXPECT_EQ(run("equilibria", cfg, root_ / "out"), 1);
}

TEST_F(Workspace, UnwritableOutputIsFilesystemError) {
  std::ofstream(root_ / "blocker") << "x";
  const auto cfg = write_config("c.json", {{"params", reference_params()}, {"phi", 0.3}});
  EXPECT_EQ(run("equilibria", cfg, root_ / "blocker" / "out"), 3);
}

TEST_F(Workspace, ScenarioPasses) {
  const auto cfg = write_config("c.json", {{"scenario", "vi"}});
  ASSERT_EQ(run("scenario", cfg, root_ / "out"), 0);
  const auto j = load(root_ / "out" / "scenario_vi.json");
  for (const auto& a : j["assertions"]) { EXPECT_TRUE(a["passed"].get<bool>()) << a["name"]; }
  EXPECT_TRUE(fs::exists(root_ / "out" / "scenario_vi_path.csv"));
  EXPECT_TRUE(fs::exists(root_ / "out" / "scenario_vi_events.csv"));
}

TEST_F(Workspace, SweepIsDeterministicAcrossThreads) {
  const json cfg = {{"params", reference_params()},
                    {"phi", 0.3},
                    {"sweep", {{"axes", {{"phi", {{"lo", 0.05}, {"hi", 0.95}, {"n", 7}}}, {"b", {{"lo", 0.1}, {"hi", 0.9}, {"n", 5}}}}}}}};
  const auto path = write_config("c.json", cfg);
  ASSERT_EQ(run("sweep", path, root_ / "a", "--threads 1"), 0);
  ASSERT_EQ(run("sweep", path, root_ / "b", "--threads 3"), 0);
  const auto a = slurp(root_ / "a" / "sweep.csv");
  EXPECT_EQ(a, slurp(root_ / "b" / "sweep.csv"));
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 36);
}

TEST_F(Workspace, ManifestReproducesRun) {
  const json cfg = {{"params", reference_params()}, {"phis", {0.2, 0.4}}, {"random_checks", 20}, {"seed", 3}};
  const auto path = write_config("c.json", cfg);
  ASSERT_EQ(run("thresholds", path, root_ / "a"), 0);
  ASSERT_EQ(run("thresholds", root_ / "a" / "manifest.json", root_ / "b"), 0);
  EXPECT_EQ(slurp(root_ / "a" / "thresholds.json"), slurp(root_ / "b" / "thresholds.json"));
  EXPECT_EQ(slurp(root_ / "a" / "threshold_checks.csv"), slurp(root_ / "b" / "threshold_checks.csv"));
  EXPECT_EQ(load(root_ / "a" / "manifest.json")["config_hash"], load(root_ / "b" / "manifest.json")["config_hash"]);
}

TEST_F(Workspace, RegionsWriteLegendAndRaster) {
  const json cfg = {{"params", {{"lambda", 2.0}, {"gamma", 0.9}, {"sigma", 8.0}}},
                    {"regions", {{"phi", {{"lo", 0.0}, {"hi", 1.0}, {"n", 20}}}, {"b", {{"lo", 0.0}, {"hi", 1.0}, {"n", 20}}}}}};
  ASSERT_EQ(run("regions", write_config("c.json", cfg), root_ / "out"), 0);
  const auto raster = slurp(root_ / "out" / "regions.csv");
  EXPECT_EQ(std::count(raster.begin(), raster.end(), '\n'), 401);
  EXPECT_TRUE(load(root_ / "out" / "regions_legend.json").is_object());
}

TEST_F(Workspace, SimulateWritesTrajectory) {
  const json cfg = {{"params", reference_params()}, {"phi", 0.3},
                    {"simulate", {{"z0", 0.6}, {"horizon", 1e5}, {"basins", 11}, {"quality", {{"a1", 0.3}, {"a2", 0.7}, {"horizon", 1e3}}}}}};
  ASSERT_EQ(run("simulate", write_config("c.json", cfg), root_ / "out"), 0);
  const auto s = load(root_ / "out" / "simulate.json");
  EXPECT_NEAR(s["terminal"]["z_star"].get<double>(), 0.9067, 5e-5);
  for (const char* f : {"trajectory.csv", "quality.csv", "basins.csv"}) { EXPECT_TRUE(fs::exists(root_ / "out" / f)) << f; }
}

TEST_F(Workspace, BifurcateWritesBranches) {
  const json cfg = {{"params", {{"lambda", 2.0}, {"gamma", 0.9}, {"sigma", 8.0}, {"b", 0.33}}},
                    {"bifurcate", {{"phi_range", {0.01, 0.99}}, {"step", 1e-3}}}};
  ASSERT_EQ(run("bifurcate", write_config("c.json", cfg), root_ / "out"), 0);
  EXPECT_TRUE(fs::exists(root_ / "out" / "branch_0.csv"));
  EXPECT_TRUE(fs::exists(root_ / "out" / "events.csv"));
  const auto j = load(root_ / "out" / "bifurcation.json");
  EXPECT_TRUE(j.is_object());
}
