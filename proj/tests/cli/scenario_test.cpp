#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "finsler/error.hpp"
#include "runner.hpp"
#include "scenario.hpp"

using namespace finslerflow;
using finsler::ValidationError;

namespace {

json flow_doc() {
  return json::parse(R"({
    "name": "small",
    "seed": 3,
    "structure": {"family": "quartic", "dim": 2, "epsilon": 0.1, "periods": 1.0},
    "grid": {"nodes": 32},
    "initial": {"kind": "sine", "k": [1, 0], "amplitude": 1.0},
    "solver": {"T": 0.01, "snapshot_count": 4},
    "checks": [{"check": "bochner_pointwise", "N": 2}, {"check": "lipschitz_decay"}]
  })");
}

std::string error_path(const json& doc) {
  try {
    parse_scenario(doc);
  } catch (const ValidationError& e) {
    return e.path();
  }
  return "<none>";
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("finslerflow_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Scenario, ParsesFlowScenario) {
  const Scenario sc = parse_scenario(flow_doc());
  EXPECT_EQ(sc.name, "small");
  EXPECT_EQ(sc.seed, 3u);
  ASSERT_TRUE(sc.solver);
  EXPECT_DOUBLE_EQ(sc.solver->T, 0.01);
  EXPECT_EQ(sc.checks.size(), 2u);
  EXPECT_TRUE(sc.needs_trajectory());
  const auto fs = sc.structure();
  EXPECT_EQ(sc.grid(fs).shape[0], 32);
  EXPECT_EQ(sc.grid(fs, 0.5).shape[0], 16);
}

TEST(Scenario, HashFollowsContent) {
  const json a = flow_doc();
  json b = a;
  b["seed"] = 4;
  EXPECT_EQ(parse_scenario(a).hash(), parse_scenario(a).hash());
  EXPECT_NE(parse_scenario(a).hash(), parse_scenario(b).hash());
}

TEST(Scenario, RejectsUnknownKeysWithPath) {
  json d = flow_doc();
  d["grid"]["spacing"] = 0.1;
  EXPECT_EQ(error_path(d), "grid.spacing");
  d = flow_doc();
  d["checks"][1]["radius_typo"] = 1.0;
  EXPECT_EQ(error_path(d), "checks[1].radius_typo");
}

TEST(Scenario, RejectsBadValues) {
  json d = flow_doc();
  d["solver"]["T"] = -1.0;
  EXPECT_EQ(error_path(d), "solver.T");
  d = flow_doc();
  d["checks"][0]["check"] = "no_such_check";
  EXPECT_EQ(error_path(d), "checks[0].check");
  d = flow_doc();
  d.erase("initial");
  EXPECT_EQ(error_path(d), "initial");
  d = flow_doc();
  d["solver"]["snapshots"] = {0.5};
  EXPECT_EQ(error_path(d), "solver.snapshots[0]");
}

TEST(Scenario, TomlInfinityBecomesString) {
  const json j = toml_to_json("[structure]\nfamily = \"euclidean\"\ndim = 2\nperiods = inf\n", "inline");
  EXPECT_EQ(j["structure"]["periods"], "inf");
  EXPECT_TRUE(std::isinf(number(j["structure"]["periods"], "periods")));
  EXPECT_THROW(toml_to_json("a = [", "inline"), ValidationError);
}

TEST(Scenario, DimensionParsing) {
  EXPECT_TRUE(std::isinf(parse_dimension(json("inf"), "N")));
  EXPECT_DOUBLE_EQ(parse_dimension(json(3.0), "N"), 3.0);
  EXPECT_THROW(parse_dimension(json(-1.0), "N"), ValidationError);
}

TEST(Scenario, CheckParametersValidatedBeforeRunning) {
  json d = flow_doc();
  d["checks"] = json::array({{{"check", "li_yau"}, {"theta", 0.0}}});
  const Scenario sc = parse_scenario(d);
  EXPECT_THROW(prepare_check(sc.checks[0], sc, sc.structure(), RunOptions{}), ValidationError);
}

TEST(Runner, WritesReportsAndRendersThem) {
  const auto out = scratch("runner");
  RunOptions opt;
  opt.out = out;
  opt.quiet = true;
  opt.use_cache = false;
  EXPECT_EQ(Runner(parse_scenario(flow_doc()), opt).run(), 0);
  EXPECT_TRUE(std::filesystem::exists(out / "summary.json"));
  EXPECT_TRUE(std::filesystem::exists(out / "scenario.json"));
  EXPECT_TRUE(std::filesystem::exists(out / "trajectory.fft"));
  std::ifstream is(out / "summary.json");
  const json summary = json::parse(is);
  EXPECT_EQ(summary.at("exit_code"), 0);
  const std::string text = render_reports(out);
  EXPECT_NE(text.find("lipschitz_decay"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(out / "report.txt"));
  std::filesystem::remove_all(out);
}

TEST(Runner, FailedAuditStopsTheRun) {
  json d = flow_doc();
  d["structure"] = {{"family", "randers"}, {"dim", 2}, {"periods", 1.0}, {"b", {1.2, 0.0}}};
  const auto out = scratch("audit");
  RunOptions opt;
  opt.out = out;
  opt.quiet = true;
  EXPECT_EQ(Runner(parse_scenario(d), opt).run(), 1);
  EXPECT_FALSE(std::filesystem::exists(out / "trajectory.fft"));
  std::filesystem::remove_all(out);
}
