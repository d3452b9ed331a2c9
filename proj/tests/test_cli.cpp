#include "thrustopt/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

namespace thrustopt {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "thrustopt");
  std::ostringstream out;
  std::ostringstream err;
  CliRun r;
  r.code = cli::run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("thrustopt_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) { return read_text(p); }

// Value of a "key,value" line in CLI output.
std::string field(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + ",", 0) == 0) return line.substr(key.size() + 1);
  }
  return {};
}

fs::path short_scenario(const fs::path& dir, double t_final) {
  ScenarioConfig c;
  c.thruster_ids = {1, 3, 5, 10, 13, 20, 23};
  c.t_final = t_final;
  const fs::path p = dir / "scenario.json";
  write_json(p, scenario_to_json(c));
  return p;
}

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(cli({"--help"}).code, 0);
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"search", "--n-min", "6"}).code, 2);  // --out is required
  const fs::path d = scratch("usage");
  EXPECT_EQ(cli({"search", "--out", d.string(), "--n-min", "9", "--n-max", "8"}).code, 2);
  EXPECT_EQ(cli({"search", "--out", d.string(), "--threads", "0"}).code, 2);
}

TEST(Cli, AllocateFullSetCosts) {
  auto r = cli({"allocate", "--force", "1", "0", "0", "--torque", "0", "0", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(std::stod(field(r.out, "total_thrust")), 1.0, 1e-9);
  EXPECT_EQ(field(r.out, "full_6dof"), "1");
  r = cli({"allocate", "--force", "0", "0", "0", "--torque", "0", "0", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(std::stod(field(r.out, "total_thrust")), 4.0, 1e-9);
}

TEST(Cli, AllocateRejectsBadAndInfeasibleSets) {
  EXPECT_EQ(cli({"allocate", "--ids", "1,25", "--force", "1", "0", "0"}).code, 2);
  EXPECT_EQ(cli({"allocate", "--ids", "1,x", "--force", "1", "0", "0"}).code, 2);
  const auto r = cli({"allocate", "--ids", "1,2,3,4,5", "--force", "0", "1", "0"});
  EXPECT_EQ(r.code, 3) << r.out << r.err;
}

TEST(Cli, SearchLargestSizeReport) {
  const fs::path d = scratch("search24");
  const auto r = cli({"search", "--n-min", "24", "--n-max", "24", "--out", d.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(d / "summary.csv"), "N,combinations,viable,optimal,f_min\n24,1,1,1,30.000000\n");
  EXPECT_TRUE(fs::exists(d / "optimal_N24.json"));
  EXPECT_TRUE(fs::exists(d / "layout.json"));
  const Json m = Json::parse(slurp(d / "manifest.json"));
  EXPECT_EQ(m["config"]["n_min"], 24);
  const auto ids = read_first_optimal(d / "optimal_N24.json");
  ASSERT_TRUE(ids.has_value());
  EXPECT_EQ(ids->size(), 24u);
}

TEST(Cli, SearchSmallSizes) {
  const fs::path d = scratch("search67");
  const auto r = cli({"search", "--n-min", "6", "--n-max", "7", "--out", d.string(), "--ids-only"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(d / "summary.csv"),
            "N,combinations,viable,optimal,f_min\n6,134596,0,0,--\n7,346104,48,48,68.000000\n");
  if (fs::exists(d / "optimal_N06.json")) {
    EXPECT_TRUE(Json::parse(slurp(d / "optimal_N06.json"))["configurations"].empty());
  }
  EXPECT_EQ(read_first_optimal(d / "optimal_N07.json")->size(), 7u);
}

TEST(Cli, SearchOutputIndependentOfThreads) {
  const fs::path a = scratch("threads1");
  const fs::path b = scratch("threads3");
  ASSERT_EQ(cli({"search", "--n-min", "8", "--n-max", "8", "--threads", "1", "--out", a.string()}).code, 0);
  ASSERT_EQ(cli({"search", "--n-min", "8", "--n-max", "8", "--threads", "3", "--out", b.string()}).code, 0);
  EXPECT_EQ(slurp(a / "summary.csv"), slurp(b / "summary.csv"));
  EXPECT_EQ(slurp(a / "optimal_N08.json"), slurp(b / "optimal_N08.json"));
}

TEST(Cli, SearchWithLayoutFile) {
  const fs::path d = scratch("layout");
  const CubeGeometry g = make_cube_geometry(0.5);
  write_json(d / "layout.json", layout_to_json(g, {}, build_layout(g, {})));
  const auto r = cli({"search", "--layout", (d / "layout.json").string(), "--n-min", "23",
                      "--n-max", "23", "--out", (d / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(d / "out" / "summary.csv").find("23,24,24,"), std::string::npos);
  write_text(d / "bad.json", "{\"side_length\": 0.5}");
  EXPECT_EQ(cli({"search", "--layout", (d / "bad.json").string(), "--out", d.string()}).code, 2);
  EXPECT_EQ(cli({"search", "--layout", (d / "none.json").string(), "--out", d.string()}).code, 1);
}

TEST(Cli, SimulateShortRun) {
  const fs::path d = scratch("sim");
  const fs::path scen = short_scenario(d, 0.1);
  const auto r = cli({"simulate", scen.string(), "--out", (d / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(field(r.out, "docked"), "0");
  const Json res = Json::parse(slurp(d / "out" / "result.json"));
  EXPECT_EQ(res["docked"], false);
  EXPECT_TRUE(res["time_to_dock"].is_null());
  for (const char* f : {"trajectory.csv", "table4.csv", "activity.csv", "rms.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(d / "out" / f)) << f;
  }
  const std::string traj = slurp(d / "out" / "trajectory.csv");
  EXPECT_EQ(traj.substr(0, traj.find('\n')),
            "t,x,y,z,vx,vy,vz,q0,q1,q2,q3,wx,wy,wz,f1,f3,f5,f10,f13,f20,f23,phase");
}

TEST(Cli, SimulateErrors) {
  const fs::path d = scratch("simerr");
  const fs::path scen = short_scenario(d, 0.1);
  EXPECT_EQ(cli({"simulate", (d / "missing.json").string(), "--out", d.string()}).code, 1);
  write_text(d / "typo.json", R"({"thruster_ids": [1, 2], "timing": {"dtt": 0.1}})");
  const auto typo = cli({"simulate", (d / "typo.json").string(), "--out", d.string()});
  EXPECT_EQ(typo.code, 2);
  EXPECT_NE(typo.err.find("timing.dtt"), std::string::npos) << typo.err;
  write_text(d / "broken.json", "{");
  EXPECT_EQ(cli({"simulate", (d / "broken.json").string(), "--out", d.string()}).code, 2);
  EXPECT_EQ(cli({"simulate", scen.string(), "--ids", "1,2,3", "--out", d.string()}).code, 3);
  EXPECT_EQ(cli({"simulate", scen.string(), "--ids", "0,2,3", "--out", d.string()}).code, 2);
}

TEST(Cli, ReplayReproducesOutputs) {
  const fs::path d = scratch("replay");
  const fs::path scen = short_scenario(d, 2.0);
  ASSERT_EQ(cli({"simulate", scen.string(), "--out", (d / "a").string()}).code, 0);
  const auto r = cli({"replay", (d / "a" / "manifest.json").string(), "--out", (d / "b").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"result.json", "trajectory.csv", "table4.csv", "activity.csv", "rms.csv"}) {
    EXPECT_EQ(slurp(d / "a" / f), slurp(d / "b" / f)) << f;
  }
  // A manifest also works as a scenario.
  ASSERT_EQ(cli({"simulate", (d / "a" / "manifest.json").string(), "--out", (d / "c").string()}).code, 0);
  EXPECT_EQ(slurp(d / "a" / "trajectory.csv"), slurp(d / "c" / "trajectory.csv"));
}

TEST(Cli, BatchFromSearchReport) {
  const fs::path d = scratch("batch");
  ASSERT_EQ(cli({"search", "--n-min", "6", "--n-max", "7", "--ids-only", "--out", (d / "s").string()}).code, 0);
  const fs::path scen = short_scenario(d, 1.0);
  const auto r = cli({"batch", "--scenario", scen.string(), "--search-dir", (d / "s").string(),
                      "--n-min", "6", "--n-max", "7", "--trajectories", "--out", (d / "b").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string t4 = slurp(d / "b" / "table4.csv");
  EXPECT_EQ(t4.substr(0, t4.find('\n')), "N,docked,time_to_dock,total_impulse");
  EXPECT_NE(t4.find("6,--,--,--"), std::string::npos) << t4;
  EXPECT_NE(t4.find("\n7,0,--,"), std::string::npos) << t4;
  EXPECT_TRUE(fs::exists(d / "b" / "trajectory_N07.csv"));
  EXPECT_TRUE(fs::exists(d / "b" / "batch.json"));
  const auto missing = cli({"batch", "--scenario", scen.string(), "--search-dir",
                            (d / "s").string(), "--n-min", "8", "--n-max", "8", "--out",
                            (d / "c").string()});
  EXPECT_EQ(missing.code, 1);
}

}  // namespace
}  // namespace thrustopt
