#include "oracles.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <sstream>

using namespace catnet;
namespace fs = std::filesystem;

namespace {

const std::string scenario_dir = CATNET_SCENARIO_DIR;

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome catnet_cli(const std::string &args) {
  const fs::path log = fs::temp_directory_path() / "catnet_cli_stdout.txt";
  const std::string cmd = std::string(CATNET_CLI_PATH) + " " + args + " > " + log.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  o.out = ss.str();
  return o;
}

std::string read_file(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string &name) {
  const fs::path d = fs::temp_directory_path() / ("catnet_test_" + name);
  fs::remove_all(d);
  return d;
}

fs::path write_config(const std::string &name, const json &j) {
  const fs::path p = fs::temp_directory_path() / ("catnet_test_" + name + ".json");
  write_text(p, dump_json(j));
  return p;
}

} // namespace

TEST(Cli, RunWritesOutputs) {
  const auto dir = fresh_dir("run");
  const auto o = catnet_cli("--out-dir " + dir.string() + " run " + scenario_dir + "/single_cusp_ramp.json");
  ASSERT_EQ(o.code, 0);
  for (const char *f : {"config.json", "events.json", "cascade.json", "timeseries.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  const auto events = json::parse(read_file(dir / "events.json"));
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0]["mechanism"], "fold_disappearance");
  const auto csv = read_file(dir / "timeseries.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,alpha[0],alpha[1],x[0],phi,in_A[0]");
  // The echoed config reloads to the same scenario.
  EXPECT_EQ(load_config(dir / "config.json").name, load_config(scenario_dir + "/single_cusp_ramp.json").name);
}

TEST(Cli, TimeseriesMembershipMatchesEvents) {
  const auto dir = fresh_dir("run_json");
  ASSERT_EQ(catnet_cli("--format json --out-dir " + dir.string() + " run " + scenario_dir +
                       "/two_cusp_ramp.json")
                .code,
            0);
  const auto events = json::parse(read_file(dir / "events.json"));
  const auto series = json::parse(read_file(dir / "timeseries.json"));
  const double tau = json::parse(read_file(dir / "cascade.json"))["tau_sync"].get<double>();
  ASSERT_FALSE(events.empty());
  for (const auto &row : series) {
    const double t = row["t"].get<double>();
    for (std::size_t i = 0; i < row["in_A"].size(); ++i) {
      bool has_event = false;
      for (const auto &e : events)
        has_event |= e["sector"].get<std::size_t>() == i && e["time"].get<double>() <= t &&
                     e["time"].get<double>() > t - tau;
      EXPECT_EQ(row["in_A"][i].get<int>() == 1, has_event) << "t=" << t << " sector " << i;
    }
  }
  // Every event time is a row of the series.
  for (const auto &e : events) {
    const bool found = std::any_of(series.begin(), series.end(),
                                   [&](const json &row) { return row["t"] == e["time"]; });
    EXPECT_TRUE(found);
  }
}

TEST(Cli, DiagnoseDoubleCuspPoint) {
  const auto o = catnet_cli("diagnose " + scenario_dir + "/two_cusp.json --at 0 0 0 0");
  ASSERT_EQ(o.code, 0);
  const auto j = json::parse(o.out);
  ASSERT_EQ(j["equilibria"].size(), 1u);
  EXPECT_EQ(j["equilibria"][0]["diagnostics"]["corank"], 2);
  EXPECT_EQ(j["equilibria"][0]["diagnostics"]["dpi_codim"], 2);
  EXPECT_EQ(catnet_cli("diagnose " + scenario_dir + "/two_cusp.json --at 0 0").code, 2);
}

TEST(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(catnet_cli("run /nonexistent.json").code, 2);
  EXPECT_EQ(catnet_cli("").code, 2);
  EXPECT_EQ(catnet_cli("frobnicate").code, 2);
  EXPECT_EQ(catnet_cli("--format xml run " + scenario_dir + "/single_cusp_ramp.json").code, 2);
  json bad = json::parse(read_file(scenario_dir + "/two_cusp_diffusion.json"));
  bad["control_path"]["covariance"] = json::parse("[[1,1,0,0],[1,1,0,0],[0,0,1,0],[0,0,0,1]]");
  EXPECT_EQ(catnet_cli("run " + write_config("noncovariance", bad).string()).code, 2);
}

TEST(Cli, EscapingScenarioExitsThree) {
  const json j = json::parse(R"({
    "schema_version": 1,
    "system": {"sectors": ["fold"]},
    "control_path": {"type": "ramp", "alpha_start": [-1], "alpha_end": [1], "horizon": 1, "dt": 0.01},
    "initial_state": {"x0": [1]},
    "cascade": {"threshold": {"count": 1}, "escape_radius": 20, "box": {"lo": -20, "hi": 20}}
  })");
  const auto dir = fresh_dir("escape");
  EXPECT_EQ(catnet_cli("--out-dir " + dir.string() + " run " + write_config("escape", j).string()).code, 3);
}

TEST(Cli, EnsembleRerunIsByteIdentical) {
  json j = json::parse(read_file(scenario_dir + "/two_cusp_diffusion.json"));
  j["control_path"]["horizon"] = 1.0;
  j["ensemble"]["replicates"] = 12;
  j["ensemble"]["replicate_logs"] = true;
  const auto cfg = write_config("ensemble", j).string();
  // Same output directory both times: the echoed config records it.
  const auto a = fresh_dir("ens_a"), b = fresh_dir("ens_b");
  ASSERT_EQ(catnet_cli("--out-dir " + a.string() + " --jobs 1 ensemble " + cfg).code, 0);
  fs::rename(a, b);
  ASSERT_EQ(catnet_cli("--out-dir " + a.string() + " --jobs 2 ensemble " + cfg).code, 0);
  int files = 0;
  for (const auto &entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file())
      continue;
    ++files;
    EXPECT_EQ(read_file(entry.path()), read_file(b / fs::relative(entry.path(), a))) << entry.path();
  }
  EXPECT_EQ(files, 13);
  const auto c = fresh_dir("ens_c");
  ASSERT_EQ(catnet_cli("--seed 7 --out-dir " + c.string() + " ensemble " + cfg).code, 0);
  EXPECT_NE(read_file(a / "summary.json"), read_file(c / "summary.json"));
}

TEST(Cli, CopulaFitOnSummary) {
  const Matrix m = sample(CopulaModel(CopulaFamily::Clayton, 3.0), 2, 200, 3);
  json digests = json::array();
  for (int r = 0; r < m.rows(); ++r)
    digests.push_back(json{{"aborted", false}, {"max_jump", {m(r, 0), m(r, 1)}}});
  const auto path = write_config("summary", json{{"digests", digests}});
  const auto o = catnet_cli("copula-fit " + path.string());
  ASSERT_EQ(o.code, 0);
  const auto fit = json::parse(o.out);
  ASSERT_EQ(fit["fits"].size(), 2u);
  EXPECT_EQ(fit["fits"][0]["family"], "clayton");
  EXPECT_NEAR(fit["fits"][0]["theta"].get<double>(), 3.0, 1.0);

  json few = json{{"digests", json::array()}};
  for (int r = 0; r < 3; ++r)
    few["digests"].push_back(digests[r]);
  EXPECT_EQ(catnet_cli("copula-fit " + write_config("few", few).string()).code, 1);
  EXPECT_EQ(catnet_cli("copula-fit /nonexistent.json").code, 2);
}

TEST(Cli, StabilityCommand) {
  const auto dir = fresh_dir("stability");
  const auto o = catnet_cli("--out-dir " + dir.string() + " stability " + scenario_dir +
                            "/coupled_cusp_stability.json --trials 5");
  ASSERT_EQ(o.code, 0);
  const auto j = json::parse(o.out);
  EXPECT_EQ(j["trials"], 5);
  EXPECT_EQ(j["reference_partition"], json::parse("[[0, 1]]"));
  EXPECT_TRUE(fs::exists(dir / "stability.json"));
}
