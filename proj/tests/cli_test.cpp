// End-to-end tests of the nortasp_cli binary: exit codes, diagnostics and
// artifact shapes.

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include "nortasp/io.hpp"

namespace nortasp {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("nortasp_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string& args) const {
    const std::string cmd = "cd '" + dir_.string() + "' && '" + NORTASP_CLI_PATH + "' " + args + " 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = io::read_file(path("stderr.txt"));
    return r;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string read(const std::string& name) const { return io::read_file(path(name)); }
  void write(const std::string& name, const std::string& text) const { io::write_file(path(name), text); }

  // make-instance -> fit -> generate on a small default instance.
  void prepare(std::size_t count = 200) const {
    write("spec.json", "{\"n_substations\": 8, \"n_flooded\": 4}\n");
    ASSERT_EQ(run("-q --seed 3 make-instance --spec spec.json --out grid.json train.csv").code, 0);
    ASSERT_EQ(run("-q fit train.csv --out model.json").code, 0);
    ASSERT_EQ(run("-q --seed 4 generate model.json --count " + std::to_string(count) + " --out synth.csv").code, 0);
  }

  fs::path dir_;
};

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

TEST_F(CliTest, UsageErrorsExitWithInputCode) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("fit").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(CliTest, FitRejectsSingleRow) {
  write("one.csv", "1,2\n0,1\n");
  const Result r = run("fit one.csv --out model.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(path("model.json")));
}

TEST_F(CliTest, MalformedCsvReportsLineAndColumn) {
  write("bad.csv", "1,2\n0,1\n3,oops\n");
  const Result r = run("fit bad.csv --out model.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.csv:3:2:"), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingInputFileIsInputError) {
  const Result r = run("fit nowhere.csv --out model.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nowhere.csv"), std::string::npos) << r.err;
}

TEST_F(CliTest, GenerateDefaultsTo800AndRejectsZero) {
  prepare();
  ASSERT_EQ(run("-q generate model.json --out default.csv").code, 0);
  EXPECT_EQ(count_lines(read("default.csv")), 801u);
  EXPECT_EQ(run("generate model.json --count 0 --out zero.csv").code, 2);
}

TEST_F(CliTest, GenerateIsSeedDeterministic) {
  prepare();
  ASSERT_EQ(run("-q --seed 9 generate model.json --count 50 --out a.csv").code, 0);
  ASSERT_EQ(run("-q generate model.json --count 50 --out b.csv --seed 9").code, 0);
  ASSERT_EQ(run("-q --seed 10 generate model.json --count 50 --out c.csv").code, 0);
  EXPECT_EQ(read("a.csv"), read("b.csv"));
  EXPECT_NE(read("a.csv"), read("c.csv"));
}

TEST_F(CliTest, ValidateAgainstItselfIsZero) {
  prepare();
  ASSERT_EQ(run("-q validate train.csv train.csv --out v.json").code, 0);
  const io::json v = io::parse_json(read("v.json"), "v.json");
  EXPECT_EQ(v["summary"]["statistics"].size(), 7u);
  for (const auto& d : v["dimensions"]) EXPECT_EQ(d["emd"].get<double>(), 0.0);
  for (const auto& p : v["pairs"]) EXPECT_EQ(p["abs_error"].get<double>(), 0.0);
}

TEST_F(CliTest, ValidateRejectsDimensionMismatch) {
  prepare();
  write("narrow.csv", "a\n1\n2\n");
  EXPECT_EQ(run("validate train.csv narrow.csv --out v.json").code, 2);
}

TEST_F(CliTest, SolveAndEvaluateWriteTableLayout) {
  prepare();
  ASSERT_EQ(run("-q solve grid.json train.csv --budgets 0,3,6 --out plan.json").code, 0);
  const io::json plans = io::parse_json(read("plan.json"), "plan.json");
  ASSERT_EQ(plans["plans"].size(), 3u);
  EXPECT_TRUE(plans.contains("manifest"));
  EXPECT_TRUE(fs::exists(path("plan.json.manifest.json")));

  ASSERT_EQ(run("-q evaluate grid.json plan.json synth.csv --out report.json").code, 0);
  const std::string csv = read("report.csv");
  EXPECT_EQ(count_lines(csv), 9u);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "statistic,0,3,6");
  EXPECT_EQ(csv.find("SO estimate,"), csv.find('\n') + 1);
  const io::json rep = io::parse_json(read("report.json"), "report.json");
  EXPECT_EQ(rep["statistics"][0], "SO estimate");
  EXPECT_EQ(rep["table"].size(), 8u);
  EXPECT_EQ(rep["columns"][0]["count"], 200);
  for (std::size_t b = 0; b < 3; ++b) {
    EXPECT_EQ(rep["table"][0][b].get<double>(), plans["plans"][b]["so_estimate"].get<double>());
  }
  EXPECT_TRUE(fs::exists(path("report.csv.manifest.json")));
}

TEST_F(CliTest, SolveDefaultsToGridBudgetAndRejectsBothBudgetFlags) {
  prepare();
  ASSERT_EQ(run("-q solve grid.json train.csv --out plan.json").code, 0);
  const io::json grid = io::parse_json(read("grid.json"), "grid.json");
  const io::json plans = io::parse_json(read("plan.json"), "plan.json");
  EXPECT_EQ(plans["plans"][0]["budget"], grid["budget"]);
  EXPECT_EQ(run("solve grid.json train.csv --budget 1 --budgets 1,2 --out p.json").code, 2);
  EXPECT_EQ(run("solve grid.json train.csv --budget -1 --out p.json").code, 2);
}

TEST_F(CliTest, NodeLimitExitsWithResourceCode) {
  prepare();
  const Result r = run("solve grid.json train.csv --budget 1000 --node-limit 1 --out plan.json");
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("greedy"), std::string::npos) << r.err;
  EXPECT_EQ(run("-q solve grid.json train.csv --budget 1000 --method greedy --out plan.json").code, 0);
}

TEST_F(CliTest, ScenarioColumnsMustMatchGrid) {
  prepare();
  write("other.csv", "x,y,z,w\n0,0,0,0\n1,1,1,1\n");
  const Result r = run("solve grid.json other.csv --budget 1 --out plan.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("other.csv"), std::string::npos) << r.err;
}

TEST_F(CliTest, SweepUsesNineBudgetsByDefault) {
  prepare();
  ASSERT_EQ(run("-q sweep grid.json train.csv synth.csv --out sweep.json").code, 0);
  const io::json rep = io::parse_json(read("sweep.json"), "sweep.json");
  ASSERT_EQ(rep["budgets"].size(), 9u);
  EXPECT_EQ(rep["budgets"][0].get<double>(), 0.0);
  const auto& so = rep["table"][0];
  for (std::size_t k = 1; k < so.size(); ++k) EXPECT_LE(so[k].get<double>(), so[k - 1].get<double>());
  EXPECT_EQ(so[8].get<double>(), 0.0);
}

TEST_F(CliTest, MakeInstanceValidatesSpec) {
  write("spec.json", "{\"n_substations\": 4, \"flooded\": 2}\n");
  Result r = run("make-instance --spec spec.json --out g.json s.csv");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("flooded: unknown field"), std::string::npos) << r.err;
  write("spec.json", "{\"n_substations\": 4, \"n_flooded\": 5}\n");
  EXPECT_EQ(run("make-instance --spec spec.json --out g.json s.csv").code, 2);
  write("spec.json", "{\"topology\": \"star\"}\n");
  EXPECT_EQ(run("make-instance --spec spec.json --out g.json s.csv").code, 2);
  write("spec.json", "{\"n_substations\": 4,");
  EXPECT_EQ(run("make-instance --spec spec.json --out g.json s.csv").code, 2);
}

TEST_F(CliTest, SeedFlagOverridesSpecSeed) {
  write("spec.json", "{\"seed\": 1}\n");
  ASSERT_EQ(run("-q make-instance --spec spec.json --out a.json a.csv").code, 0);
  ASSERT_EQ(run("-q --seed 1 make-instance --spec spec.json --out b.json b.csv").code, 0);
  ASSERT_EQ(run("-q --seed 2 make-instance --spec spec.json --out c.json c.csv").code, 0);
  EXPECT_EQ(read("a.csv"), read("b.csv"));
  EXPECT_NE(read("a.csv"), read("c.csv"));
}

TEST_F(CliTest, QuietSuppressesProgress) {
  write("spec.json", "{}\n");
  EXPECT_FALSE(run("make-instance --spec spec.json --out g.json s.csv").err.empty());
  EXPECT_TRUE(run("-q make-instance --spec spec.json --out g.json s.csv").err.empty());
}

}  // namespace
}  // namespace nortasp
