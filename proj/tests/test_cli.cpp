#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "gapscore");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = gapscore::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("gapscore_cli_" + std::string(::testing::UnitTest::GetInstance()
                                              ->current_test_info()
                                              ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string at(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, AucOnPerfectRanking) {
  spit(at("s.csv"), "score\n0.9\n0.8\n0.2\n0.1\n");
  spit(at("l.csv"), "label\n1\n1\n0\n0\n");
  const auto r = run({"auc", "--scores", at("s.csv"), "--labels", at("l.csv")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "1.0\n");
}

TEST_F(Cli, BadSynthConfigIsUsageError) {
  const auto r = run({"synth", "--config", "bogus", "--seed", "1", "--out", at("x.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bogus"), std::string::npos);
}

TEST_F(Cli, UnknownFlagOrSubcommand) {
  EXPECT_EQ(run({"synth", "--frobnicate"}).code, 2);
  EXPECT_EQ(run({"launch"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
}

TEST_F(Cli, MissingSeedIsRefused) {
  const auto r = run({"synth", "--config", "uncorrelated", "--out", at("x.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("seed"), std::string::npos);
  EXPECT_FALSE(fs::exists(at("x.csv")));
}

TEST_F(Cli, RuntimeFailureExitsOne) {
  const auto r = run({"score", "--model", at("nope.json"), "--in", at("nope.csv"),
                      "--out", at("o.csv")});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
}

TEST_F(Cli, PipelineEndToEnd) {
  ASSERT_EQ(run({"synth", "--config", "uncorrelated", "--n", "300", "--seed", "3",
                 "--out", at("train.csv")}).code, 0);
  ASSERT_EQ(run({"inject", "--rho", "0.3", "--seed", "4", "--in", at("train.csv"),
                 "--out", at("test.csv")}).code, 0);
  EXPECT_NE(slurp(at("test.csv")).find("NA"), std::string::npos);

  for (const std::string algo : {"iforest", "loda", "egmm"}) {
    const auto model = at(algo + ".json");
    std::vector<std::string> fit{"fit", "--algo", algo, "--train", at("train.csv"),
                                 "--model", model, "--seed", "5"};
    if (algo == "egmm") fit.insert(fit.end(), {"--ks", "2", "--reps", "2"});
    const auto f = run(fit);
    ASSERT_EQ(f.code, 0) << f.err;
    const std::string strategy = algo == "iforest" ? "proportional"
                                 : algo == "loda"  ? "reduced"
                                                   : "marginal";
    const auto s = run({"score", "--model", model, "--in", at("test.csv"), "--out",
                        at(algo + "_scores.csv"), "--strategy", strategy});
    ASSERT_EQ(s.code, 0) << s.err;
    const auto text = slurp(at(algo + "_scores.csv"));
    EXPECT_EQ(text.substr(0, text.find('\n')), "score,fallback");
    const auto a = run({"auc", "--scores", at(algo + "_scores.csv"), "--labels",
                        at("test.csv")});
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_GT(std::stod(a.out), 0.8) << algo;
  }

  const auto imp = run({"impute", "--method", "mice", "--train", at("train.csv"),
                        "--test", at("test.csv"), "--out", at("imp.csv"), "--seed", "6",
                        "--passes", "5", "--burnin", "1"});
  ASSERT_EQ(imp.code, 0) << imp.err;
  EXPECT_EQ(slurp(at("imp.csv")).find("NA"), std::string::npos);
  // Baseline scoring of rows with NA cells is a contract violation.
  const auto bad = run({"score", "--model", at("loda.json"), "--in", at("test.csv"),
                        "--out", at("x.csv"), "--strategy", "baseline"});
  EXPECT_EQ(bad.code, 1);
}

TEST_F(Cli, ExperimentIsByteIdentical) {
  spit(at("e.cfg"),
       "[dataset]\nsynthetic = uncorrelated\nn = 150\n"
       "[algorithms]\niforest = mean, proportional\nloda = mean\n"
       "[grid]\nrho = 0, 0.5\nreplicates = 2\n"
       "[seed]\nmaster = 9\n"
       "[params]\ntrees = 10\nsubsample = 32\nprojections = 10\n");
  ASSERT_EQ(run({"experiment", "--config", at("e.cfg"), "--out", at("r1")}).code, 0);
  ASSERT_EQ(run({"experiment", "--config", at("e.cfg"), "--out", at("r2"), "--jobs", "2"}).code, 0);
  const auto a = slurp(dir_ / "r1" / "results.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir_ / "r2" / "results.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "r1" / "summary.csv"));
}
