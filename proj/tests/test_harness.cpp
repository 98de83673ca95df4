#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gapscore/errors.hpp"
#include "gapscore/harness.hpp"
#include "oracles.hpp"

using namespace gapscore;

namespace {

EvalRecord rec(std::string ds, Strategy s, double rho, std::size_t rep, double a,
               Algorithm alg = Algorithm::kIforest) {
  return {std::move(ds), Method::make(alg, s), rho, rep, 0, a};
}

ExperimentConfig tiny_config() {
  std::istringstream in(R"(
[dataset]
synthetic = uncorrelated, mixture
n = 200

[algorithms]
iforest = mean, mice, proportional, reduced
loda = mean, reduced
egmm = marginal

[grid]
rho = 0, 0.3, 0.6
replicates = 2

[seed]
master = 5

[params]
trees = 20
subsample = 64
projections = 20
ks = 2
reps = 2
passes = 6
burnin = 2
jobs = 2
)");
  return parse_experiment_config(in);
}

}  // namespace

TEST(Auc, SpecExamples) {
  const std::vector<double> s1{0.9, 0.8, 0.2, 0.1};
  const std::vector<int> y1{1, 1, 0, 0};
  EXPECT_EQ(auc(s1, y1), 1.0);
  const std::vector<double> s2(6, 0.3);
  const std::vector<int> y2{1, 0, 1, 0, 0, 0};
  EXPECT_EQ(auc(s2, y2), 0.5);
  const std::vector<double> s3{0.7, 0.4, 0.6, 0.4};
  const std::vector<int> y3{1, 0, 1, 0};
  EXPECT_EQ(auc(s3, y3), 1.0);
  EXPECT_EQ(auc(s3, y3), oracle::auc_pairs(s3, y3));
  // One anomaly tied with one nominal: (1 + 1 + 0.5 + 1) / 4.
  const std::vector<double> s4{0.7, 0.4, 0.4, 0.3};
  const std::vector<int> y4{1, 1, 0, 0};
  EXPECT_EQ(auc(s4, y4), 0.875);
  EXPECT_EQ(oracle::auc_pairs(s4, y4), 0.875);
}

TEST(Auc, MatchesPairEnumeration) {
  SeededRng rng(91);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.index(49);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.index(8)) / 4.0;  // plenty of ties
      y[i] = i < 1 ? 1 : (i < 2 ? 0 : static_cast<int>(rng.index(2)));
    }
    EXPECT_NEAR(auc(s, y), oracle::auc_pairs(s, y), 1e-12);
  }
}

TEST(Auc, SingleClassIsUndefined) {
  const std::vector<double> s{1, 2};
  const std::vector<int> y{1, 1};
  EXPECT_THROW(auc(s, y), UndefinedAucError);
}

TEST(Method, SupportedPairs) {
  EXPECT_NO_THROW(Method::make(Algorithm::kIforest, Strategy::kProportional));
  EXPECT_THROW(Method::make(Algorithm::kLoda, Strategy::kProportional), ConfigError);
  EXPECT_THROW(Method::make(Algorithm::kEgmm, Strategy::kReduced), ConfigError);
  EXPECT_THROW(Method::make(Algorithm::kIforest, Strategy::kMarginal), ConfigError);
  EXPECT_TRUE(supports(Algorithm::kLoda, Strategy::kMice));
  EXPECT_EQ(parse_strategy(strategy_name(Strategy::kMarginal)), Strategy::kMarginal);
  EXPECT_THROW(parse_algorithm("svm"), ConfigError);
}

TEST(RelativeAuc, DivisionAndMeans) {
  std::vector<EvalRecord> r{
      rec("a", Strategy::kMean, 0.0, 0, 0.9),  rec("a", Strategy::kMean, 0.4, 0, 0.72),
      rec("a", Strategy::kMean, 0.0, 1, 0.8),  rec("a", Strategy::kMean, 0.4, 1, 0.72),
      rec("a", Strategy::kReduced, 0.4, 0, 0.45)};
  const auto rel = relative_auc_records(r);
  std::map<std::tuple<Strategy, double, std::size_t>, double> got;
  for (const auto& x : rel) got[{x.method.strategy(), x.rho, x.replicate}] = x.relative;
  EXPECT_EQ(got.at({Strategy::kMean, 0.0, 0}), 1.0);
  EXPECT_NEAR(got.at({Strategy::kMean, 0.4, 0}), 0.8, 1e-15);
  EXPECT_NEAR(got.at({Strategy::kMean, 0.4, 1}), 0.9, 1e-15);
  // Reduced has no rho = 0 row of its own; the mean baseline is used.
  EXPECT_NEAR(got.at({Strategy::kReduced, 0.4, 0}), 0.5, 1e-15);

  const auto means = relative_auc(r);
  EXPECT_NEAR(means.at({"a", Method::make(Algorithm::kIforest, Strategy::kMean), 0.4}),
              0.85, 1e-12);
}

TEST(RelativeAuc, MissingBaselineNamesGroup) {
  std::vector<EvalRecord> r{rec("wine", Strategy::kMean, 0.4, 3, 0.7)};
  try {
    relative_auc_records(r);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("wine"), std::string::npos);
  }
}

TEST(Summary, IntervalsAndGrouping) {
  std::vector<EvalRecord> r;
  SeededRng rng(92);
  for (const char* ds : {"a", "b"})
    for (std::size_t rep = 0; rep < 5; ++rep) {
      r.push_back(rec(ds, Strategy::kMean, 0.0, rep, 0.9));
      r.push_back(rec(ds, Strategy::kMice, 0.0, rep, 0.9));
      for (double rho : {0.2, 0.5}) {
        r.push_back(rec(ds, Strategy::kMean, rho, rep, rng.uniform(0.5, 0.9)));
        r.push_back(rec(ds, Strategy::kMice, rho, rep, rng.uniform(0.5, 0.9)));
      }
    }
  const auto rows = summarize_decay(r);
  EXPECT_EQ(rows.size(), 6u);

  // Re-aggregate the raw records by hand.
  std::map<std::pair<Strategy, double>, std::vector<double>> cells;
  for (const auto& x : r) {
    double base = 0.0;
    for (const auto& y : r)
      if (y.dataset == x.dataset && y.replicate == x.replicate && y.rho == 0.0 &&
          y.method.strategy() == Strategy::kMean)
        base = y.auc;
    cells[{x.method.strategy(), x.rho}].push_back(x.auc / base);
  }
  for (const auto& row : rows) {
    const auto& v = cells.at({row.method.strategy(), row.rho});
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    const double half = 1.96 * std::sqrt(ss / static_cast<double>(v.size() - 1)) /
                        std::sqrt(static_cast<double>(v.size()));
    EXPECT_EQ(row.count, 10u);
    EXPECT_NEAR(row.mean, m, 1e-12);
    EXPECT_NEAR(row.ci_lo, m - half, 1e-12);
    EXPECT_NEAR(row.ci_hi, m + half, 1e-12);
  }

  const auto single = summarize_decay({rec("a", Strategy::kMean, 0.0, 0, 0.7)});
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].ci_lo, single[0].ci_hi);
}

TEST(Config, ParsesSections) {
  const auto cfg = tiny_config();
  ASSERT_EQ(cfg.datasets.size(), 2u);
  EXPECT_EQ(cfg.datasets[0].name, "uncorrelated");
  EXPECT_EQ(cfg.datasets[1].synth->kind, SynthKind::kMixture);
  EXPECT_EQ(cfg.datasets[0].synth->n, 200u);
  EXPECT_EQ(cfg.methods.size(), 7u);
  EXPECT_EQ(cfg.rho_grid, (std::vector<double>{0.0, 0.3, 0.6}));
  EXPECT_EQ(cfg.replicates, 2u);
  EXPECT_EQ(cfg.master_seed, 5u);
  EXPECT_EQ(cfg.params.egmm.ks, (std::vector<std::size_t>{2}));
  EXPECT_EQ(cfg.jobs, 2u);
}

TEST(Config, RejectsBadInput) {
  auto bad = [](const std::string& text) {
    std::istringstream in(text);
    return parse_experiment_config(in);
  };
  EXPECT_THROW(bad("[dataset]\nsynthetic = uncorrelated\n[algorithms]\nloda = proportional\n[seed]\nmaster=1\n"),
               ConfigError);
  EXPECT_THROW(bad("[dataset]\nsynthetic = bogus\n[algorithms]\nloda = mean\n[seed]\nmaster=1\n"),
               ConfigError);
  EXPECT_THROW(bad("[dataset]\nsynthetic = uncorrelated\n[algorithms]\nloda = mean\n[grid]\ncolour = red\n"),
               ConfigError);
  // A grid without 0 has no baseline.
  EXPECT_THROW(bad("[dataset]\nsynthetic = uncorrelated\n[algorithms]\nloda = mean\n[grid]\nrho = 0.2\n[seed]\nmaster=1\n"),
               ConfigError);
}

TEST(Experiment, RecordsDeterministicAndComplete) {
  const auto cfg = tiny_config();
  const auto a = run_experiment(cfg);
  EXPECT_EQ(a.size(), 2u * 2u * 3u * 7u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end(), record_less));

  auto serial = cfg;
  serial.jobs = 1;
  const auto b = run_experiment(serial);
  std::ostringstream sa, sb;
  write_records(a, sa);
  write_records(b, sb);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(sa.str().substr(0, sa.str().find('\n')),
            "dataset,algorithm,strategy,rho,replicate,seed,auc");

  // No missing values at rho = 0: the imputing and native strategies agree.
  std::map<std::tuple<std::string, std::size_t, Algorithm>, std::vector<double>> zero;
  for (const auto& r : a)
    if (r.rho == 0.0) zero[{r.dataset, r.replicate, r.method.algorithm()}].push_back(r.auc);
  for (const auto& [key, v] : zero)
    if (std::get<2>(key) != Algorithm::kIforest)
      for (double x : v) EXPECT_EQ(x, v.front());
  for (const auto& r : a)
    if (r.rho == 0.0 && r.method.algorithm() == Algorithm::kIforest &&
        r.method.strategy() != Strategy::kReduced) {
      for (const auto& s : a)
        if (s.rho == 0.0 && s.dataset == r.dataset && s.replicate == r.replicate &&
            s.method == Method::make(Algorithm::kIforest, Strategy::kMean))
          EXPECT_EQ(r.auc, s.auc);
    }
}

TEST(Experiment, WritesResultFiles) {
  auto cfg = tiny_config();
  cfg.datasets.resize(1);
  cfg.replicates = 1;
  const auto dir = std::filesystem::temp_directory_path() / "gapscore_harness_test";
  std::filesystem::remove_all(dir);
  write_results(run_experiment(cfg), dir);
  std::ifstream s(dir / "summary.csv");
  std::string header;
  std::getline(s, header);
  EXPECT_EQ(header, "algorithm,strategy,rho,mean_rel_auc,ci_lo,ci_hi");
  EXPECT_TRUE(std::filesystem::exists(dir / "results.csv"));
  std::filesystem::remove_all(dir);
}
