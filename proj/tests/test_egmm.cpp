#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gapscore/egmm.hpp"
#include "gapscore/errors.hpp"
#include "oracles.hpp"

using namespace gapscore;

namespace {

constexpr double kLogStdNormalPeak = -0.91893853320467274;

Gmm standard(std::size_t d) {
  GaussianComponent c;
  c.weight = 1.0;
  c.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  c.cov = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  return Gmm({c});
}

std::vector<oracle::Gauss2> random_mixture(SeededRng& rng, int k) {
  std::vector<oracle::Gauss2> out;
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    oracle::Gauss2 g{};
    g.w = rng.uniform(0.2, 1.0);
    total += g.w;
    g.m0 = rng.uniform(-3, 3);
    g.m1 = rng.uniform(-3, 3);
    g.s00 = rng.uniform(0.3, 2.0);
    g.s11 = rng.uniform(0.3, 2.0);
    g.s01 = rng.uniform(-0.8, 0.8) * std::sqrt(g.s00 * g.s11);
    out.push_back(g);
  }
  for (auto& g : out) g.w /= total;
  return out;
}

Gmm to_gmm(const std::vector<oracle::Gauss2>& comps) {
  std::vector<GaussianComponent> cs;
  for (const auto& g : comps) {
    GaussianComponent c;
    c.weight = g.w;
    c.mean = Eigen::Vector2d(g.m0, g.m1);
    c.cov.resize(2, 2);
    c.cov << g.s00, g.s01, g.s01, g.s11;
    cs.push_back(c);
  }
  return Gmm(std::move(cs));
}

MaskedMatrix blobs(std::size_t n, std::uint64_t seed) {
  SeededRng rng(seed);
  MaskedMatrix m(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = i % 2 == 0 ? 0.0 : 10.0;
    m.set(i, 0, c + rng.normal());
    m.set(i, 1, c + rng.normal());
  }
  return m;
}

struct Row {
  std::vector<double> v;
  std::vector<std::uint8_t> o;
  RowView view() const { return {v, o}; }
};

}  // namespace

TEST(Gmm, RejectsBadParameters) {
  GaussianComponent c;
  c.weight = 0.5;
  c.mean = Eigen::VectorXd::Zero(2);
  c.cov = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW(Gmm({c}), DomainError);
  c.weight = 1.0;
  c.cov(0, 0) = -1.0;
  EXPECT_THROW(Gmm({c}), DomainError);
}

TEST(LogDensity, StandardNormalPeak) {
  const auto g = standard(1);
  const std::vector<double> x{0.0};
  EXPECT_NEAR(log_density(g, x), kLogStdNormalPeak, 1e-12);
}

TEST(LogDensity, MatchesDirectSummation) {
  SeededRng rng(41);
  for (int t = 0; t < 50; ++t) {
    const auto comps = random_mixture(rng, 2);
    const auto g = to_gmm(comps);
    const double x0 = rng.uniform(-4, 4);
    const double x1 = rng.uniform(-4, 4);
    const std::vector<double> x{x0, x1};
    EXPECT_NEAR(log_density(g, x), std::log(oracle::mixture_pdf(comps, x0, x1)), 1e-10);
  }
}

TEST(LogDensity, PeakBeatsFarOffset) {
  SeededRng rng(42);
  const auto comps = random_mixture(rng, 3);
  const auto g = to_gmm(comps);
  std::size_t dom = 0;
  for (std::size_t c = 1; c < comps.size(); ++c)
    if (comps[c].w > comps[dom].w) dom = c;
  const auto& d = comps[dom];
  const std::vector<double> at{d.m0, d.m1};
  const std::vector<double> off{d.m0 + 5 * std::sqrt(d.s00), d.m1 + 5 * std::sqrt(d.s11)};
  EXPECT_GE(log_density(g, at), log_density(g, off));
}

TEST(MarginalDensity, StandardNormalMarginal) {
  const auto g = standard(2);
  Row x{{123.0, 0.0}, {0, 1}};
  EXPECT_NEAR(marginal_log_density(g, x.view()), kLogStdNormalPeak, 1e-12);
}

TEST(MarginalDensity, CompleteRowEqualsJoint) {
  SeededRng rng(43);
  const auto g = to_gmm(random_mixture(rng, 3));
  Row x{{0.4, -1.1}, {1, 1}};
  EXPECT_EQ(marginal_log_density(g, x.view()), log_density(g, x.v));
}

TEST(MarginalDensity, MatchesTrapezoidIntegration) {
  SeededRng rng(44);
  for (int t = 0; t < 20; ++t) {
    const auto comps = random_mixture(rng, 2);
    const auto g = to_gmm(comps);
    Row x{{0.0, 0.7}, {0, 1}};
    EXPECT_NEAR(marginal_log_density(g, x.view()),
                std::log(oracle::integrate_out_x0(comps, 0.7)), 1e-3);
  }
}

TEST(MarginalDensity, NothingObservedIsDomainError) {
  const auto g = standard(2);
  Row x{{0.0, 0.0}, {0, 0}};
  EXPECT_THROW(marginal_log_density(g, x.view()), DomainError);
}

TEST(FitGmm, SingleComponentIsClosedForm) {
  const auto data = blobs(500, 45);
  const Eigen::MatrixXd x = data.to_eigen();
  const auto g = fit_gmm(x, 1, SeededRng(1));
  ASSERT_EQ(g.k(), 1u);
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - mu;
  const Eigen::MatrixXd cov = xc.transpose() * xc / 500.0;
  const double ridge = 1e-6 * cov.trace() / 2.0;
  const auto& c = g.components()[0];
  EXPECT_NEAR(c.weight, 1.0, 1e-12);
  EXPECT_LT((c.mean - mu.transpose()).norm(), 1e-9);
  EXPECT_LT((c.cov - cov - ridge * Eigen::MatrixXd::Identity(2, 2)).norm(), 1e-8);
}

TEST(FitGmm, RecoversSeparatedBlobs) {
  const auto data = blobs(2000, 46);
  const auto g = fit_gmm(data, 2, SeededRng(2));
  ASSERT_EQ(g.k(), 2u);
  std::vector<Eigen::Vector2d> means;
  for (const auto& c : g.components()) means.emplace_back(c.mean);
  if (means[0].sum() > means[1].sum()) std::swap(means[0], means[1]);
  EXPECT_LT((means[0] - Eigen::Vector2d(0, 0)).cwiseAbs().maxCoeff(), 0.1);
  EXPECT_LT((means[1] - Eigen::Vector2d(10, 10)).cwiseAbs().maxCoeff(), 0.1);
}

TEST(FitGmm, LogLikelihoodNeverDecreases) {
  SeededRng rng(47);
  MaskedMatrix m(800, 3);
  for (std::size_t i = 0; i < 800; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      m.set(i, j, rng.normal(i % 3 == 0 ? 2.0 : 0.0, 1.0 + static_cast<double>(j)));
  for (std::size_t k = 2; k <= 5; ++k) {
    GmmFitTrace trace;
    const auto g = fit_gmm(m, k, SeededRng(k), {}, &trace);
    ASSERT_GE(trace.loglik.size(), 2u);
    for (std::size_t i = 1; i < trace.loglik.size(); ++i)
      EXPECT_GE(trace.loglik[i], trace.loglik[i - 1] - 1e-9) << "k=" << k << " it=" << i;
    double w = 0.0;
    for (const auto& c : g.components()) w += c.weight;
    EXPECT_NEAR(w, 1.0, 1e-12);
  }
}

TEST(FitGmm, TooFewRows) {
  MaskedMatrix m(2, 2);
  EXPECT_THROW(fit_gmm(m, 3, SeededRng(1)), ConfigError);
}

TEST(SelectComponents, EightyFivePercentRule) {
  EXPECT_EQ(select_components({-10.0, -10.5, -13.0}, 0.85),
            (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(select_components({-4.0, -4.0, -4.0}, 0.85),
            (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(select_components({std::nan(""), -2.0}, 0.85),
            (std::vector<std::size_t>{1}));
}

TEST(FitEgmm, FortyFiveModelsByDefault) {
  const auto data = blobs(300, 48);
  const auto m = fit_egmm(data, {}, SeededRng(3));
  std::size_t total = 0;
  for (const auto& s : m.selection) total += s.models;
  EXPECT_EQ(total, 45u);
  ASSERT_EQ(m.selection.size(), 3u);
  std::size_t kept_models = 0;
  for (const auto& s : m.selection)
    if (s.kept) kept_models += s.models;
  EXPECT_EQ(m.models.size(), kept_models);
  EXPECT_FALSE(m.kept_ks.empty());
}

TEST(ScoreEgmm, CompleteRowsMarginalEqualsBaseline) {
  const auto data = blobs(300, 49);
  EgmmParams p;
  p.ks = {2, 3};
  p.reps_per_k = 3;
  const auto m = fit_egmm(data, p, SeededRng(4));
  for (std::size_t i = 0; i < 20; ++i)
    EXPECT_EQ(score_egmm(m, data.row(i), DensityStrategy::kBaseline).score,
              score_egmm(m, data.row(i), DensityStrategy::kMarginal).score);
}

TEST(ScoreEgmm, AveragesMarginalSurprise) {
  // Two hand-built models; the score is the mean of -log marginal density.
  SeededRng rng(50);
  const auto a = random_mixture(rng, 2);
  const auto b = random_mixture(rng, 1);
  EgmmModel m;
  m.n_features = 2;
  m.models = {to_gmm(a), to_gmm(b)};
  Row q1{{0.3, -0.4}, {1, 1}};
  const double want1 = -0.5 * (std::log(oracle::mixture_pdf(a, 0.3, -0.4)) +
                               std::log(oracle::mixture_pdf(b, 0.3, -0.4)));
  EXPECT_NEAR(score_egmm(m, q1.view(), DensityStrategy::kMarginal).score, want1, 1e-10);
  Row q2{{9.9, -0.4}, {0, 1}};
  const double want2 = -0.5 * (std::log(oracle::integrate_out_x0(a, -0.4)) +
                               std::log(oracle::integrate_out_x0(b, -0.4)));
  EXPECT_NEAR(score_egmm(m, q2.view(), DensityStrategy::kMarginal).score, want2, 1e-3);
}

TEST(ScoreEgmm, RowsShareFactorsAndFallBack) {
  const auto data = blobs(200, 51);
  EgmmParams p;
  p.ks = {2};
  p.reps_per_k = 2;
  const auto m = fit_egmm(data, p, SeededRng(5));
  MaskedMatrix q = data.select_rows(std::vector<std::size_t>{0, 1, 2});
  q.set_missing(0, 0);
  q.set_missing(1, 0);
  q.set_missing(2, 0);
  q.set_missing(2, 1);
  const auto rows = score_egmm_rows(m, q, DensityStrategy::kMarginal);
  EXPECT_EQ(rows[0].score, score_egmm(m, q.row(0), DensityStrategy::kMarginal).score);
  EXPECT_EQ(rows[1].score, score_egmm(m, q.row(1), DensityStrategy::kMarginal).score);
  EXPECT_TRUE(rows[2].fallback);
  EXPECT_EQ(rows[2].score, m.fallback_score);
}

TEST(TailProbability, NormalTwoSided) {
  const auto g = standard(1);
  SeededRng rng(52);
  const std::vector<double> v{1.96};
  const std::vector<std::uint8_t> o{1};
  const auto est = tail_probability(g, {v, o}, 100000, rng);
  const double want = std::erfc(1.96 / std::numbers::sqrt2);
  EXPECT_NEAR(est.probability, want, 3 * est.std_error);
}

TEST(TailProbability, PeakAndFarPoint) {
  const auto g = standard(2);
  SeededRng rng(53);
  const std::vector<std::uint8_t> o{1, 1};
  const std::vector<double> peak{0.0, 0.0};
  const std::vector<double> far{50.0, 50.0};
  EXPECT_EQ(tail_probability(g, {peak, o}, 2000, rng).probability, 1.0);
  EXPECT_EQ(tail_probability(g, {far, o}, 2000, rng).probability, 0.0);
}
