#include "gapscore/impute.hpp"

#include <cmath>

#include "gapscore/errors.hpp"

namespace gapscore {

ColumnStats ColumnStats::from(const MaskedMatrix& train) {
  ColumnStats stats;
  stats.means.assign(train.cols(), 0.0);
  std::vector<std::size_t> counts(train.cols(), 0);
  for (std::size_t i = 0; i < train.rows(); ++i) {
    for (std::size_t j = 0; j < train.cols(); ++j) {
      if (!train.observed(i, j)) continue;
      stats.means[j] += train.value(i, j);
      ++counts[j];
    }
  }
  for (std::size_t j = 0; j < train.cols(); ++j)
    if (counts[j] > 0) stats.means[j] /= static_cast<double>(counts[j]);
  return stats;
}

std::vector<double> mean_impute(const ColumnStats& stats, const RowView& x) {
  if (stats.means.size() != x.size())
    throw ConfigError("column statistics do not match the row dimension");
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    out[j] = x.is_observed(j) ? x.values[j] : stats.means[j];
  return out;
}

MaskedMatrix mean_impute(const ColumnStats& stats, const MaskedMatrix& x) {
  if (stats.means.size() != x.cols())
    throw ConfigError("column statistics do not match the matrix dimension");
  MaskedMatrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j)
      out.set(i, j, x.observed(i, j) ? x.value(i, j) : stats.means[j]);
  return out;
}

double RidgePosterior::predict(std::span<const double> predictors) const {
  double v = coef_mean(0);
  for (std::size_t k = 0; k < predictors.size(); ++k)
    v += coef_mean(static_cast<Eigen::Index>(k + 1)) * predictors[k];
  return v;
}

RidgePosterior ridge_fit_gram(const Eigen::MatrixXd& gram, std::size_t n,
                              double lambda) {
  if (n < 2) throw ConfigError("ridge regression needs at least 2 rows");
  if (!(lambda > 0.0)) throw ConfigError("ridge lambda must be positive");
  const Eigen::Index q = gram.rows() - 1;  // coefficients incl. intercept
  Eigen::MatrixXd a = gram.topLeftCorner(q, q);
  for (Eigen::Index i = 1; i < q; ++i) a(i, i) += lambda;
  const Eigen::VectorXd b = gram.topRightCorner(q, 1);
  const double yy = gram(q, q);

  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success)
    throw DomainError("ridge normal equations are singular");
  RidgePosterior post;
  post.coef_mean = ldlt.solve(b);
  const Eigen::VectorXd& beta = post.coef_mean;
  const double penalty = lambda * beta.tail(q - 1).squaredNorm();
  // RSS = y'y - 2 b'beta + beta' (A - lambda D) beta, with A beta = b.
  const double rss = std::max(0.0, yy - beta.dot(b) - penalty);
  const double dof = std::max(1.0, static_cast<double>(n) - static_cast<double>(q));
  post.noise_var = rss / dof;
  post.coef_cov = post.noise_var * ldlt.solve(Eigen::MatrixXd::Identity(q, q));
  post.coef_cov = 0.5 * (post.coef_cov + post.coef_cov.transpose());
  return post;
}

RidgePosterior ridge_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         double lambda) {
  if (x.rows() != y.size())
    throw ConfigError("design matrix and target differ in length");
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  Eigen::MatrixXd z(n, p + 2);
  z.col(0).setOnes();
  z.middleCols(1, p) = x;
  z.col(p + 1) = y;
  const Eigen::MatrixXd gram = z.transpose() * z;
  return ridge_fit_gram(gram, static_cast<std::size_t>(n), lambda);
}

void MiceConfig::validate() const {
  if (!(ridge_lambda > 0.0)) throw ConfigError("ridge lambda must be positive");
  if (burn_in >= total_passes)
    throw ConfigError("burn-in must be smaller than the number of passes");
}

MiceResult mice_impute(const MaskedMatrix& test, const MaskedMatrix& train,
                       const MiceConfig& cfg, const SeededRng& rng) {
  cfg.validate();
  const bool use_train = cfg.corpus == MiceCorpus::kTrainAndTest && train.rows() > 0;
  if (use_train) {
    require_complete(train, "MICE training corpus");
    if (train.cols() != test.cols())
      throw ConfigError("train and test differ in column count");
  }
  const std::size_t d = test.cols();
  const std::size_t n = test.rows();
  const auto di = static_cast<Eigen::Index>(d);

  MiceResult result;
  result.samples_per_cell = cfg.total_passes - cfg.burn_in;

  // Starting values: corpus column means.
  std::vector<double> sums(d, 0.0);
  std::vector<std::size_t> counts(d, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (test.observed(i, j)) {
        sums[j] += test.value(i, j);
        ++counts[j];
      }
  if (use_train) {
    for (std::size_t i = 0; i < train.rows(); ++i)
      for (std::size_t j = 0; j < d; ++j) sums[j] += train.value(i, j);
    for (auto& c : counts) c += train.rows();
  }

  // Current state of the test matrix as [1, x].
  Eigen::MatrixXd current(static_cast<Eigen::Index>(n), di + 1);
  current.col(0).setOnes();
  std::vector<std::vector<std::size_t>> missing_rows(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double start = counts[j] ? sums[j] / static_cast<double>(counts[j]) : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      if (test.observed(i, j)) {
        current(ii, static_cast<Eigen::Index>(j) + 1) = test.value(i, j);
      } else {
        current(ii, static_cast<Eigen::Index>(j) + 1) = start;
        missing_rows[j].push_back(i);
      }
    }
    if (counts[j] == 0 && !missing_rows[j].empty())
      result.unidentified_columns.push_back(j);
  }

  Eigen::MatrixXd train_gram = Eigen::MatrixXd::Zero(di + 1, di + 1);
  if (use_train) {
    Eigen::MatrixXd z(static_cast<Eigen::Index>(train.rows()), di + 1);
    z.col(0).setOnes();
    for (std::size_t i = 0; i < train.rows(); ++i)
      for (std::size_t j = 0; j < d; ++j)
        z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j) + 1) = train.value(i, j);
    train_gram = z.transpose() * z;
  }

  std::vector<std::vector<double>> draws_sum(d);
  for (std::size_t j = 0; j < d; ++j) draws_sum[j].assign(missing_rows[j].size(), 0.0);

  // Order of [1, x] entries when regressing column j: intercept, the other
  // columns ascending, then column j as the target.
  std::vector<Eigen::Index> order(d + 1);
  Eigen::VectorXd predictors(di);
  SeededRng gen = rng.fork({0});

  for (std::size_t pass = 0; pass < cfg.total_passes; ++pass) {
    const bool keep = pass >= cfg.burn_in;
    for (std::size_t j = 0; j < d; ++j) {
      if (missing_rows[j].empty()) continue;
      const std::size_t rows_used =
          (n - missing_rows[j].size()) + (use_train ? train.rows() : 0);
      if (rows_used < 2) continue;  // stays at its starting value

      Eigen::VectorXd weight = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
      for (std::size_t i : missing_rows[j]) weight(static_cast<Eigen::Index>(i)) = 0.0;
      const Eigen::MatrixXd gram_full =
          train_gram +
          current.transpose() * (current.array().colwise() * weight.array()).matrix();

      order[0] = 0;
      std::size_t pos = 1;
      for (std::size_t k = 0; k < d; ++k)
        if (k != j) order[pos++] = static_cast<Eigen::Index>(k) + 1;
      order[d] = static_cast<Eigen::Index>(j) + 1;
      Eigen::MatrixXd gram(di + 1, di + 1);
      for (Eigen::Index a = 0; a <= di; ++a)
        for (Eigen::Index b = 0; b <= di; ++b)
          gram(a, b) = gram_full(order[static_cast<std::size_t>(a)],
                                 order[static_cast<std::size_t>(b)]);
      const RidgePosterior post = ridge_fit_gram(gram, rows_used, cfg.ridge_lambda);

      // Drawing beta ~ N(mean, cov) then y ~ N(x'beta, s2) per cell has the
      // marginal N(x'mean, s2 + x' cov x), which is sampled directly.
      for (std::size_t m = 0; m < missing_rows[j].size(); ++m) {
        const auto ii = static_cast<Eigen::Index>(missing_rows[j][m]);
        for (Eigen::Index a = 0; a < di; ++a)
          predictors(a) = current(ii, order[static_cast<std::size_t>(a)]);
        const double mean = predictors.dot(post.coef_mean);
        const double var =
            post.noise_var + predictors.dot(post.coef_cov * predictors);
        const double v = gen.normal(mean, std::sqrt(std::max(0.0, var)));
        current(ii, static_cast<Eigen::Index>(j) + 1) = v;
        if (keep) draws_sum[j][m] += v;
      }
    }
  }

  result.imputed = MaskedMatrix(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      result.imputed.set(i, j, current(static_cast<Eigen::Index>(i),
                                       static_cast<Eigen::Index>(j) + 1));
  const double per_cell = static_cast<double>(result.samples_per_cell);
  for (std::size_t j = 0; j < d; ++j) {
    const bool sampled = (n - missing_rows[j].size()) +
                             (use_train ? train.rows() : 0) >= 2;
    for (std::size_t m = 0; m < missing_rows[j].size(); ++m) {
      const std::size_t i = missing_rows[j][m];
      if (sampled) result.imputed.set(i, j, draws_sum[j][m] / per_cell);
    }
  }
  for (std::size_t j : result.unidentified_columns)
    for (std::size_t i : missing_rows[j]) result.imputed.set(i, j, 0.0);
  return result;
}

}  // namespace gapscore
