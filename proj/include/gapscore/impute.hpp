#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "gapscore/masked_matrix.hpp"
#include "gapscore/rng.hpp"

namespace gapscore {

struct ColumnStats {
  std::vector<double> means;

  // Per-column means over observed cells. A column with no observed cell
  // gets mean 0.
  static ColumnStats from(const MaskedMatrix& train);
};

// Missing cells replaced by the column mean; observed cells untouched.
std::vector<double> mean_impute(const ColumnStats& stats, const RowView& x);
MaskedMatrix mean_impute(const ColumnStats& stats, const MaskedMatrix& x);

// Conjugate-normal ridge posterior with plug-in noise variance.
// Coefficient 0 is the intercept, which is never penalized.
struct RidgePosterior {
  Eigen::VectorXd coef_mean;
  Eigen::MatrixXd coef_cov;
  double noise_var = 0.0;

  double predict(std::span<const double> predictors) const;
};

// beta = (Z'Z + lambda D)^-1 Z'y with Z = [1, X] and D = diag(0, 1, ..., 1);
// noise_var = RSS / max(1, n - (p + 1)); coef_cov = noise_var (Z'Z + lambda D)^-1.
RidgePosterior ridge_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         double lambda);

// Same fit from the sufficient statistics of [1, X, y]: `gram` is the
// (p + 2) x (p + 2) cross-product matrix whose last row/column is y.
RidgePosterior ridge_fit_gram(const Eigen::MatrixXd& gram, std::size_t n,
                              double lambda);

enum class MiceCorpus { kTestOnly, kTrainAndTest };

struct MiceConfig {
  double ridge_lambda = 0.01;
  std::size_t total_passes = 110;
  std::size_t burn_in = 10;
  MiceCorpus corpus = MiceCorpus::kTrainAndTest;

  void validate() const;
};

struct MiceResult {
  MaskedMatrix imputed;  // fully observed
  // Columns with no observed value anywhere in the corpus; filled with 0.
  std::vector<std::size_t> unidentified_columns;
  // Sampled values averaged into each imputed cell.
  std::size_t samples_per_cell = 0;
};

// Chained-equations imputation. Missing cells start at the corpus column
// mean; each pass sweeps the columns in ascending order, regresses column j
// on all other columns over corpus rows where j is observed, and redraws
// every missing cell of j from the posterior predictive. The returned value
// of a cell is the mean of its draws after burn-in. Observed cells never
// change. `train` must be complete (it may have zero rows).
MiceResult mice_impute(const MaskedMatrix& test, const MaskedMatrix& train,
                       const MiceConfig& cfg, const SeededRng& rng);

}  // namespace gapscore
