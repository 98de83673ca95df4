#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gapscore/masked_matrix.hpp"
#include "gapscore/rng.hpp"
#include "gapscore/score.hpp"

namespace gapscore {

// Sparse random direction: ceil(sqrt(d)) standard-normal weights, zero
// elsewhere.
struct Projection {
  std::vector<double> weights;        // length d
  std::vector<std::size_t> nonzero;   // ascending column indices

  // Uses only the nonzero columns, so unobserved zero-weight cells are
  // never read.
  double project(const RowView& x) const;
  bool applicable(const RowView& x) const;
};

// Fixed-width histogram density on the real line.
struct Histogram {
  double origin = 0.0;  // left edge of bin 0
  double width = 1.0;
  double upper = 1.0;   // right edge of the training support
  std::vector<double> densities;
  std::size_t n_train = 0;

  // 1 / (n_train * width * (bins + 1)); used for empty bins and for values
  // outside [origin, upper].
  double floor_density() const;
  double density(double z) const;
};

struct LodaParams {
  std::size_t n_projections = 100;
};

struct LodaModel {
  std::vector<Projection> projections;
  std::vector<Histogram> histograms;
  std::size_t n_features = 0;
  // Mean baseline score over the training rows; reported when no
  // projection can score a query under the reduced strategy.
  double fallback_score = 0.0;
};

// Birge-Rozenholc choice of the number of equal-width bins: maximizes
//   sum_b N_b ln(B N_b / n) - (B - 1 + (ln B)^2.5)
// over B in [1, max(1, 3 floor(n / ln n))], ties to the smaller B.
// Constant input gives 1.
std::size_t br_bin_count(std::span<const double> z);

Histogram fit_histogram(std::span<const double> z);

LodaModel fit_loda(const MaskedMatrix& data, const LodaParams& params,
                   const SeededRng& rng);

// Mean of -log p_t(w_t . x). kReduced averages only over projections whose
// nonzero columns are all observed.
ScoreResult score_loda(const LodaModel& model, const RowView& x,
                       LodaStrategy strategy);

}  // namespace gapscore
