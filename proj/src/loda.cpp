#include "gapscore/loda.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gapscore/errors.hpp"
#include "gapscore/iforest.hpp"

namespace gapscore {
namespace {

std::size_t bin_of(double t, std::size_t bins) {
  auto b = static_cast<std::size_t>(t * static_cast<double>(bins));
  return std::min(b, bins - 1);
}

}  // namespace

double Projection::project(const RowView& x) const {
  double s = 0.0;
  for (std::size_t j : nonzero) s += weights[j] * x.values[j];
  return s;
}

bool Projection::applicable(const RowView& x) const {
  return std::all_of(nonzero.begin(), nonzero.end(),
                     [&x](std::size_t j) { return x.is_observed(j); });
}

double Histogram::floor_density() const {
  return 1.0 / (static_cast<double>(n_train) * width *
                static_cast<double>(densities.size() + 1));
}

double Histogram::density(double z) const {
  if (!(z >= origin && z <= upper)) return floor_density();
  const double t = (z - origin) / (upper - origin);
  const double p = densities[bin_of(t, densities.size())];
  return p > 0.0 ? p : floor_density();
}

std::size_t br_bin_count(std::span<const double> z) {
  const std::size_t n = z.size();
  if (n == 0) throw DomainError("br_bin_count needs at least one value");
  const auto [lo_it, hi_it] = std::minmax_element(z.begin(), z.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  if (!(range > 0.0) || n < 2) return 1;

  const double nd = static_cast<double>(n);
  const auto cap = std::max<std::size_t>(
      1, 3 * static_cast<std::size_t>(std::floor(nd / std::log(nd))));

  std::vector<double> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = (z[i] - lo) / range;

  std::vector<std::size_t> counts;
  std::size_t best_bins = 1;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t bins = 1; bins <= cap; ++bins) {
    counts.assign(bins, 0);
    for (double t : pos) ++counts[bin_of(t, bins)];
    const double bd = static_cast<double>(bins);
    double loglik = 0.0;
    for (std::size_t c : counts) {
      if (c == 0) continue;
      const double cd = static_cast<double>(c);
      loglik += cd * std::log(bd * cd / nd);
    }
    const double penalty = bd - 1.0 + std::pow(std::log(bd), 2.5);
    const double objective = loglik - penalty;
    if (objective > best) {
      best = objective;
      best_bins = bins;
    }
  }
  return best_bins;
}

Histogram fit_histogram(std::span<const double> z) {
  if (z.empty()) throw DomainError("histogram needs at least one value");
  const auto [lo_it, hi_it] = std::minmax_element(z.begin(), z.end());
  Histogram h;
  h.n_train = z.size();
  const double n = static_cast<double>(z.size());
  if (!(*hi_it > *lo_it)) {
    // Degenerate support: one unit-width bin centred on the value.
    h.origin = *lo_it - 0.5;
    h.upper = *lo_it + 0.5;
    h.width = 1.0;
    h.densities = {1.0};
    return h;
  }
  const std::size_t bins = br_bin_count(z);
  const double range = *hi_it - *lo_it;
  h.origin = *lo_it;
  h.upper = *hi_it;
  h.width = range / static_cast<double>(bins);
  std::vector<std::size_t> counts(bins, 0);
  for (double v : z) ++counts[bin_of((v - h.origin) / range, bins)];
  h.densities.resize(bins);
  for (std::size_t b = 0; b < bins; ++b)
    h.densities[b] = static_cast<double>(counts[b]) / (n * h.width);
  return h;
}

LodaModel fit_loda(const MaskedMatrix& data, const LodaParams& params,
                   const SeededRng& rng) {
  require_complete(data, "LODA training data");
  if (params.n_projections == 0)
    throw ConfigError("LODA needs at least one projection");
  if (data.rows() == 0) throw ConfigError("LODA needs training rows");

  const std::size_t d = data.cols();
  const std::size_t k = ceil_sqrt(d);
  LodaModel model;
  model.n_features = d;
  model.projections.resize(params.n_projections);
  model.histograms.resize(params.n_projections);

  std::vector<double> z(data.rows());
  for (std::size_t t = 0; t < params.n_projections; ++t) {
    SeededRng pair_rng = rng.fork({t});
    Projection& proj = model.projections[t];
    proj.weights.assign(d, 0.0);
    proj.nonzero = pair_rng.sample_without_replacement(d, k);
    std::sort(proj.nonzero.begin(), proj.nonzero.end());
    for (std::size_t j : proj.nonzero) proj.weights[j] = pair_rng.normal();
    for (std::size_t i = 0; i < data.rows(); ++i)
      z[i] = proj.project(data.row(i));
    model.histograms[t] = fit_histogram(z);
  }

  double total = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i)
    total += score_loda(model, data.row(i), LodaStrategy::kBaseline).score;
  model.fallback_score = total / static_cast<double>(data.rows());
  return model;
}

ScoreResult score_loda(const LodaModel& model, const RowView& x,
                       LodaStrategy strategy) {
  if (x.size() != model.n_features)
    throw ConfigError("query has " + std::to_string(x.size()) +
                      " features, LODA model expects " +
                      std::to_string(model.n_features));
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t t = 0; t < model.projections.size(); ++t) {
    const Projection& proj = model.projections[t];
    if (!proj.applicable(x)) {
      if (strategy == LodaStrategy::kBaseline) {
        throw ContractViolation(
            "LODA baseline scoring needs the projected columns observed; "
            "impute first");
      }
      continue;
    }
    total += -std::log(model.histograms[t].density(proj.project(x)));
    ++used;
  }
  if (used == 0) return {model.fallback_score, true};
  return {total / static_cast<double>(used), false};
}

}  // namespace gapscore
