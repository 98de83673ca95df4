#include "gapscore/egmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

#include "gapscore/errors.hpp"

namespace gapscore {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_sum_exp(std::span<const double> terms) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double t : terms) hi = std::max(hi, t);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - hi);
  return hi + std::log(s);
}

std::vector<std::size_t> observed_coords(const RowView& x) {
  std::vector<std::size_t> obs;
  for (std::size_t j = 0; j < x.size(); ++j)
    if (x.is_observed(j)) obs.push_back(j);
  return obs;
}

std::vector<double> gather(const RowView& x,
                           const std::vector<std::size_t>& coords) {
  std::vector<double> out(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) out[i] = x.values[coords[i]];
  return out;
}

double surprise(double log_p) {
  const double s = -log_p;
  if (!(s < kMaxSurprise)) return kMaxSurprise;
  return s;
}

Eigen::MatrixXd pooled_covariance(const Eigen::MatrixXd& x) {
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mu;
  return centered.transpose() * centered / static_cast<double>(x.rows());
}

// log(pi_c N(x_i | c)) for every component c and row i, k x n. `xt` holds
// one row per feature. All whitening transforms L_c^-1 are stacked so the
// whole E-step is a single matrix product.
Eigen::MatrixXd weighted_log_densities(
    const Eigen::MatrixXd& xt, const std::vector<GaussianComponent>& comps) {
  const Eigen::Index d = xt.rows();
  const auto k = static_cast<Eigen::Index>(comps.size());
  Eigen::MatrixXd whiten(k * d, d);
  Eigen::VectorXd offset(k * d);
  Eigen::VectorXd shift(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto& comp = comps[static_cast<std::size_t>(c)];
    Eigen::LLT<Eigen::MatrixXd> llt(comp.cov);
    if (llt.info() != Eigen::Success)
      throw DomainError("covariance is not positive definite");
    const Eigen::MatrixXd& l = llt.matrixLLT();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) log_det += 2.0 * std::log(l(i, i));
    Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(d, d);
    llt.matrixL().solveInPlace(inv);
    whiten.middleRows(c * d, d) = inv;
    offset.segment(c * d, d) = inv * comp.mean;
    shift(c) = std::log(comp.weight) -
               0.5 * (static_cast<double>(d) * kLog2Pi + log_det);
  }
  Eigen::MatrixXd z = whiten * xt;
  z.colwise() -= offset;
  Eigen::MatrixXd out(k, xt.cols());
  for (Eigen::Index c = 0; c < k; ++c)
    out.row(c) = (shift(c) - 0.5 * z.middleRows(c * d, d).colwise().squaredNorm().array()).matrix();
  return out;
}

std::vector<std::size_t> kmeanspp_seeds(const Eigen::MatrixXd& x,
                                        std::size_t k, SeededRng& rng) {
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<std::size_t> seeds{rng.index(n)};
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  while (seeds.size() < k) {
    const Eigen::RowVectorXd last = x.row(static_cast<Eigen::Index>(seeds.back()));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i],
                         (x.row(static_cast<Eigen::Index>(i)) - last).squaredNorm());
      total += dist[i];
    }
    if (!(total > 0.0)) {
      seeds.push_back(rng.index(n));
      continue;
    }
    double u = rng.uniform(0.0, total);
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      u -= dist[i];
      if (u < 0.0) {
        pick = i;
        break;
      }
    }
    seeds.push_back(pick);
  }
  return seeds;
}

void normalize_weights(std::vector<GaussianComponent>& comps) {
  double total = 0.0;
  for (const auto& c : comps) total += c.weight;
  for (auto& c : comps) c.weight /= total;
}

}  // namespace

MixtureView::MixtureView(const std::vector<GaussianComponent>& components,
                         std::vector<std::size_t> coords)
    : coords_(std::move(coords)) {
  if (coords_.empty())
    throw DomainError("mixture view needs at least one coordinate");
  const auto m = static_cast<Eigen::Index>(coords_.size());
  for (const auto& comp : components) {
    Eigen::VectorXd mean(m);
    Eigen::MatrixXd cov(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      const auto ca = static_cast<Eigen::Index>(coords_[static_cast<std::size_t>(a)]);
      mean(a) = comp.mean(ca);
      for (Eigen::Index b = 0; b < m; ++b)
        cov(a, b) = comp.cov(ca, static_cast<Eigen::Index>(coords_[static_cast<std::size_t>(b)]));
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw DomainError("component covariance is not positive definite");
    Eigen::MatrixXd l = llt.matrixL();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) log_det += 2.0 * std::log(l(i, i));
    weights_.push_back(comp.weight);
    log_weights_.push_back(std::log(comp.weight));
    means_.push_back(std::move(mean));
    chol_.push_back(std::move(l));
    log_norm_.push_back(-0.5 * (static_cast<double>(m) * kLog2Pi + log_det));
  }
}

double MixtureView::log_density(std::span<const double> x) const {
  const std::size_t m = coords_.size();
  std::vector<double> z(m);
  std::vector<double> terms(means_.size());
  for (std::size_t c = 0; c < means_.size(); ++c) {
    const Eigen::MatrixXd& l = chol_[c];
    const Eigen::VectorXd& mu = means_[c];
    // Forward substitution L z = x - mu.
    double maha = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      double v = x[i] - mu(ii);
      for (std::size_t j = 0; j < i; ++j)
        v -= l(ii, static_cast<Eigen::Index>(j)) * z[j];
      z[i] = v / l(ii, ii);
      maha += z[i] * z[i];
    }
    terms[c] = log_weights_[c] + log_norm_[c] - 0.5 * maha;
  }
  return log_sum_exp(terms);
}

Eigen::VectorXd MixtureView::sample(SeededRng& rng) const {
  double u = rng.uniform();
  std::size_t c = 0;
  while (c + 1 < weights_.size() && u >= weights_[c]) {
    u -= weights_[c];
    ++c;
  }
  const auto m = static_cast<Eigen::Index>(coords_.size());
  Eigen::VectorXd z(m);
  for (Eigen::Index i = 0; i < m; ++i) z(i) = rng.normal();
  return means_[c] + chol_[c].triangularView<Eigen::Lower>() * z;
}

namespace {
std::vector<std::size_t> all_coords(const std::vector<GaussianComponent>& comps) {
  if (comps.empty()) throw DomainError("mixture needs at least one component");
  std::vector<std::size_t> coords(static_cast<std::size_t>(comps[0].mean.size()));
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  return coords;
}

const std::vector<GaussianComponent>& validated(
    const std::vector<GaussianComponent>& comps) {
  if (comps.empty()) throw DomainError("mixture needs at least one component");
  const Eigen::Index d = comps[0].mean.size();
  if (d == 0) throw DomainError("mixture dimension must be positive");
  double total = 0.0;
  for (const auto& c : comps) {
    if (c.mean.size() != d || c.cov.rows() != d || c.cov.cols() != d)
      throw DomainError("mixture components differ in dimension");
    if (!(c.weight > 0.0 && c.weight <= 1.0))
      throw DomainError("component weight must lie in (0, 1]");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw DomainError("component weights must sum to 1");
  return comps;
}
}  // namespace

Gmm::Gmm(std::vector<GaussianComponent> components)
    : components_(std::move(components)),
      full_(validated(components_), all_coords(components_)) {}

Gmm fit_gmm(const Eigen::MatrixXd& x, std::size_t k, const SeededRng& rng,
            const GmmFitParams& params, GmmFitTrace* trace) {
  if (k == 0) throw ConfigError("a mixture needs at least one component");
  const auto n = static_cast<std::size_t>(x.rows());
  if (n < k)
    throw ConfigError("cannot fit " + std::to_string(k) + " components to " +
                      std::to_string(n) + " rows");
  const Eigen::Index d = x.cols();
  const double nd = static_cast<double>(n);
  SeededRng gen = rng.fork({0});

  const Eigen::MatrixXd pooled = pooled_covariance(x);
  double reg = params.regularization * pooled.trace() / static_cast<double>(d);
  if (!(reg > 0.0)) reg = params.regularization;
  const Eigen::MatrixXd ridge = reg * Eigen::MatrixXd::Identity(d, d);

  // Seeding: k-means++ centres, then one hard-assignment M-step.
  std::vector<GaussianComponent> comps(k);
  {
    const auto seeds = kmeanspp_seeds(x, k, gen);
    std::vector<std::vector<Eigen::Index>> members(k);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dist =
            (x.row(i) - x.row(static_cast<Eigen::Index>(seeds[c]))).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      members[best].push_back(i);
    }
    for (std::size_t c = 0; c < k; ++c) {
      auto& comp = comps[c];
      const auto& rows = members[c];
      comp.weight = static_cast<double>(std::max<std::size_t>(rows.size(), 1));
      if (rows.size() < 2) {
        comp.mean = x.row(static_cast<Eigen::Index>(seeds[c])).transpose();
        comp.cov = pooled + ridge;
        continue;
      }
      Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), d);
      for (std::size_t r = 0; r < rows.size(); ++r)
        sub.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
      comp.mean = sub.colwise().mean().transpose();
      comp.cov = pooled_covariance(sub) + ridge;
    }
    normalize_weights(comps);
  }

  GmmFitTrace local;
  GmmFitTrace& tr = trace ? *trace : local;
  tr = GmmFitTrace{};
  std::vector<bool> reseeded(k, false);
  double prev = -std::numeric_limits<double>::infinity();

  const Eigen::MatrixXd xt = x.transpose();
  const Eigen::VectorXd center = xt.rowwise().mean();
  const Eigen::MatrixXd xc = xt.colwise() - center;
  Eigen::MatrixXd resp;
  Eigen::VectorXd row_lse(x.rows());
  Eigen::MatrixXd stacked(static_cast<Eigen::Index>(k) * d, x.rows());
  for (std::size_t it = 0; it < params.max_iterations; ++it) {
    // E-step: responsibilities and per-row log-likelihood in one pass.
    resp = weighted_log_densities(xt, comps);
    {
      const Eigen::RowVectorXd hi = resp.colwise().maxCoeff();
      resp.array() = (resp.rowwise() - hi).array().exp();
      // Terms below e^-700 are zeroed so that no subnormal responsibility
      // reaches the M-step products, where subnormal arithmetic is slow.
      resp = (resp.array() < 1e-304).select(0.0, resp);
      const Eigen::RowVectorXd sums = resp.colwise().sum();
      resp.array().rowwise() /= sums.array();
      row_lse = (hi.array() + sums.array().log()).transpose();
    }
    const double ll = row_lse.mean();
    tr.loglik.push_back(ll);
    if (it > 0 && ll - prev < params.tolerance) {
      tr.converged = true;
      break;
    }
    prev = ll;

    // M-step.
    std::vector<GaussianComponent> next;
    std::vector<bool> next_reseeded;
    bool structure_changed = false;
    // Weighted moments about the global centre for every component at once.
    const Eigen::VectorXd masses = resp.rowwise().sum();
    const Eigen::MatrixXd first = xc * resp.transpose();
    for (Eigen::Index c = 0; c < resp.rows(); ++c)
      stacked.middleRows(c * d, d) = xc.array().rowwise() * resp.row(c).array();
    const Eigen::MatrixXd second =
        stacked.topRows(resp.rows() * d) * xc.transpose();
    for (std::size_t c = 0; c < comps.size(); ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      const double mass = masses(ci);
      GaussianComponent comp;
      if (mass < 1.0) {
        structure_changed = true;
        if (reseeded[c]) {
          ++tr.dropped;
          continue;
        }
        // Re-seed at the worst-explained row.
        Eigen::Index worst = 0;
        row_lse.minCoeff(&worst);
        comp.mean = x.row(worst).transpose();
        comp.cov = pooled + ridge;
        comp.weight = 1.0 / static_cast<double>(comps.size());
        ++tr.reseeded;
        next.push_back(std::move(comp));
        next_reseeded.push_back(true);
        continue;
      }
      comp.weight = mass / nd;
      const Eigen::VectorXd shift = first.col(ci) / mass;
      comp.cov = second.middleRows(ci * d, d) / mass - shift * shift.transpose();
      comp.cov = 0.5 * (comp.cov + comp.cov.transpose()).eval();
      comp.cov += ridge;
      comp.mean = center + shift;
      next.push_back(std::move(comp));
      next_reseeded.push_back(reseeded[c]);
    }
    if (next.empty()) throw DomainError("every mixture component collapsed");
    normalize_weights(next);
    comps = std::move(next);
    reseeded = std::move(next_reseeded);
    if (structure_changed) prev = -std::numeric_limits<double>::infinity();
  }
  return Gmm(std::move(comps));
}

Gmm fit_gmm(const MaskedMatrix& data, std::size_t k, const SeededRng& rng,
            const GmmFitParams& params, GmmFitTrace* trace) {
  return fit_gmm(data.to_eigen("GMM training data"), k, rng, params, trace);
}

double log_density(const Gmm& gmm, std::span<const double> x) {
  if (x.size() != gmm.dim()) throw DomainError("point dimension mismatch");
  return gmm.full().log_density(x);
}

double marginal_log_density(const Gmm& gmm, const RowView& x) {
  if (x.size() != gmm.dim()) throw DomainError("point dimension mismatch");
  if (x.complete()) return gmm.full().log_density(x.values);
  auto obs = observed_coords(x);
  if (obs.empty())
    throw DomainError("marginal density needs at least one observed feature");
  const auto values = gather(x, obs);
  return gmm.marginal(std::move(obs)).log_density(values);
}

TailEstimate tail_probability(const Gmm& gmm, const RowView& x,
                              std::size_t n_samples, SeededRng& rng) {
  if (n_samples == 0) throw DomainError("tail probability needs samples");
  auto obs = observed_coords(x);
  if (obs.empty())
    throw DomainError("tail probability needs at least one observed feature");
  const auto values = gather(x, obs);
  const MixtureView view =
      x.complete() ? gmm.full() : gmm.marginal(std::move(obs));
  const double reference = view.log_density(values);
  std::size_t below = 0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Eigen::VectorXd draw = view.sample(rng);
    if (view.log_density(std::span<const double>(draw.data(), static_cast<std::size_t>(draw.size()))) <= reference) ++below;
  }
  const double ns = static_cast<double>(n_samples);
  TailEstimate est;
  est.probability = static_cast<double>(below) / ns;
  est.std_error = std::sqrt(est.probability * (1.0 - est.probability) / ns);
  return est;
}

std::vector<std::size_t> select_components(const std::vector<double>& per_k,
                                           double keep_fraction) {
  double best = -std::numeric_limits<double>::infinity();
  for (double v : per_k)
    if (std::isfinite(v)) best = std::max(best, v);
  std::vector<std::size_t> keep;
  if (!std::isfinite(best)) return keep;
  const double threshold = best - (1.0 - keep_fraction) * std::abs(best);
  for (std::size_t i = 0; i < per_k.size(); ++i)
    if (std::isfinite(per_k[i]) && per_k[i] >= threshold) keep.push_back(i);
  return keep;
}

EgmmModel fit_egmm(const MaskedMatrix& data, const EgmmParams& params,
                   const SeededRng& rng) {
  const Eigen::MatrixXd x = data.to_eigen("EGMM training data");
  if (params.ks.empty()) throw ConfigError("EGMM needs at least one k");
  if (params.reps_per_k == 0)
    throw ConfigError("EGMM needs at least one replicate per k");
  const auto n = static_cast<std::size_t>(x.rows());

  std::vector<std::vector<Gmm>> fitted(params.ks.size());
  std::vector<double> per_k(params.ks.size());
  EgmmModel model;
  model.n_features = data.cols();

  for (std::size_t ki = 0; ki < params.ks.size(); ++ki) {
    const std::size_t k = params.ks[ki];
    double oob_total = 0.0;
    std::size_t oob_models = 0;
    for (std::size_t rep = 0; rep < params.reps_per_k; ++rep) {
      SeededRng rep_rng = rng.fork({k, rep});
      std::vector<std::size_t> bag(n);
      std::vector<bool> in_bag(n, false);
      std::size_t in_count = 0;
      for (int attempt = 0; attempt < 2; ++attempt) {
        std::fill(in_bag.begin(), in_bag.end(), false);
        for (auto& b : bag) {
          b = rep_rng.index(n);
          in_bag[b] = true;
        }
        in_count = static_cast<std::size_t>(std::count(in_bag.begin(), in_bag.end(), true));
        if (in_count < n) break;
      }
      Eigen::MatrixXd boot(x.rows(), x.cols());
      for (std::size_t i = 0; i < n; ++i)
        boot.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(bag[i]));
      Gmm gmm = fit_gmm(boot, k, rep_rng.fork({1}), params.gmm);
      if (in_count < n) {
        double ll = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i) {
          if (in_bag[i]) continue;
          const auto row = data.row(i);
          ll += log_density(gmm, row.values);
          ++count;
        }
        oob_total += ll / static_cast<double>(count);
        ++oob_models;
      }
      fitted[ki].push_back(std::move(gmm));
    }
    per_k[ki] = oob_models ? oob_total / static_cast<double>(oob_models)
                           : std::numeric_limits<double>::quiet_NaN();
    model.selection.push_back({k, per_k[ki], fitted[ki].size(), false});
  }

  const auto keep = select_components(per_k, params.keep_fraction);
  if (keep.empty())
    throw DomainError("no k value has an out-of-bag likelihood estimate");
  for (std::size_t ki : keep) {
    model.selection[ki].kept = true;
    model.kept_ks.push_back(params.ks[ki]);
    for (auto& g : fitted[ki]) model.models.push_back(std::move(g));
  }

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    total += score_egmm(model, data.row(i), DensityStrategy::kBaseline).score;
  model.fallback_score = total / static_cast<double>(n);
  return model;
}

ScoreResult score_egmm(const EgmmModel& model, const RowView& x,
                       DensityStrategy strategy) {
  if (x.size() != model.n_features)
    throw ConfigError("query has " + std::to_string(x.size()) +
                      " features, EGMM model expects " +
                      std::to_string(model.n_features));
  double total = 0.0;
  if (strategy == DensityStrategy::kBaseline || x.complete()) {
    if (!x.complete())
      throw ContractViolation(
          "EGMM baseline scoring needs a complete row; impute first");
    for (const auto& g : model.models) total += surprise(g.full().log_density(x.values));
  } else {
    auto obs = observed_coords(x);
    if (obs.empty())
      throw DomainError("marginal density needs at least one observed feature");
    const auto values = gather(x, obs);
    for (const auto& g : model.models)
      total += surprise(g.marginal(obs).log_density(values));
  }
  return {total / static_cast<double>(model.models.size()), false};
}

std::vector<ScoreResult> score_egmm_rows(const EgmmModel& model,
                                         const MaskedMatrix& x,
                                         DensityStrategy strategy) {
  if (x.cols() != model.n_features)
    throw ConfigError("matrix has " + std::to_string(x.cols()) +
                      " features, EGMM model expects " +
                      std::to_string(model.n_features));
  std::vector<ScoreResult> out(x.rows());
  std::map<std::vector<std::size_t>, std::vector<MixtureView>> views;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const RowView row = x.row(i);
    if (strategy == DensityStrategy::kBaseline || row.complete()) {
      out[i] = score_egmm(model, row, strategy);
      continue;
    }
    auto obs = observed_coords(row);
    if (obs.empty()) {
      out[i] = {model.fallback_score, true};
      continue;
    }
    auto it = views.find(obs);
    if (it == views.end()) {
      std::vector<MixtureView> per_model;
      per_model.reserve(model.models.size());
      for (const auto& g : model.models) per_model.push_back(g.marginal(obs));
      it = views.emplace(obs, std::move(per_model)).first;
    }
    const auto values = gather(row, obs);
    double total = 0.0;
    for (const auto& view : it->second) total += surprise(view.log_density(values));
    out[i] = {total / static_cast<double>(model.models.size()), false};
  }
  return out;
}

}  // namespace gapscore
