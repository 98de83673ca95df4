#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gapscore/masked_matrix.hpp"
#include "gapscore/rng.hpp"
#include "gapscore/score.hpp"

namespace gapscore {

struct GaussianComponent {
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// A Gaussian mixture restricted to a subset of coordinates, with the
// Cholesky factors precomputed. Marginals of a Gaussian are the matching
// sub-vector of the mean and sub-block of the covariance.
class MixtureView {
 public:
  MixtureView(const std::vector<GaussianComponent>& components,
              std::vector<std::size_t> coords);

  std::size_t dim() const { return coords_.size(); }
  const std::vector<std::size_t>& coords() const { return coords_; }

  // Log density at the point given in view coordinates (length dim()).
  double log_density(std::span<const double> x) const;

  // One draw from the (marginal) mixture, in view coordinates.
  Eigen::VectorXd sample(SeededRng& rng) const;

 private:
  std::vector<std::size_t> coords_;
  std::vector<double> log_weights_;
  std::vector<double> weights_;
  std::vector<Eigen::VectorXd> means_;
  std::vector<Eigen::MatrixXd> chol_;  // lower-triangular factors
  std::vector<double> log_norm_;       // -0.5 (m ln 2pi + ln det)
};

class Gmm {
 public:
  // Components must share one dimension; weights must sum to 1 within
  // 1e-9 and every covariance must be positive definite.
  explicit Gmm(std::vector<GaussianComponent> components);

  const std::vector<GaussianComponent>& components() const {
    return components_;
  }
  std::size_t k() const { return components_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(components_[0].mean.size()); }

  // View over all coordinates.
  const MixtureView& full() const { return full_; }
  MixtureView marginal(std::vector<std::size_t> observed) const {
    return MixtureView(components_, std::move(observed));
  }

 private:
  std::vector<GaussianComponent> components_;
  MixtureView full_;
};

struct GmmFitParams {
  double regularization = 1e-6;  // times trace(pooled cov) / d, added to diag
  double tolerance = 1e-6;       // on per-row mean log-likelihood
  std::size_t max_iterations = 200;
};

struct GmmFitTrace {
  // Per-row mean training log-likelihood at each E-step.
  std::vector<double> loglik;
  std::size_t reseeded = 0;
  std::size_t dropped = 0;
  bool converged = false;
};

// EM from k-means++ seeding. Components whose responsibility mass falls
// below one row are re-seeded once, then dropped.
Gmm fit_gmm(const Eigen::MatrixXd& data, std::size_t k, const SeededRng& rng,
            const GmmFitParams& params = {}, GmmFitTrace* trace = nullptr);
Gmm fit_gmm(const MaskedMatrix& data, std::size_t k, const SeededRng& rng,
            const GmmFitParams& params = {}, GmmFitTrace* trace = nullptr);

double log_density(const Gmm& gmm, std::span<const double> x);

// Log density of the observed coordinates of x under the marginal mixture.
// Throws DomainError when nothing is observed. Identical to log_density
// when x is complete.
double marginal_log_density(const Gmm& gmm, const RowView& x);

struct TailEstimate {
  double probability = 0.0;
  double std_error = 0.0;
};

// Monte Carlo estimate of P(p(X) <= p(x)) for X drawn from the mixture
// (marginalized to the observed coordinates of x).
TailEstimate tail_probability(const Gmm& gmm, const RowView& x,
                              std::size_t n_samples, SeededRng& rng);

struct EgmmParams {
  std::vector<std::size_t> ks{3, 4, 5};
  std::size_t reps_per_k = 15;
  // k survives when its mean out-of-bag log-likelihood is within
  // (1 - keep_fraction) * |best| of the best k.
  double keep_fraction = 0.85;
  GmmFitParams gmm;
};

struct KSelection {
  std::size_t k = 0;
  double mean_oob_loglik = 0.0;  // NaN when no replicate had out-of-bag rows
  std::size_t models = 0;
  bool kept = false;
};

struct EgmmModel {
  std::vector<Gmm> models;
  std::vector<std::size_t> kept_ks;
  std::vector<KSelection> selection;
  std::size_t n_features = 0;
  // Mean baseline training score; reported when a query has no observed
  // coordinate under marginal scoring.
  double fallback_score = 0.0;
};

// Indices into `per_k` of the k values to keep.
std::vector<std::size_t> select_components(const std::vector<double>& per_k,
                                           double keep_fraction);

EgmmModel fit_egmm(const MaskedMatrix& data, const EgmmParams& params,
                   const SeededRng& rng);

inline constexpr double kMaxSurprise = 1e9;

// Mean over retained models of -log density (kBaseline) or -log marginal
// density (kMarginal), each capped at kMaxSurprise.
ScoreResult score_egmm(const EgmmModel& model, const RowView& x,
                       DensityStrategy strategy);

// Row-by-row score_egmm over a matrix; marginal factors are shared between
// rows with the same missingness pattern. Rows with nothing observed get
// the fallback score and flag under kMarginal.
std::vector<ScoreResult> score_egmm_rows(const EgmmModel& model,
                                         const MaskedMatrix& x,
                                         DensityStrategy strategy);

}  // namespace gapscore
