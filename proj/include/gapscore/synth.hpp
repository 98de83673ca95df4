#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "gapscore/masked_matrix.hpp"
#include "gapscore/rng.hpp"

namespace gapscore {

enum class SynthKind { kUncorrelated, kNoise, kCorrelated, kMixture };

// Throws ConfigError naming the value when it is not one of
// uncorrelated, noise, correlated, mixture.
SynthKind parse_synth_kind(std::string_view name);
std::string_view synth_kind_name(SynthKind kind);

struct SynthConfig {
  SynthKind kind = SynthKind::kUncorrelated;
  std::size_t n = 3000;
  std::size_t d = 8;
  double anomaly_frac = 0.10;
  double rho_corr = 0.8;  // correlated and mixture only
  double c = 2.0;         // diagonal scale
  double b = 2.0;         // anomaly offset scale, correlated only
  std::size_t n_noise = 5;

  void validate() const;
};

// Correlation used by replicate r of the correlated and mixture sets.
double replicate_rho_corr(std::size_t replicate);

// Equicorrelation matrix: diagonal c, every off-diagonal entry rho.
Eigen::MatrixXd equicorrelation(std::size_t d, double c, double rho);

// Lower-triangular factor with diagonal `diag` and strictly-lower entries rho.
Eigen::MatrixXd mixture_factor(std::size_t d, double diag, double rho);

LabeledDataset gen_uncorrelated(const SynthConfig& cfg, SeededRng& rng);
LabeledDataset gen_noise(const SynthConfig& cfg, SeededRng& rng);
LabeledDataset gen_correlated(const SynthConfig& cfg, SeededRng& rng);
LabeledDataset gen_mixture(const SynthConfig& cfg, SeededRng& rng);

// Dispatch on cfg.kind after validation.
LabeledDataset generate(const SynthConfig& cfg, SeededRng& rng);

struct Injection {
  MaskedMatrix matrix;
  // Some row lost every feature (only possible when rho * d rounds up to d).
  bool all_missing_rows = false;
};

// MCAR damage of a complete matrix. With mu = rho * d, m_low = floor(mu) and
// r = mu - m_low, exactly round(r * rows) rows chosen without replacement
// lose m_low + 1 features and the rest lose m_low; the columns within a row
// are chosen uniformly without replacement. Positions depend on the RNG only.
Injection inject_mcar(const MaskedMatrix& m, double rho, SeededRng& rng);

}  // namespace gapscore
