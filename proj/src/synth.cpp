#include "gapscore/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "gapscore/errors.hpp"

namespace gapscore {
namespace {

std::size_t nominal_count(const SynthConfig& cfg) {
  return static_cast<std::size_t>(
      std::llround((1.0 - cfg.anomaly_frac) * static_cast<double>(cfg.n)));
}

Eigen::VectorXd standard_normal(std::size_t d, SeededRng& rng) {
  Eigen::VectorXd z(static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = rng.normal();
  return z;
}

double alternating(std::size_t j) { return j % 2 == 0 ? 1.0 : -1.0; }

// Rows are generated nominals first, then shuffled together with labels.
LabeledDataset shuffled(const std::vector<Eigen::VectorXd>& rows,
                        const std::vector<int>& labels, SeededRng& rng,
                        std::vector<std::string> names) {
  std::vector<std::size_t> perm(rows.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  const std::size_t d = names.size();
  LabeledDataset out;
  out.features = MaskedMatrix(rows.size(), d);
  out.labels.resize(rows.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const Eigen::VectorXd& r = rows[perm[i]];
    for (std::size_t j = 0; j < d; ++j)
      out.features.set(i, j, r(static_cast<Eigen::Index>(j)));
    out.labels[i] = labels[perm[i]];
  }
  out.names = std::move(names);
  return out;
}

std::vector<std::string> feature_names(std::size_t d) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < d; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

void require_kind(const SynthConfig& cfg, SynthKind kind) {
  cfg.validate();
  if (cfg.kind != kind)
    throw ConfigError("generator called with config kind " +
                      std::string(synth_kind_name(cfg.kind)));
}

}  // namespace

SynthKind parse_synth_kind(std::string_view name) {
  if (name == "uncorrelated") return SynthKind::kUncorrelated;
  if (name == "noise") return SynthKind::kNoise;
  if (name == "correlated") return SynthKind::kCorrelated;
  if (name == "mixture") return SynthKind::kMixture;
  throw ConfigError("unknown synthetic config '" + std::string(name) +
                    "' (expected uncorrelated, noise, correlated or mixture)");
}

std::string_view synth_kind_name(SynthKind kind) {
  switch (kind) {
    case SynthKind::kUncorrelated: return "uncorrelated";
    case SynthKind::kNoise: return "noise";
    case SynthKind::kCorrelated: return "correlated";
    case SynthKind::kMixture: return "mixture";
  }
  return "unknown";
}

void SynthConfig::validate() const {
  if (n < 2) throw ConfigError("synthetic n must be at least 2");
  if (d < 1) throw ConfigError("synthetic d must be at least 1");
  if (!(anomaly_frac > 0.0 && anomaly_frac < 1.0))
    throw ConfigError("anomaly_frac must lie in (0, 1)");
  if (kind == SynthKind::kCorrelated && !(c > rho_corr))
    throw ConfigError("correlated config needs c > rho_corr for a positive-definite covariance");
  if (kind == SynthKind::kMixture && !(c > 0.0))
    throw ConfigError("mixture config needs c > 0");
  const std::size_t nominals = nominal_count(*this);
  if (nominals == 0 || nominals >= n)
    throw ConfigError("anomaly_frac leaves one class empty at this n");
}

double replicate_rho_corr(std::size_t replicate) {
  constexpr std::array<double, 4> kValues{0.4, 0.6, 0.8, 1.2};
  return kValues[replicate % kValues.size()];
}

Eigen::MatrixXd equicorrelation(std::size_t d, double c, double rho) {
  const auto di = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(di, di, rho);
  s.diagonal().setConstant(c);
  return s;
}

Eigen::MatrixXd mixture_factor(std::size_t d, double diag, double rho) {
  const auto di = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(di, di);
  for (Eigen::Index i = 0; i < di; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) l(i, j) = rho;
    l(i, i) = diag;
  }
  return l;
}

LabeledDataset gen_uncorrelated(const SynthConfig& cfg, SeededRng& rng) {
  require_kind(cfg, SynthKind::kUncorrelated);
  const std::size_t nominals = nominal_count(cfg);
  std::vector<Eigen::VectorXd> rows;
  std::vector<int> labels;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const bool anomaly = i >= nominals;
    Eigen::VectorXd x = standard_normal(cfg.d, rng);
    if (anomaly) x.array() += 3.0;
    rows.push_back(std::move(x));
    labels.push_back(anomaly ? 1 : 0);
  }
  return shuffled(rows, labels, rng, feature_names(cfg.d));
}

LabeledDataset gen_noise(const SynthConfig& cfg, SeededRng& rng) {
  require_kind(cfg, SynthKind::kNoise);
  SynthConfig base = cfg;
  base.kind = SynthKind::kUncorrelated;
  LabeledDataset core = gen_uncorrelated(base, rng);
  const std::size_t d = cfg.d + cfg.n_noise;
  LabeledDataset out;
  out.features = MaskedMatrix(cfg.n, d);
  out.labels = core.labels;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    for (std::size_t j = 0; j < cfg.d; ++j)
      out.features.set(i, j, core.features.value(i, j));
    for (std::size_t j = cfg.d; j < d; ++j)
      out.features.set(i, j, rng.uniform(-1.0, 1.0));
  }
  out.names = feature_names(d);
  return out;
}

LabeledDataset gen_correlated(const SynthConfig& cfg, SeededRng& rng) {
  require_kind(cfg, SynthKind::kCorrelated);
  const Eigen::MatrixXd sigma = equicorrelation(cfg.d, cfg.c, cfg.rho_corr);
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw ConfigError("correlated covariance is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  Eigen::VectorXd offset(static_cast<Eigen::Index>(cfg.d));
  for (std::size_t j = 0; j < cfg.d; ++j)
    offset(static_cast<Eigen::Index>(j)) = cfg.b * alternating(j);

  const std::size_t nominals = nominal_count(cfg);
  std::vector<Eigen::VectorXd> rows;
  std::vector<int> labels;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const bool anomaly = i >= nominals;
    const double u = rng.uniform(-3.0, 3.0);
    Eigen::VectorXd x = l * standard_normal(cfg.d, rng);
    x.array() += u;
    if (anomaly) x += offset;
    rows.push_back(std::move(x));
    labels.push_back(anomaly ? 1 : 0);
  }
  return shuffled(rows, labels, rng, feature_names(cfg.d));
}

LabeledDataset gen_mixture(const SynthConfig& cfg, SeededRng& rng) {
  require_kind(cfg, SynthKind::kMixture);
  const auto di = static_cast<Eigen::Index>(cfg.d);
  std::array<Eigen::VectorXd, 3> means;
  means[0] = Eigen::VectorXd::Constant(di, -3.0);
  means[1] = Eigen::VectorXd(di);
  for (std::size_t j = 0; j < cfg.d; ++j)
    means[1](static_cast<Eigen::Index>(j)) = 3.0 * alternating(j);
  means[2] = Eigen::VectorXd::Constant(di, 3.0);
  const std::array<Eigen::MatrixXd, 3> factors{
      mixture_factor(cfg.d, cfg.c, cfg.rho_corr),
      mixture_factor(cfg.d, 1.0, cfg.rho_corr),
      mixture_factor(cfg.d, cfg.c, cfg.rho_corr)};

  Eigen::VectorXd anomaly_mean(di);
  for (std::size_t j = 0; j < cfg.d; ++j)
    anomaly_mean(static_cast<Eigen::Index>(j)) =
        rng.uniform(-1.0, 1.0) + 2.0 * alternating(j);

  const std::size_t nominals = nominal_count(cfg);
  std::vector<Eigen::VectorXd> rows;
  std::vector<int> labels;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    if (i < nominals) {
      const std::size_t comp = rng.index(3);
      rows.push_back(means[comp] + factors[comp] * standard_normal(cfg.d, rng));
      labels.push_back(0);
    } else {
      rows.push_back(anomaly_mean + standard_normal(cfg.d, rng));
      labels.push_back(1);
    }
  }
  return shuffled(rows, labels, rng, feature_names(cfg.d));
}

LabeledDataset generate(const SynthConfig& cfg, SeededRng& rng) {
  switch (cfg.kind) {
    case SynthKind::kUncorrelated: return gen_uncorrelated(cfg, rng);
    case SynthKind::kNoise: return gen_noise(cfg, rng);
    case SynthKind::kCorrelated: return gen_correlated(cfg, rng);
    case SynthKind::kMixture: return gen_mixture(cfg, rng);
  }
  throw ConfigError("unknown synthetic config");
}

Injection inject_mcar(const MaskedMatrix& m, double rho, SeededRng& rng) {
  if (!(rho >= 0.0 && rho <= 0.9))
    throw ConfigError("rho must lie in [0, 0.9], got " + std::to_string(rho));
  require_complete(m, "MCAR injection input");
  Injection out{m, false};
  if (rho == 0.0 || m.rows() == 0) return out;

  const std::size_t d = m.cols();
  double mu = rho * static_cast<double>(d);
  // 0.1 * 10 and friends land a hair off the integer.
  if (std::abs(mu - std::round(mu)) < 1e-9) mu = std::round(mu);
  const auto m_low = static_cast<std::size_t>(std::floor(mu));
  const double r = mu - static_cast<double>(m_low);
  const auto n_high = static_cast<std::size_t>(
      std::llround(r * static_cast<double>(m.rows())));

  std::vector<std::size_t> count(m.rows(), m_low);
  for (std::size_t i : rng.sample_without_replacement(m.rows(), n_high))
    count[i] = m_low + 1;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const std::size_t k = std::min(count[i], d);
    if (k == d) out.all_missing_rows = true;
    for (std::size_t j : rng.sample_without_replacement(d, k))
      out.matrix.set_missing(i, j);
  }
  return out;
}

}  // namespace gapscore
