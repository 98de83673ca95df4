#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "gapscore/egmm.hpp"
#include "gapscore/iforest.hpp"
#include "gapscore/impute.hpp"
#include "gapscore/loda.hpp"
#include "gapscore/synth.hpp"

namespace gapscore {

// Mann-Whitney AUC with midranks for ties: the probability that a random
// anomaly (label 1) outscores a random nominal, ties counting one half.
// Throws UndefinedAucError unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

enum class Algorithm { kIforest, kLoda, kEgmm };
enum class Strategy { kMean, kMice, kProportional, kReduced, kMarginal };

Algorithm parse_algorithm(std::string_view name);
Strategy parse_strategy(std::string_view name);
std::string_view algorithm_name(Algorithm a);
std::string_view strategy_name(Strategy s);

// proportional: iforest; reduced: iforest, loda; marginal: egmm;
// mean and mice: all three.
bool supports(Algorithm a, Strategy s);

// A validated (algorithm, strategy) pair. The only way to get one is make(),
// which throws ConfigError for unsupported pairs.
class Method {
 public:
  static Method make(Algorithm a, Strategy s);

  Algorithm algorithm() const { return algorithm_; }
  Strategy strategy() const { return strategy_; }

  auto operator<=>(const Method&) const = default;

 private:
  Method(Algorithm a, Strategy s) : algorithm_(a), strategy_(s) {}
  Algorithm algorithm_;
  Strategy strategy_;
};

struct EvalRecord {
  std::string dataset;
  Method method;
  double rho = 0.0;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;  // seed of the (dataset, replicate) cell
  double auc = 0.0;
};

// Sort key: dataset, algorithm, strategy, rho, replicate.
bool record_less(const EvalRecord& a, const EvalRecord& b);

struct RelativeRecord {
  std::string dataset;
  Method method;
  double rho = 0.0;
  std::size_t replicate = 0;
  double relative = 0.0;
};

// AUC(rho) / AUC(0) within each (dataset, algorithm, replicate). The
// denominator is the rho = 0 record of the first strategy present in the
// order mean, mice, proportional, marginal, reduced. Throws ConfigError
// naming the group when no rho = 0 record exists.
std::vector<RelativeRecord> relative_auc_records(
    const std::vector<EvalRecord>& records);

using RelativeKey = std::tuple<std::string, Method, double>;

// Mean relative AUC over replicates, keyed by (dataset, method, rho).
std::map<RelativeKey, double> relative_auc(const std::vector<EvalRecord>& records);

struct DecayRow {
  Method method;
  double rho = 0.0;
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t count = 0;
};

// One row per (method, rho): mean relative AUC over replicates and
// datasets with a normal-approximation 95% interval
// mean -/+ 1.96 sd / sqrt(m). A single record gives a zero-width interval.
std::vector<DecayRow> summarize_decay(const std::vector<EvalRecord>& records);

struct DatasetSpec {
  std::string name;
  std::optional<SynthConfig> synth;
  // Correlated and mixture replicates cycle rho_corr through
  // replicate_rho_corr() unless this is false.
  bool cycle_rho_corr = true;
  std::filesystem::path csv;
  std::string label_column = "label";
};

struct ExperimentParams {
  IsolationForestParams iforest;
  LodaParams loda;
  EgmmParams egmm;
  MiceConfig mice;
};

struct ExperimentConfig {
  std::vector<DatasetSpec> datasets;
  std::vector<Method> methods;
  std::vector<double> rho_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  std::size_t replicates = 20;
  std::optional<std::uint64_t> master_seed;
  ExperimentParams params;
  std::size_t jobs = 1;

  // Non-empty datasets and methods, unique dataset names, a seed, rho grid
  // containing 0 with every value in [0, 0.9].
  void validate() const;
};

// Key-value config with sections:
//   [dataset]     synthetic = uncorrelated, mixture    csv = a.csv, b.csv
//                 label_column, n, d, anomaly_frac, rho_corr, c, b, n_noise
//   [algorithms]  iforest = mean, mice, proportional, reduced   (etc.)
//   [grid]        rho = 0, 0.1, ...   replicates = 20
//   [seed]        master = 42
//   [params]      trees, subsample, projections, ks, reps, passes, burnin,
//                 lambda, corpus (train+test | test-only), jobs
// Relative csv paths resolve against `base_dir`. Throws ConfigError.
ExperimentConfig parse_experiment_config(std::istream& in,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

using ProgressFn = std::function<void(const std::string& dataset,
                                      std::size_t replicate)>;

// Every (dataset, replicate) cell is independent and seeded from
// fork(dataset index, replicate); up to cfg.jobs cells run at once. The
// returned records are sorted with record_less, so the output does not
// depend on scheduling.
std::vector<EvalRecord> run_experiment(const ExperimentConfig& cfg,
                                       const ProgressFn& progress = {});

void write_records(const std::vector<EvalRecord>& records, std::ostream& out);
void write_summary(const std::vector<DecayRow>& rows, std::ostream& out);

// results.csv and summary.csv inside `dir`, created if needed.
void write_results(const std::vector<EvalRecord>& records,
                   const std::filesystem::path& dir);

}  // namespace gapscore
