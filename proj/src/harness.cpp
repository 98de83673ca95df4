#include "gapscore/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <set>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gapscore/csv.hpp"
#include "gapscore/errors.hpp"

namespace gapscore {

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw ConfigError("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw ConfigError("labels must be 0 or 1");
    if (std::isnan(scores[i])) throw DomainError("AUC of a NaN score");
    n_pos += static_cast<std::size_t>(labels[i]);
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw UndefinedAucError("AUC needs at least one anomaly and one nominal");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of positive ranks, each tie group sharing its mean rank. Ranks are
  // doubled to stay integral.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo + 1;
    while (hi < n && scores[order[hi]] == scores[order[lo]]) ++hi;
    const std::uint64_t twice_mid = lo + 1 + hi;  // 2 * mean of lo+1 .. hi
    for (std::size_t k = lo; k < hi; ++k)
      if (labels[order[k]] == 1) twice_rank_sum += twice_mid;
    lo = hi;
  }
  const double u = static_cast<double>(twice_rank_sum) / 2.0 -
                   static_cast<double>(n_pos) * static_cast<double>(n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "iforest") return Algorithm::kIforest;
  if (name == "loda") return Algorithm::kLoda;
  if (name == "egmm") return Algorithm::kEgmm;
  throw ConfigError("unknown algorithm '" + std::string(name) + "'");
}

Strategy parse_strategy(std::string_view name) {
  if (name == "mean") return Strategy::kMean;
  if (name == "mice") return Strategy::kMice;
  if (name == "proportional") return Strategy::kProportional;
  if (name == "reduced") return Strategy::kReduced;
  if (name == "marginal") return Strategy::kMarginal;
  throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

std::string_view algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kIforest: return "iforest";
    case Algorithm::kLoda: return "loda";
    case Algorithm::kEgmm: return "egmm";
  }
  return "unknown";
}

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kMean: return "mean";
    case Strategy::kMice: return "mice";
    case Strategy::kProportional: return "proportional";
    case Strategy::kReduced: return "reduced";
    case Strategy::kMarginal: return "marginal";
  }
  return "unknown";
}

bool supports(Algorithm a, Strategy s) {
  switch (s) {
    case Strategy::kMean:
    case Strategy::kMice: return true;
    case Strategy::kProportional: return a == Algorithm::kIforest;
    case Strategy::kReduced: return a != Algorithm::kEgmm;
    case Strategy::kMarginal: return a == Algorithm::kEgmm;
  }
  return false;
}

Method Method::make(Algorithm a, Strategy s) {
  if (!supports(a, s))
    throw ConfigError("strategy " + std::string(strategy_name(s)) +
                      " is not available for " + std::string(algorithm_name(a)));
  return Method(a, s);
}

bool record_less(const EvalRecord& a, const EvalRecord& b) {
  return std::tie(a.dataset, a.method, a.rho, a.replicate) <
         std::tie(b.dataset, b.method, b.rho, b.replicate);
}

std::vector<RelativeRecord> relative_auc_records(
    const std::vector<EvalRecord>& records) {
  constexpr std::array<Strategy, 5> kPreference{
      Strategy::kMean, Strategy::kMice, Strategy::kProportional,
      Strategy::kMarginal, Strategy::kReduced};
  using Group = std::tuple<std::string, Algorithm, std::size_t>;
  std::map<Group, std::map<Strategy, double>> zero;
  for (const auto& r : records)
    if (r.rho == 0.0)
      zero[{r.dataset, r.method.algorithm(), r.replicate}][r.method.strategy()] = r.auc;

  std::vector<RelativeRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const auto it = zero.find({r.dataset, r.method.algorithm(), r.replicate});
    if (it == zero.end())
      throw ConfigError("no rho = 0 record for dataset " + r.dataset +
                        ", algorithm " + std::string(algorithm_name(r.method.algorithm())) +
                        ", replicate " + std::to_string(r.replicate));
    double base = 0.0;
    for (Strategy s : kPreference) {
      const auto found = it->second.find(s);
      if (found != it->second.end()) {
        base = found->second;
        break;
      }
    }
    if (!(base > 0.0))
      throw DomainError("rho = 0 AUC is zero for dataset " + r.dataset +
                        ", replicate " + std::to_string(r.replicate));
    out.push_back({r.dataset, r.method, r.rho, r.replicate, r.auc / base});
  }
  return out;
}

std::map<RelativeKey, double> relative_auc(const std::vector<EvalRecord>& records) {
  std::map<RelativeKey, std::pair<double, std::size_t>> acc;
  for (const auto& r : relative_auc_records(records)) {
    auto& slot = acc[{r.dataset, r.method, r.rho}];
    slot.first += r.relative;
    ++slot.second;
  }
  std::map<RelativeKey, double> out;
  for (const auto& [key, v] : acc)
    out[key] = v.first / static_cast<double>(v.second);
  return out;
}

std::vector<DecayRow> summarize_decay(const std::vector<EvalRecord>& records) {
  std::map<std::pair<Method, double>, std::vector<double>> groups;
  for (const auto& r : relative_auc_records(records))
    groups[{r.method, r.rho}].push_back(r.relative);

  std::vector<DecayRow> out;
  for (const auto& [key, values] : groups) {
    const auto m = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / m;
    double half = 0.0;
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      half = 1.96 * std::sqrt(ss / (m - 1.0)) / std::sqrt(m);
    }
    out.push_back({key.first, key.second, mean, mean - half, mean + half,
                   values.size()});
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (datasets.empty()) throw ConfigError("experiment has no datasets");
  if (methods.empty()) throw ConfigError("experiment has no algorithms");
  if (replicates == 0) throw ConfigError("replicates must be at least 1");
  if (!master_seed) throw ConfigError("experiment needs a master seed");
  if (jobs == 0) throw ConfigError("jobs must be at least 1");
  std::set<std::string> names;
  for (const auto& ds : datasets) {
    if (!names.insert(ds.name).second)
      throw ConfigError("duplicate dataset name " + ds.name);
    if (ds.synth) ds.synth->validate();
  }
  if (std::find(rho_grid.begin(), rho_grid.end(), 0.0) == rho_grid.end())
    throw ConfigError("rho grid must contain 0");
  for (double r : rho_grid)
    if (!(r >= 0.0 && r <= 0.9)) throw ConfigError("rho grid values must lie in [0, 0.9]");
  params.mice.validate();
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto end = comma == std::string::npos ? s.size() : comma;
    std::string item = trim(std::string_view(s).substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  T v{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError("invalid value '" + t + "' for " + key);
  return v;
}

using boost::property_tree::ptree;

template <typename T>
void read_opt(const ptree& section, const char* key, const std::string& prefix,
              T& out) {
  if (const auto v = section.get_optional<std::string>(key))
    out = parse_value<T>(prefix + key, *v);
}

void reject_unknown(const ptree& section, const std::string& name,
                    std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : section)
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in [" + name + "]");
}

}  // namespace

ExperimentConfig parse_experiment_config(std::istream& in,
                                         const std::filesystem::path& base_dir) {
  ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("experiment config: " + e.message() + " at line " +
                      std::to_string(e.line()));
  }
  for (const auto& [name, _] : tree)
    if (name != "dataset" && name != "algorithms" && name != "grid" &&
        name != "seed" && name != "params")
      throw ConfigError("unknown section [" + name + "]");

  ExperimentConfig cfg;
  const ptree empty;
  const ptree& ds = tree.get_child("dataset", empty);
  reject_unknown(ds, "dataset",
                 {"synthetic", "csv", "label_column", "n", "d", "anomaly_frac",
                  "rho_corr", "c", "b", "n_noise"});
  SynthConfig base;
  read_opt(ds, "n", "dataset.", base.n);
  read_opt(ds, "d", "dataset.", base.d);
  read_opt(ds, "anomaly_frac", "dataset.", base.anomaly_frac);
  read_opt(ds, "c", "dataset.", base.c);
  read_opt(ds, "b", "dataset.", base.b);
  read_opt(ds, "n_noise", "dataset.", base.n_noise);
  const bool fixed_rho = ds.get_optional<std::string>("rho_corr").has_value();
  read_opt(ds, "rho_corr", "dataset.", base.rho_corr);
  for (const auto& kind : split_list(ds.get<std::string>("synthetic", ""))) {
    DatasetSpec spec;
    SynthConfig sc = base;
    sc.kind = parse_synth_kind(kind);
    spec.name = kind;
    spec.synth = sc;
    spec.cycle_rho_corr = !fixed_rho;
    cfg.datasets.push_back(std::move(spec));
  }
  const std::string label = trim(ds.get<std::string>("label_column", "label"));
  for (const auto& p : split_list(ds.get<std::string>("csv", ""))) {
    DatasetSpec spec;
    spec.csv = std::filesystem::path(p).is_absolute() ? std::filesystem::path(p)
                                                      : base_dir / p;
    spec.name = std::filesystem::path(p).stem().string();
    spec.label_column = label;
    cfg.datasets.push_back(std::move(spec));
  }

  for (const auto& [algo, value] : tree.get_child("algorithms", empty)) {
    const Algorithm a = parse_algorithm(algo);
    const auto strategies = split_list(value.data());
    if (strategies.empty())
      throw ConfigError("algorithm " + algo + " lists no strategies");
    for (const auto& s : strategies) {
      const Method m = Method::make(a, parse_strategy(s));
      if (std::find(cfg.methods.begin(), cfg.methods.end(), m) == cfg.methods.end())
        cfg.methods.push_back(m);
    }
  }

  const ptree& grid = tree.get_child("grid", empty);
  reject_unknown(grid, "grid", {"rho", "replicates"});
  if (const auto rho = grid.get_optional<std::string>("rho")) {
    cfg.rho_grid.clear();
    for (const auto& r : split_list(*rho))
      cfg.rho_grid.push_back(parse_value<double>("grid.rho", r));
  }
  read_opt(grid, "replicates", "grid.", cfg.replicates);

  const ptree& seed = tree.get_child("seed", empty);
  reject_unknown(seed, "seed", {"master"});
  if (const auto m = seed.get_optional<std::string>("master"))
    cfg.master_seed = parse_value<std::uint64_t>("seed.master", *m);

  const ptree& params = tree.get_child("params", empty);
  reject_unknown(params, "params",
                 {"trees", "subsample", "projections", "ks", "reps", "passes",
                  "burnin", "lambda", "corpus", "jobs"});
  read_opt(params, "trees", "params.", cfg.params.iforest.n_trees);
  read_opt(params, "subsample", "params.", cfg.params.iforest.subsample);
  read_opt(params, "projections", "params.", cfg.params.loda.n_projections);
  read_opt(params, "reps", "params.", cfg.params.egmm.reps_per_k);
  read_opt(params, "passes", "params.", cfg.params.mice.total_passes);
  read_opt(params, "burnin", "params.", cfg.params.mice.burn_in);
  read_opt(params, "lambda", "params.", cfg.params.mice.ridge_lambda);
  read_opt(params, "jobs", "params.", cfg.jobs);
  if (const auto ks = params.get_optional<std::string>("ks")) {
    cfg.params.egmm.ks.clear();
    for (const auto& k : split_list(*ks))
      cfg.params.egmm.ks.push_back(parse_value<std::size_t>("params.ks", k));
  }
  if (const auto corpus = params.get_optional<std::string>("corpus")) {
    const std::string c = trim(*corpus);
    if (c == "train+test") {
      cfg.params.mice.corpus = MiceCorpus::kTrainAndTest;
    } else if (c == "test-only") {
      cfg.params.mice.corpus = MiceCorpus::kTestOnly;
    } else {
      throw ConfigError("params.corpus must be train+test or test-only, got '" + c + "'");
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open experiment config " + path.string());
  return parse_experiment_config(in, path.parent_path());
}

namespace {

constexpr std::uint64_t kDataStream = 0;
constexpr std::uint64_t kModelStream = 1;
constexpr std::uint64_t kInjectStream = 2;
constexpr std::uint64_t kMiceStream = 3;

bool uses(const std::vector<Method>& methods, Algorithm a,
          std::initializer_list<Strategy> strategies) {
  return std::any_of(methods.begin(), methods.end(), [&](const Method& m) {
    return m.algorithm() == a &&
           std::find(strategies.begin(), strategies.end(), m.strategy()) !=
               strategies.end();
  });
}

bool uses_algorithm(const std::vector<Method>& methods, Algorithm a) {
  return std::any_of(methods.begin(), methods.end(),
                     [&](const Method& m) { return m.algorithm() == a; });
}

template <typename F>
std::vector<double> score_rows(const MaskedMatrix& x, F&& fn) {
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = fn(x.row(i)).score;
  return out;
}

struct CellModels {
  std::optional<IsolationForest> iforest;
  std::optional<IsolationForest> iforest_reduced;
  std::optional<LodaModel> loda;
  std::optional<EgmmModel> egmm;
};

std::vector<EvalRecord> run_cell(const ExperimentConfig& cfg, std::size_t di,
                                 std::size_t rep, const LabeledDataset* loaded) {
  const DatasetSpec& spec = cfg.datasets[di];
  const SeededRng cell = SeededRng(*cfg.master_seed).fork({di, rep});

  LabeledDataset data;
  if (spec.synth) {
    SynthConfig sc = *spec.synth;
    if (spec.cycle_rho_corr &&
        (sc.kind == SynthKind::kCorrelated || sc.kind == SynthKind::kMixture))
      sc.rho_corr = replicate_rho_corr(rep);
    SeededRng gen = cell.fork({kDataStream});
    data = generate(sc, gen);
  } else {
    data = *loaded;
  }
  const MaskedMatrix& x = data.features;
  const auto& methods = cfg.methods;
  const auto algo_key = [](Algorithm a) { return static_cast<std::uint64_t>(a); };

  CellModels models;
  if (uses(methods, Algorithm::kIforest,
           {Strategy::kMean, Strategy::kMice, Strategy::kProportional})) {
    IsolationForestParams p = cfg.params.iforest;
    p.reduced = false;
    models.iforest = fit_iforest(x, p, cell.fork({kModelStream, algo_key(Algorithm::kIforest), 0}));
  }
  if (uses(methods, Algorithm::kIforest, {Strategy::kReduced})) {
    IsolationForestParams p = cfg.params.iforest;
    p.reduced = true;
    models.iforest_reduced =
        fit_iforest(x, p, cell.fork({kModelStream, algo_key(Algorithm::kIforest), 1}));
  }
  if (uses_algorithm(methods, Algorithm::kLoda))
    models.loda = fit_loda(x, cfg.params.loda,
                           cell.fork({kModelStream, algo_key(Algorithm::kLoda), 0}));
  if (uses_algorithm(methods, Algorithm::kEgmm))
    models.egmm = fit_egmm(x, cfg.params.egmm,
                           cell.fork({kModelStream, algo_key(Algorithm::kEgmm), 0}));

  const bool need_mean = std::any_of(methods.begin(), methods.end(), [](const Method& m) {
    return m.strategy() == Strategy::kMean;
  });
  const bool need_mice = std::any_of(methods.begin(), methods.end(), [](const Method& m) {
    return m.strategy() == Strategy::kMice;
  });
  const ColumnStats stats = ColumnStats::from(x);

  std::vector<EvalRecord> out;
  for (double rho : cfg.rho_grid) {
    const std::uint64_t rho_key = std::bit_cast<std::uint64_t>(rho);
    SeededRng inject_rng = cell.fork({kInjectStream, rho_key});
    const MaskedMatrix damaged = inject_mcar(x, rho, inject_rng).matrix;
    std::optional<MaskedMatrix> mean_filled;
    std::optional<MaskedMatrix> mice_filled;
    if (need_mean) mean_filled = mean_impute(stats, damaged);
    if (need_mice)
      mice_filled = mice_impute(damaged, x, cfg.params.mice,
                                cell.fork({kMiceStream, rho_key}))
                        .imputed;

    for (const Method& m : methods) {
      const MaskedMatrix* input = &damaged;
      if (m.strategy() == Strategy::kMean) input = &*mean_filled;
      if (m.strategy() == Strategy::kMice) input = &*mice_filled;
      std::vector<double> scores;
      switch (m.algorithm()) {
        case Algorithm::kIforest: {
          TreeStrategy ts = TreeStrategy::kBaseline;
          const IsolationForest* forest = &*models.iforest;
          if (m.strategy() == Strategy::kProportional) ts = TreeStrategy::kProportional;
          if (m.strategy() == Strategy::kReduced) {
            ts = TreeStrategy::kReduced;
            forest = &*models.iforest_reduced;
          }
          scores = score_rows(*input, [&](const RowView& r) {
            return score_iforest(*forest, r, ts);
          });
          break;
        }
        case Algorithm::kLoda: {
          const LodaStrategy ls = m.strategy() == Strategy::kReduced
                                      ? LodaStrategy::kReduced
                                      : LodaStrategy::kBaseline;
          scores = score_rows(*input, [&](const RowView& r) {
            return score_loda(*models.loda, r, ls);
          });
          break;
        }
        case Algorithm::kEgmm: {
          const DensityStrategy ds = m.strategy() == Strategy::kMarginal
                                         ? DensityStrategy::kMarginal
                                         : DensityStrategy::kBaseline;
          for (const auto& s : score_egmm_rows(*models.egmm, *input, ds))
            scores.push_back(s.score);
          break;
        }
      }
      out.push_back({spec.name, m, rho, rep, cell.seed(), auc(scores, data.labels)});
    }
  }
  return out;
}

}  // namespace

std::vector<EvalRecord> run_experiment(const ExperimentConfig& cfg,
                                       const ProgressFn& progress) {
  cfg.validate();
  std::vector<std::optional<LabeledDataset>> loaded(cfg.datasets.size());
  for (std::size_t i = 0; i < cfg.datasets.size(); ++i) {
    const DatasetSpec& spec = cfg.datasets[i];
    if (spec.synth) continue;
    CsvReadOptions opts;
    opts.label_column = spec.label_column;
    loaded[i] = load_csv(spec.csv, opts);
    require_complete(loaded[i]->features, ("dataset " + spec.name).c_str());
  }

  const std::size_t n_cells = cfg.datasets.size() * cfg.replicates;
  std::vector<std::vector<EvalRecord>> results(n_cells);
  std::vector<std::exception_ptr> errors(n_cells);
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;

  const auto worker = [&] {
    for (std::size_t c = next++; c < n_cells; c = next++) {
      const std::size_t di = c / cfg.replicates;
      const std::size_t rep = c % cfg.replicates;
      try {
        results[c] = run_cell(cfg, di, rep, loaded[di] ? &*loaded[di] : nullptr);
      } catch (...) {
        errors[c] = std::current_exception();
      }
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(cfg.datasets[di].name, rep);
      }
    }
  };
  const std::size_t threads = std::min(cfg.jobs, n_cells);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<EvalRecord> records;
  for (auto& r : results)
    records.insert(records.end(), std::make_move_iterator(r.begin()),
                   std::make_move_iterator(r.end()));
  std::sort(records.begin(), records.end(), record_less);
  return records;
}

void write_records(const std::vector<EvalRecord>& records, std::ostream& out) {
  out << "dataset,algorithm,strategy,rho,replicate,seed,auc\n";
  for (const auto& r : records)
    out << r.dataset << ',' << algorithm_name(r.method.algorithm()) << ','
        << strategy_name(r.method.strategy()) << ',' << format_number(r.rho) << ','
        << r.replicate << ',' << r.seed << ',' << format_number(r.auc) << '\n';
}

void write_summary(const std::vector<DecayRow>& rows, std::ostream& out) {
  out << "algorithm,strategy,rho,mean_rel_auc,ci_lo,ci_hi\n";
  for (const auto& r : rows)
    out << algorithm_name(r.method.algorithm()) << ','
        << strategy_name(r.method.strategy()) << ',' << format_number(r.rho) << ','
        << format_number(r.mean) << ',' << format_number(r.ci_lo) << ','
        << format_number(r.ci_hi) << '\n';
}

void write_results(const std::vector<EvalRecord>& records,
                   const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  {
    std::ofstream out(dir / "results.csv");
    if (!out) throw IoError("cannot write " + (dir / "results.csv").string());
    write_records(records, out);
  }
  std::ofstream out(dir / "summary.csv");
  if (!out) throw IoError("cannot write " + (dir / "summary.csv").string());
  write_summary(summarize_decay(records), out);
}

}  // namespace gapscore
