#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gapscore/csv.hpp"
#include "gapscore/errors.hpp"
#include "gapscore/harness.hpp"
#include "gapscore/impute.hpp"
#include "gapscore/serialize.hpp"
#include "gapscore/synth.hpp"

namespace gapscore {
namespace {

struct InputOptions {
  std::string label_column = "label";
  std::optional<double> sentinel;
};

void add_input_options(CLI::App* app, InputOptions& o) {
  app->add_option("--label-column", o.label_column,
                  "Label column, dropped from the features when present")
      ->capture_default_str();
  app->add_option("--sentinel", o.sentinel, "Numeric value to read as NA");
}

std::vector<std::string> header_names(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> names;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    names.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return names;
}

// Loads a CSV, splitting off the label column when the header has one.
LabeledDataset load_input(const std::string& path, const InputOptions& o) {
  CsvReadOptions opts;
  opts.sentinel = o.sentinel;
  const auto names = header_names(path);
  if (std::find(names.begin(), names.end(), o.label_column) != names.end())
    opts.label_column = o.label_column;
  return load_csv(path, opts);
}

void write_dataset(const LabeledDataset& data, const std::string& path,
                   const std::string& label_name) {
  write_csv(to_table(data, label_name), std::filesystem::path(path));
}

std::uint64_t require_seed(const std::optional<std::uint64_t>& seed,
                           const std::string& command) {
  if (!seed) throw ConfigError(command + " is stochastic and needs --seed");
  return *seed;
}

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t k = 0;
    std::size_t used = 0;
    try {
      k = std::stoul(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || k == 0)
      throw ConfigError("invalid --ks entry '" + item + "'");
    ks.push_back(k);
  }
  if (ks.empty()) throw ConfigError("--ks needs at least one value");
  return ks;
}

std::vector<double> read_column(const std::string& path,
                                const std::string& preferred) {
  const LabeledDataset data = load_csv(path);
  std::size_t col = 0;
  const auto it = std::find(data.names.begin(), data.names.end(), preferred);
  if (it != data.names.end()) col = static_cast<std::size_t>(it - data.names.begin());
  std::vector<double> out(data.features.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!data.features.observed(i, col))
      throw ParseError(i + 1, data.names[col], "NA is not allowed here");
    out[i] = data.features.value(i, col);
  }
  return out;
}

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const ParseError*>(&e)) return "parse";
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  if (dynamic_cast<const UnsupportedInputError*>(&e)) return "unsupported-input";
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  if (dynamic_cast<const ContractViolation*>(&e)) return "contract";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  if (dynamic_cast<const UndefinedAucError*>(&e)) return "undefined-auc";
  return "runtime";
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Anomaly detection with missing values: detectors, imputation and benchmarks",
               "gapscore"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gapscore 0.1.0");

  // synth
  CLI::App* synth = app.add_subcommand("synth", "Generate a labeled synthetic dataset");
  std::string synth_kind;
  SynthConfig sc;
  std::optional<std::uint64_t> synth_seed;
  std::string synth_out;
  synth->add_option("--config", synth_kind, "uncorrelated | noise | correlated | mixture")
      ->required();
  synth->add_option("--n", sc.n, "Rows")->capture_default_str();
  synth->add_option("--d", sc.d, "Base feature count")->capture_default_str();
  synth->add_option("--anomaly-frac", sc.anomaly_frac, "Fraction of anomalies")
      ->capture_default_str();
  synth->add_option("--rho-corr", sc.rho_corr, "Off-diagonal correlation scale")
      ->capture_default_str();
  synth->add_option("--c", sc.c, "Diagonal scale")->capture_default_str();
  synth->add_option("--b", sc.b, "Anomaly offset scale (correlated)")->capture_default_str();
  synth->add_option("--n-noise", sc.n_noise, "Noise columns (noise config)")
      ->capture_default_str();
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--out", synth_out, "Output CSV")->required();

  // inject
  CLI::App* inject = app.add_subcommand("inject", "Insert MCAR missing values");
  double inject_rho = 0.0;
  std::optional<std::uint64_t> inject_seed;
  std::string inject_in;
  std::string inject_out;
  InputOptions inject_io;
  inject->add_option("--rho", inject_rho, "Fraction of values removed per row")->required();
  inject->add_option("--seed", inject_seed, "Random seed");
  inject->add_option("--in", inject_in, "Complete input CSV")->required();
  inject->add_option("--out", inject_out, "Output CSV")->required();
  add_input_options(inject, inject_io);

  // fit
  CLI::App* fit = app.add_subcommand("fit", "Fit a detector on complete training data");
  std::string fit_algo;
  std::string fit_train;
  std::string fit_model;
  std::optional<std::uint64_t> fit_seed;
  IsolationForestParams ifp;
  LodaParams lp;
  EgmmParams ep;
  std::string fit_ks = "3,4,5";
  InputOptions fit_io;
  fit->add_option("--algo", fit_algo, "iforest | loda | egmm")->required();
  fit->add_option("--train", fit_train, "Training CSV")->required();
  fit->add_option("--model", fit_model, "Output model file (JSON)")->required();
  fit->add_option("--seed", fit_seed, "Random seed");
  fit->add_option("--trees", ifp.n_trees, "iforest: trees")->capture_default_str();
  fit->add_option("--subsample", ifp.subsample, "iforest: rows per tree")->capture_default_str();
  fit->add_flag("--reduced", ifp.reduced, "iforest: feature-bagged trees");
  fit->add_option("--projections", lp.n_projections, "loda: projections")
      ->capture_default_str();
  fit->add_option("--ks", fit_ks, "egmm: component counts")->capture_default_str();
  fit->add_option("--reps", ep.reps_per_k, "egmm: bootstrap replicates per k")
      ->capture_default_str();
  add_input_options(fit, fit_io);

  // score
  CLI::App* score = app.add_subcommand("score", "Score rows with a fitted model");
  std::string score_model;
  std::string score_in;
  std::string score_out;
  std::string score_strategy = "baseline";
  InputOptions score_io;
  score->add_option("--model", score_model, "Model file")->required();
  score->add_option("--in", score_in, "Query CSV")->required();
  score->add_option("--out", score_out, "Output CSV with score,fallback")->required();
  score->add_option("--strategy", score_strategy,
                    "baseline | proportional | reduced (iforest); baseline | reduced "
                    "(loda); baseline | marginal (egmm)")
      ->capture_default_str();
  add_input_options(score, score_io);

  // impute
  CLI::App* impute = app.add_subcommand("impute", "Fill missing values");
  std::string impute_method;
  std::string impute_train;
  std::string impute_test;
  std::string impute_out;
  MiceConfig mc;
  std::string impute_corpus = "train+test";
  std::optional<std::uint64_t> impute_seed;
  InputOptions impute_io;
  impute->add_option("--method", impute_method, "mean | mice")->required();
  impute->add_option("--train", impute_train, "Complete training CSV")->required();
  impute->add_option("--test", impute_test, "CSV with NA cells")->required();
  impute->add_option("--out", impute_out, "Output CSV")->required();
  impute->add_option("--passes", mc.total_passes, "mice: total Gibbs passes")
      ->capture_default_str();
  impute->add_option("--burnin", mc.burn_in, "mice: discarded passes")->capture_default_str();
  impute->add_option("--lambda", mc.ridge_lambda, "mice: ridge penalty")->capture_default_str();
  impute->add_option("--corpus", impute_corpus, "mice: train+test | test-only")
      ->capture_default_str();
  impute->add_option("--seed", impute_seed, "Random seed (mice)");
  add_input_options(impute, impute_io);

  // auc
  CLI::App* auc_cmd = app.add_subcommand("auc", "Area under the ROC curve");
  std::string auc_scores;
  std::string auc_labels;
  auc_cmd->add_option("--scores", auc_scores, "CSV with a score column (or first column)")
      ->required();
  auc_cmd->add_option("--labels", auc_labels, "CSV with a label column (or first column)")
      ->required();

  // experiment
  CLI::App* exp = app.add_subcommand("experiment", "Run the missing-value AUC decay study");
  std::string exp_config;
  std::string exp_out;
  std::optional<std::size_t> exp_jobs;
  std::optional<std::uint64_t> exp_seed;
  bool exp_verbose = false;
  exp->add_option("--config", exp_config, "Experiment config file")->required();
  exp->add_option("--out", exp_out, "Output directory")->required();
  exp->add_option("--jobs", exp_jobs, "Concurrent (dataset, replicate) cells");
  exp->add_option("--seed", exp_seed, "Master seed, overrides [seed] master");
  exp->add_flag("--verbose", exp_verbose, "Report finished cells on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    if (*synth) {
      sc.kind = parse_synth_kind(synth_kind);
      SeededRng rng(require_seed(synth_seed, "synth"));
      write_dataset(generate(sc, rng), synth_out, "label");
    } else if (*inject) {
      SeededRng rng(require_seed(inject_seed, "inject"));
      LabeledDataset data = load_input(inject_in, inject_io);
      const Injection inj = inject_mcar(data.features, inject_rho, rng);
      if (inj.all_missing_rows)
        err << "warning: some rows have every feature missing\n";
      data.features = inj.matrix;
      write_dataset(data, inject_out, inject_io.label_column);
    } else if (*fit) {
      const Algorithm algo = parse_algorithm(fit_algo);
      const SeededRng rng(require_seed(fit_seed, "fit"));
      const LabeledDataset data = load_input(fit_train, fit_io);
      switch (algo) {
        case Algorithm::kIforest:
          save_model(fit_iforest(data.features, ifp, rng), std::filesystem::path(fit_model));
          break;
        case Algorithm::kLoda:
          save_model(fit_loda(data.features, lp, rng), std::filesystem::path(fit_model));
          break;
        case Algorithm::kEgmm:
          ep.ks = parse_ks(fit_ks);
          save_model(fit_egmm(data.features, ep, rng), std::filesystem::path(fit_model));
          break;
      }
    } else if (*score) {
      const AnyModel model = load_model(std::filesystem::path(score_model));
      const LabeledDataset data = load_input(score_in, score_io);
      const MaskedMatrix& x = data.features;
      std::vector<ScoreResult> results;
      const auto bad_strategy = [&](const char* algo) {
        return ConfigError("strategy '" + score_strategy + "' is not available for " + algo);
      };
      if (const auto* f = std::get_if<IsolationForest>(&model)) {
        TreeStrategy ts;
        if (score_strategy == "baseline") ts = TreeStrategy::kBaseline;
        else if (score_strategy == "proportional") ts = TreeStrategy::kProportional;
        else if (score_strategy == "reduced") ts = TreeStrategy::kReduced;
        else throw bad_strategy("iforest");
        if (ts == TreeStrategy::kReduced && !f->reduced)
          throw ConfigError("reduced scoring needs a model fit with --reduced");
        for (std::size_t i = 0; i < x.rows(); ++i)
          results.push_back(score_iforest(*f, x.row(i), ts));
      } else if (const auto* l = std::get_if<LodaModel>(&model)) {
        LodaStrategy ls;
        if (score_strategy == "baseline") ls = LodaStrategy::kBaseline;
        else if (score_strategy == "reduced") ls = LodaStrategy::kReduced;
        else throw bad_strategy("loda");
        for (std::size_t i = 0; i < x.rows(); ++i)
          results.push_back(score_loda(*l, x.row(i), ls));
      } else {
        DensityStrategy ds;
        if (score_strategy == "baseline") ds = DensityStrategy::kBaseline;
        else if (score_strategy == "marginal") ds = DensityStrategy::kMarginal;
        else throw bad_strategy("egmm");
        results = score_egmm_rows(std::get<EgmmModel>(model), x, ds);
      }
      CsvTable table;
      std::vector<CsvCell> s;
      std::vector<CsvCell> fb;
      for (const auto& r : results) {
        s.emplace_back(r.score);
        fb.emplace_back(static_cast<std::int64_t>(r.fallback));
      }
      table.add_column("score", std::move(s));
      table.add_column("fallback", std::move(fb));
      write_csv(table, std::filesystem::path(score_out));
    } else if (*impute) {
      const LabeledDataset train = load_input(impute_train, impute_io);
      LabeledDataset test = load_input(impute_test, impute_io);
      if (train.features.cols() != test.features.cols())
        throw ConfigError("train and test differ in column count");
      if (impute_method == "mean") {
        test.features = mean_impute(ColumnStats::from(train.features), test.features);
      } else if (impute_method == "mice") {
        if (impute_corpus == "train+test") mc.corpus = MiceCorpus::kTrainAndTest;
        else if (impute_corpus == "test-only") mc.corpus = MiceCorpus::kTestOnly;
        else throw ConfigError("--corpus must be train+test or test-only, got '" +
                               impute_corpus + "'");
        const SeededRng rng(require_seed(impute_seed, "impute --method mice"));
        MiceResult res = mice_impute(test.features, train.features, mc, rng);
        for (std::size_t j : res.unidentified_columns)
          err << "warning: column " << test.names[j]
              << " has no observed values; filled with 0\n";
        test.features = std::move(res.imputed);
      } else {
        throw ConfigError("unknown imputation method '" + impute_method + "'");
      }
      write_dataset(test, impute_out, impute_io.label_column);
    } else if (*auc_cmd) {
      const std::vector<double> scores = read_column(auc_scores, "score");
      const std::vector<double> raw = read_column(auc_labels, "label");
      std::vector<int> labels;
      for (double v : raw) {
        if (v != 0.0 && v != 1.0) throw ConfigError("labels must be 0 or 1");
        labels.push_back(static_cast<int>(v));
      }
      out << format_number(auc(scores, labels)) << '\n';
    } else if (*exp) {
      ExperimentConfig cfg = load_experiment_config(exp_config);
      if (exp_seed) cfg.master_seed = exp_seed;
      if (exp_jobs) cfg.jobs = *exp_jobs;
      cfg.validate();
      ProgressFn progress;
      if (exp_verbose)
        progress = [&err](const std::string& ds, std::size_t rep) {
          err << "done " << ds << " replicate " << rep << '\n';
        };
      write_results(run_experiment(cfg, progress), std::filesystem::path(exp_out));
    }
  } catch (const ConfigError& e) {
    err << "error: config: " << one_line(e.what()) << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << error_kind(e) << ": " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}

}  // namespace gapscore
