// rocsurv command-line front end.

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rocsurv/concordance.hpp"
#include "rocsurv/errors.hpp"
#include "rocsurv/forest.hpp"
#include "rocsurv/model_io.hpp"
#include "rocsurv/roc_tree.hpp"
#include "rocsurv/scenario.hpp"
#include "rocsurv/survival_data.hpp"

using namespace rocsurv;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct FitSettings {
  std::string data;
  std::string out;
  std::size_t q = 20;
  std::size_t n_min = 15;
  std::string criterion = "delta_icon";
  std::string bandwidth = "global";
  double bandwidth_c = 0.0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
};

struct TreeSettings {
  FitSettings fit;
  std::size_t folds = 10;
  std::string report;
};

struct ForestSettings {
  FitSettings fit;
  std::size_t trees = 500;
  std::size_t mtry = 0;
  std::string mode = "bootstrap";
  double fraction = 0.632;
  std::size_t threads = 0;
};

struct PredictSettings {
  std::string model;
  std::string data;
  std::vector<double> times;
  bool hazard = false;
  std::string out;
};

struct BenchmarkSettings {
  std::string scenario = "I";
  std::size_t n = 200;
  double censoring = 0.0;
  std::string methods = "tree,forest";
  std::string criteria = "delta_icon";
  std::size_t replicates = 50;
  std::uint64_t seed = 0;
  std::size_t q = 20;
  std::size_t n_min = 15;
  std::size_t folds = 10;
  std::size_t trees = 500;
  std::size_t mtry = 0;
  std::size_t new_subjects = 500;
  std::size_t threads = 0;
  std::string out;
};

struct SimulateSettings {
  std::string scenario = "I";
  std::size_t n = 200;
  double censoring = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

struct EvalSettings {
  std::string data;
  std::string predictions;
  std::size_t q = 20;
  double horizon = 0.0;
  std::string out;
};

void add_fit_options(CLI::App* cmd, FitSettings& s) {
  cmd->add_option("--data", s.data, "Long-format training CSV (id,tstart,tstop,status,z1,...)")->required();
  cmd->add_option("--out", s.out, "Model JSON to write")->required();
  cmd->add_option("--q", s.q, "Number of grid times (quantiles of uncensored times)")
      ->capture_default_str()
      ->check(CLI::Range(1, 10000));
  cmd->add_option("--n-min", s.n_min, "Minimum baseline count of a splittable node")
      ->capture_default_str()
      ->check(CLI::Range(2, 1000000));
  cmd->add_option("--criterion", s.criterion, "Split criterion")
      ->capture_default_str()
      ->check(CLI::IsMember({"delta_icon", "global_icon"}));
  cmd->add_option("--bandwidth", s.bandwidth, "Bandwidth policy")
      ->capture_default_str()
      ->check(CLI::IsMember({"global", "adaptive"}));
  cmd->add_option("--bandwidth-c", s.bandwidth_c, "Constant c of the adaptive bandwidth (default s/8)");
  cmd->add_option("--horizon", s.horizon, "Analysis horizon s (default: 0.95 quantile of uncensored times)");
  cmd->add_option("--seed", s.seed, "Random seed")->required();
}

std::optional<double> positive_or_none(double v) { return v > 0.0 ? std::optional<double>(v) : std::nullopt; }

std::shared_ptr<const TransformedDataset> load_training(const FitSettings& s, BandwidthPolicy& policy) {
  auto data = std::make_shared<const Dataset>(read_dataset_file(s.data, positive_or_none(s.horizon)));
  const TimeGrid grid = uncensored_quantile_grid(*data, s.q);
  policy = s.bandwidth == "adaptive" ? BandwidthPolicy::node_adaptive(*data, positive_or_none(s.bandwidth_c))
                                     : BandwidthPolicy::global(*data);
  return std::make_shared<const TransformedDataset>(transform(data, grid));
}

int run_fit_tree(const TreeSettings& s) {
  std::cout << "fit-tree: q=" << s.fit.q << " n_min=" << s.fit.n_min << " folds=" << s.folds
            << " criterion=" << s.fit.criterion << " bandwidth=" << s.fit.bandwidth << " seed=" << s.fit.seed << '\n';
  BandwidthPolicy policy;
  const auto td = load_training(s.fit, policy);
  TreeOptions options;
  options.grow.n_min = s.fit.n_min;
  options.grow.criterion = parse_split_criterion(s.fit.criterion);
  options.folds = s.folds;
  options.seed = s.fit.seed;
  const RocTree tree = select_by_cv(*td, policy, options);
  const ConcordanceReport report = tree.concordance();

  write_file_atomic(s.fit.out, to_json(tree).dump(1) + "\n");
  if (!s.report.empty()) write_file_atomic(s.report, to_json(report).dump(1) + "\n");

  std::cout << std::setprecision(6);
  std::cout << "subjects " << td->size() << ", events " << td->source->num_events() << ", p " << td->dim() << '\n';
  std::cout << "bandwidth h " << policy.global_h << ", horizon s " << td->source->horizon << '\n';
  std::cout << "ICON " << report.icon << '\n';
  std::cout << "leaves " << tree.num_leaves() << '\n';
  std::cout << "pruning trace (q, alpha, size, beta, mean held-out ICON)\n";
  for (std::size_t q = 0; q < tree.pruning.alpha.size(); ++q) {
    std::cout << "  " << q << ' ' << tree.pruning.alpha[q] << ' ' << tree.pruning.sizes[q] << ' '
              << tree.pruning.beta[q] << ' ' << tree.cv.mean_heldout_icon[q] << '\n';
  }
  std::cout << "selected beta " << tree.cv.selected_beta << " (" << tree.cv.folds_used << " folds used)\n";
  for (const auto& w : tree.cv.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "model written to " << s.fit.out << '\n';
  return kOk;
}

int run_fit_forest(const ForestSettings& s) {
  BandwidthPolicy policy;
  const auto td = load_training(s.fit, policy);
  ForestOptions options;
  options.trees = s.trees;
  if (s.mtry > 0) options.mtry = s.mtry;
  options.n_min = s.fit.n_min;
  options.mode = parse_resample_mode(s.mode);
  options.subsample_fraction = s.fraction;
  options.criterion = parse_split_criterion(s.fit.criterion);
  options.seed = s.fit.seed;
  options.threads = s.threads;
  const std::size_t mtry =
      s.mtry > 0 ? s.mtry : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(td->dim()))));
  std::cout << "fit-forest: B=" << s.trees << " m=" << mtry << " n_min=" << s.fit.n_min << " mode=" << s.mode
            << " criterion=" << s.fit.criterion << " q=" << s.fit.q << " seed=" << s.fit.seed << '\n';
  const ForestModel forest = fit_forest(td, policy, options);
  write_file_atomic(s.fit.out, to_json(forest).dump() + "\n");
  std::size_t leaves = 0;
  for (const auto& tree : forest.trees) leaves += tree.partition.num_leaves();
  std::cout << "subjects " << td->size() << ", events " << td->source->num_events() << ", p " << td->dim() << '\n';
  std::cout << "mean leaves per tree " << static_cast<double>(leaves) / static_cast<double>(forest.size()) << '\n';
  std::cout << "model written to " << s.fit.out << '\n';
  return kOk;
}

void write_prediction_row(std::ostream& out, const std::string& id, double t, double survival,
                          const std::optional<std::optional<double>>& hazard) {
  out << id << ',' << t << ',' << survival;
  if (hazard) {
    out << ',';
    if (*hazard) {
      out << **hazard;
    } else {
      out << "NA";
    }
  }
  out << '\n';
}

int run_predict(const PredictSettings& s) {
  const Model model = load_model(s.model);
  const LongTable table = read_long_table_file(s.data);
  const std::size_t p = std::visit([](const auto& m) -> std::size_t {
    if constexpr (std::is_same_v<std::decay_t<decltype(m)>, RocTree>) {
      return m.p;
    } else {
      return m.p();
    }
  }, model);
  if (table.covariate_names.size() != p) {
    throw DataError("history file has " + std::to_string(table.covariate_names.size()) +
                    " covariates; the model expects p = " + std::to_string(p));
  }
  const auto paths = paths_from_rows(table.rows, p);

  std::ofstream file;
  if (!s.out.empty()) {
    file.open(s.out);
    if (!file) throw DataError("cannot write '" + s.out + "'");
  }
  std::ostream& out = s.out.empty() ? std::cout : file;
  out << std::setprecision(17);
  out << "id,t,survival" << (s.hazard ? ",hazard" : "") << '\n';

  std::size_t skipped = 0;
  if (const auto* tree = std::get_if<RocTree>(&model)) {
    PredictionDiagnostics diag;
    for (const auto& path : paths) {
      const auto survival = survival_curve(*tree, path, s.times, &diag);
      for (std::size_t k = 0; k < s.times.size(); ++k) {
        std::optional<std::optional<double>> hazard;
        if (s.hazard) hazard = s.times[k] > 0.0 ? predict_hazard(*tree, path, s.times[k]) : std::nullopt;
        write_prediction_row(out, path.id, s.times[k], survival[k], hazard);
      }
    }
    skipped = diag.skipped_increments;
  } else {
    const auto& forest = std::get<ForestModel>(model);
    ForestDiagnostics diag;
    const auto survival = forest_survival(forest, paths, s.times, &diag);
    for (std::size_t j = 0; j < paths.size(); ++j) {
      for (std::size_t k = 0; k < s.times.size(); ++k) {
        std::optional<std::optional<double>> hazard;
        if (s.hazard) hazard = forest_hazard(forest, paths[j], s.times[k]);
        write_prediction_row(out, paths[j].id, s.times[k], survival[j][k], hazard);
      }
    }
    skipped = diag.skipped_increments;
  }
  if (skipped > 0) std::cerr << "warning: " << skipped << " increments skipped (empty local risk set)\n";
  return kOk;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

int run_benchmark_cmd(const BenchmarkSettings& s) {
  BenchmarkConfig config;
  config.scenario = parse_scenario(s.scenario);
  config.n = s.n;
  config.censoring = s.censoring;
  config.methods.clear();
  for (const auto& m : split_list(s.methods)) config.methods.push_back(parse_method(m));
  config.criteria.clear();
  for (const auto& c : split_list(s.criteria)) config.criteria.push_back(parse_split_criterion(c));
  if (config.methods.empty() || config.criteria.empty()) throw DataError("empty method or criterion list");
  config.replicates = s.replicates;
  config.seed = s.seed;
  config.q = s.q;
  config.n_min = s.n_min;
  config.folds = s.folds;
  config.trees = s.trees;
  if (s.mtry > 0) config.mtry = s.mtry;
  config.new_subjects = s.new_subjects;
  config.threads = s.threads;

  std::cerr << "benchmark: scenario=" << s.scenario << " n=" << s.n << " censoring=" << s.censoring
            << " replicates=" << s.replicates << " B=" << s.trees << " q=" << s.q << " n_min=" << s.n_min
            << " folds=" << s.folds << " seed=" << s.seed << '\n';

  std::ofstream file;
  if (!s.out.empty()) {
    file.open(s.out);
    if (!file) throw DataError("cannot write '" + s.out + "'");
  }
  std::ostream& out = s.out.empty() ? std::cout : file;
  write_benchmark_header(out);
  const auto rows = run_benchmark(config, [&](const BenchmarkRow& row) {
    write_benchmark_row(out, row);
    out.flush();
  });

  std::map<std::string, std::pair<double, std::size_t>> means;
  std::size_t failures = 0;
  for (const auto& row : rows) {
    const std::string key = to_string(row.method) + (row.criterion ? "/" + to_string(*row.criterion) : "");
    if (!row.iae) {
      ++failures;
      continue;
    }
    means[key].first += *row.iae;
    means[key].second += 1;
  }
  for (const auto& [key, sum] : means) {
    std::cerr << "mean IAE x1000 " << key << ": " << std::fixed << std::setprecision(1)
              << 1000.0 * sum.first / static_cast<double>(sum.second) << " (" << sum.second << " replicates)\n";
  }
  if (failures > 0) std::cerr << "failed replicates: " << failures << " of " << rows.size() << '\n';
  return 10 * failures > rows.size() ? kNumeric : kOk;
}

int run_simulate(const SimulateSettings& s) {
  const ScenarioSpec spec = prepare_scenario(parse_scenario(s.scenario), s.n, s.censoring, s.seed);
  Rng rng = make_stream(s.seed, "generate", 0);
  const auto generated = generate(spec, rng);
  std::ostringstream buffer;
  write_long_format(buffer, generated.data);
  if (s.out.empty()) {
    std::cout << buffer.str();
  } else {
    write_file_atomic(s.out, buffer.str());
  }
  const double censored = 1.0 - static_cast<double>(generated.data.num_events()) / static_cast<double>(s.n);
  std::cerr << "simulate: scenario=" << s.scenario << " n=" << s.n << " eta=" << spec.eta
            << " censored fraction=" << censored << " population horizon=" << spec.horizon << '\n';
  return kOk;
}

// Scores: `id,score` (time-invariant) or `id,t,score` (carried forward from t).
std::map<std::string, std::vector<std::pair<double, double>>> read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open prediction file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("prediction file is empty");
  const bool timed = std::count(line.begin(), line.end(), ',') == 2;
  std::map<std::string, std::vector<std::pair<double, double>>> scores;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != (timed ? 3u : 2u)) throw DataError("bad prediction row at line " + std::to_string(line_no));
    try {
      const double t = timed ? std::stod(cells[1]) : 0.0;
      scores[cells[0]].emplace_back(t, std::stod(cells.back()));
    } catch (const std::exception&) {
      throw DataError("non-numeric prediction at line " + std::to_string(line_no));
    }
  }
  for (auto& [id, rows] : scores) std::sort(rows.begin(), rows.end());
  return scores;
}

double score_at(const std::vector<std::pair<double, double>>& rows, double t) {
  auto it = std::upper_bound(rows.begin(), rows.end(), std::make_pair(t, std::numeric_limits<double>::infinity()));
  if (it == rows.begin()) return rows.front().second;
  return std::prev(it)->second;
}

int run_eval_icon(const EvalSettings& s) {
  const Dataset data = read_dataset_file(s.data, positive_or_none(s.horizon));
  const auto scores = read_scores(s.predictions);
  const TimeGrid grid = uncensored_quantile_grid(data, s.q);
  const BandwidthPolicy policy = BandwidthPolicy::global(data);
  const Kernel kernel{policy.global_h};
  std::vector<const std::vector<std::pair<double, double>>*> per_subject;
  for (const auto& subject : data.subjects) {
    const auto it = scores.find(subject.id);
    if (it == scores.end()) throw DataError("no prediction for subject '" + subject.id + "'");
    per_subject.push_back(&it->second);
  }
  ConcordanceReport report;
  report.times = grid.times;
  report.weights = grid.weights;
  double weighted = 0.0, weight_total = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double t = grid.times[k];
    const double tc = boundary_clamp(t, kernel.h, data.horizon);
    std::vector<Scored> cases, controls;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& subject = data.subjects[i];
      if (subject.event) {
        const double w = kernel(tc - subject.y);
        if (w > 0.0) cases.push_back({score_at(*per_subject[i], subject.y), w});
      }
      if (subject.y >= t) controls.push_back({score_at(*per_subject[i], t), 1.0});
    }
    report.con.push_back(pairwise_con_t(cases, controls));
    if (report.con.back()) {
      weighted += grid.weights[k] * *report.con.back();
      weight_total += grid.weights[k];
    }
  }
  if (!(weight_total > 0.0)) throw NumericError("concordance undefined at every grid time");
  report.icon = weighted / weight_total;
  if (s.out.empty()) {
    write_report_csv(std::cout, report);
  } else {
    std::ostringstream buffer;
    write_report_csv(buffer, report);
    write_file_atomic(s.out, buffer.str());
  }
  std::cerr << "ICON " << std::setprecision(10) << report.icon << '\n';
  return kOk;
}

// Expands `--config file.json` into flags placed right after the subcommand,
// so flags given on the command line (parsed later, last wins) override it.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::vector<std::string> config_flags;
  std::size_t insert_at = std::string::npos;
  for (std::size_t j = 0; j < args.size(); ++j) {
    std::string path;
    if (args[j] == "--config" && j + 1 < args.size()) {
      path = args[++j];
    } else if (args[j].rfind("--config=", 0) == 0) {
      path = args[j].substr(9);
    } else {
      if (insert_at == std::string::npos && j > 0 && args[j][0] != '-') insert_at = out.size() + 1;
      out.push_back(args[j]);
      continue;
    }
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file '" + path + "'");
    nlohmann::json j_config;
    try {
      in >> j_config;
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed config file '" + path + "': " + e.what());
    }
    if (!j_config.is_object()) throw DataError("config file must hold a JSON object");
    for (const auto& [key, value] : j_config.items()) {
      if (key == "schema") continue;
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      if (value.is_boolean()) {
        if (value.get<bool>()) config_flags.push_back(flag);
      } else if (value.is_array()) {
        std::string joined;
        for (const auto& item : value) {
          if (!joined.empty()) joined += ',';
          joined += item.is_string() ? item.get<std::string>() : item.dump();
        }
        config_flags.push_back(flag);
        config_flags.push_back(joined);
      } else {
        config_flags.push_back(flag);
        config_flags.push_back(value.is_string() ? value.get<std::string>() : value.dump());
      }
    }
  }
  if (insert_at == std::string::npos) insert_at = out.size();
  out.insert(out.begin() + static_cast<std::ptrdiff_t>(std::min(insert_at, out.size())), config_flags.begin(),
             config_flags.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ROC-guided survival trees and ensembles", "rocsurv"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  app.add_option("--config", "JSON file of flag values (command-line flags take precedence)");
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  TreeSettings tree;
  auto* fit_tree = app.add_subcommand("fit-tree", "Grow, prune and cross-validate a survival tree");
  add_fit_options(fit_tree, tree.fit);
  fit_tree->add_option("--folds", tree.folds, "Cross-validation folds")->capture_default_str()->check(CLI::Range(2, 1000));
  fit_tree->add_option("--report", tree.report, "Optional JSON concordance report");

  ForestSettings forest;
  auto* fit_forest_cmd = app.add_subcommand("fit-forest", "Fit a survival ensemble");
  add_fit_options(fit_forest_cmd, forest.fit);
  fit_forest_cmd->add_option("--trees", forest.trees, "Number of trees B")->capture_default_str()->check(CLI::Range(1, 100000));
  fit_forest_cmd->add_option("--mtry", forest.mtry, "Features tried per split (default ceil(sqrt(p)))");
  fit_forest_cmd->add_option("--mode", forest.mode, "Resampling")
      ->capture_default_str()
      ->check(CLI::IsMember({"bootstrap", "honest", "subsample_honest", "full_sample"}));
  fit_forest_cmd->add_option("--fraction", forest.fraction, "Honest subsample fraction")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  fit_forest_cmd->add_option("--threads", forest.threads, "Worker threads (0 = all cores)");

  PredictSettings predict;
  auto* predict_cmd = app.add_subcommand("predict", "Predict survival for new covariate histories");
  predict_cmd->add_option("--model", predict.model, "Model JSON")->required();
  predict_cmd->add_option("--data", predict.data, "Long-format histories of the new subjects")->required();
  predict_cmd->add_option("--times", predict.times, "Prediction times (comma separated)")
      ->required()
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  predict_cmd->add_flag("--hazard", predict.hazard, "Add a hazard column");
  predict_cmd->add_option("--out", predict.out, "Output CSV (default stdout)");

  BenchmarkSettings bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "Integrated absolute error over simulated replicates");
  bench_cmd->add_option("--scenario", bench.scenario, "Scenario I..VII")->required();
  bench_cmd->add_option("--n", bench.n, "Training sample size")->capture_default_str()->check(CLI::Range(10, 10000000));
  bench_cmd->add_option("--censoring", bench.censoring, "Target censoring fraction")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.95));
  bench_cmd->add_option("--methods", bench.methods, "Comma-separated subset of tree, forest, km")->capture_default_str();
  bench_cmd->add_option("--criteria", bench.criteria, "Comma-separated subset of delta_icon, global_icon")
      ->capture_default_str();
  bench_cmd->add_option("--replicates", bench.replicates, "Replicates")->capture_default_str()->check(CLI::Range(1, 100000));
  bench_cmd->add_option("--seed", bench.seed, "Random seed")->required();
  bench_cmd->add_option("--q", bench.q, "Grid size")->capture_default_str();
  bench_cmd->add_option("--n-min", bench.n_min, "Minimum node size")->capture_default_str();
  bench_cmd->add_option("--folds", bench.folds, "Cross-validation folds")->capture_default_str();
  bench_cmd->add_option("--trees", bench.trees, "Trees per forest")->capture_default_str();
  bench_cmd->add_option("--mtry", bench.mtry, "Features per split (default ceil(sqrt(p)))");
  bench_cmd->add_option("--new-subjects", bench.new_subjects, "Prediction subjects per replicate")->capture_default_str();
  bench_cmd->add_option("--threads", bench.threads, "Worker threads (0 = all cores)");
  bench_cmd->add_option("--out", bench.out, "Output CSV (default stdout)");

  SimulateSettings sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Export a simulated dataset in long format");
  sim_cmd->add_option("--scenario", sim.scenario, "Scenario I..VII")->required();
  sim_cmd->add_option("--n", sim.n, "Sample size")->capture_default_str()->check(CLI::Range(1, 10000000));
  sim_cmd->add_option("--censoring", sim.censoring, "Target censoring fraction")->capture_default_str()->check(CLI::Range(0.0, 0.95));
  sim_cmd->add_option("--seed", sim.seed, "Random seed")->required();
  sim_cmd->add_option("--out", sim.out, "Output CSV (default stdout)");

  EvalSettings eval;
  auto* eval_cmd = app.add_subcommand("eval-icon", "Concordance of external risk scores against a dataset");
  eval_cmd->add_option("--data", eval.data, "Long-format dataset")->required();
  eval_cmd->add_option("--predictions", eval.predictions, "CSV id,score or id,t,score (higher = riskier)")->required();
  eval_cmd->add_option("--q", eval.q, "Grid size")->capture_default_str();
  eval_cmd->add_option("--horizon", eval.horizon, "Analysis horizon s");
  eval_cmd->add_option("--out", eval.out, "Report CSV (default stdout)");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args.insert(args.begin(), argv[0]);
    args = expand_config(args);
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }

  try {
    if (*fit_tree) return run_fit_tree(tree);
    if (*fit_forest_cmd) return run_fit_forest(forest);
    if (*predict_cmd) return run_predict(predict);
    if (*bench_cmd) return run_benchmark_cmd(bench);
    if (*sim_cmd) return run_simulate(sim);
    if (*eval_cmd) return run_eval_icon(eval);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  }
  return kUsage;
}
