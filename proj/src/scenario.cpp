#include "rocsurv/scenario.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numbers>
#include <ostream>

#include "rocsurv/errors.hpp"

namespace rocsurv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower Cholesky factor of the AR(1)-type covariance rho^|i-j|.
Eigen::MatrixXd ar1_factor(std::size_t dim, double rho) {
  Eigen::MatrixXd cov(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::pow(rho, std::abs(static_cast<double>(i) - static_cast<double>(j)));
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericError("covariance matrix is not positive definite");
  return llt.matrixL();
}

const Eigen::MatrixXd& factor_25_09() {
  static const Eigen::MatrixXd f = ar1_factor(25, 0.9);
  return f;
}
const Eigen::MatrixXd& factor_25_075() {
  static const Eigen::MatrixXd f = ar1_factor(25, 0.75);
  return f;
}
const Eigen::MatrixXd& factor_10_09() {
  static const Eigen::MatrixXd f = ar1_factor(10, 0.9);
  return f;
}

std::vector<double> mvn(const Eigen::MatrixXd& factor, double mean, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(factor.rows());
  for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = normal(rng);
  const Eigen::VectorXd x = factor * z;
  std::vector<double> out(static_cast<std::size_t>(x.size()));
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = mean + x(static_cast<Eigen::Index>(j));
  return out;
}

std::vector<double> uniforms(std::size_t count, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(count);
  for (double& v : out) v = u(rng);
  return out;
}

std::vector<double> normals(std::size_t count, Rng& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> out(count);
  for (double& v : out) v = normal(rng);
  return out;
}

double sum_range(const std::vector<double>& v, std::size_t from, std::size_t to) {
  double s = 0.0;
  for (std::size_t j = from; j < to; ++j) s += v[j];
  return s;
}

// Lambda(t) = sum_j int_0^t (k_j u / 10 - z_j)^2 du.
double quadratic_drift_cumhaz(const LatentSubject& s, double t) {
  double total = 0.0;
  for (std::size_t j = 0; j < s.slopes.size(); ++j) {
    const double k = s.slopes[j];
    const double z = s.fixed[j];
    total += k * k * t * t * t / 300.0 - k * z * t * t / 10.0 + z * z * t;
  }
  return total;
}

double invert_cumhaz(const LatentSubject& s, double target) {
  double hi = 1.0;
  while (quadratic_drift_cumhaz(s, hi) < target) {
    hi *= 2.0;
    if (hi > 1e12) return kInf;
  }
  std::uintmax_t iterations = 200;
  const auto tolerance = [](double a, double b) { return std::abs(b - a) <= 1e-10; };
  const auto [lo_t, hi_t] = boost::math::tools::toms748_solve(
      [&](double t) { return quadratic_drift_cumhaz(s, t) - target; }, 0.0, hi, -target,
      quadratic_drift_cumhaz(s, hi) - target, tolerance, iterations);
  return 0.5 * (lo_t + hi_t);
}

}  // namespace

std::string to_string(Scenario scenario) {
  static const char* names[] = {"I", "II", "III", "IV", "V", "VI", "VII"};
  return names[static_cast<int>(scenario) - 1];
}

Scenario parse_scenario(const std::string& name) {
  static const char* names[] = {"I", "II", "III", "IV", "V", "VI", "VII"};
  for (int j = 0; j < 7; ++j) {
    if (name == names[j] || name == std::to_string(j + 1)) return static_cast<Scenario>(j + 1);
  }
  throw DataError("unknown scenario '" + name + "' (expected I..VII)");
}

std::size_t scenario_dim(Scenario scenario) {
  return static_cast<int>(scenario) <= 4 ? 25 : 20;
}

bool has_time_dependent_covariates(Scenario scenario) { return static_cast<int>(scenario) >= 5; }

void LatentSubject::covariates_at(double t, std::span<double> out) const {
  switch (scenario) {
    case Scenario::I:
    case Scenario::II:
    case Scenario::III:
    case Scenario::IV:
      std::copy(fixed.begin(), fixed.end(), out.begin());
      return;
    case Scenario::V:
      for (std::size_t j = 0; j < 10; ++j) out[j] = slopes[j] * t + drift_intercept + fixed[j];
      for (std::size_t j = 10; j < 20; ++j) out[j] = fixed[j];
      return;
    case Scenario::VI:
    case Scenario::VII:
      for (std::size_t j = 0; j < 10; ++j) out[j] = t * slopes[j] / 10.0;
      for (std::size_t j = 10; j < 20; ++j) out[j] = fixed[j - 10];
      return;
  }
}

double LatentSubject::cumulative_hazard(double t) const {
  if (t <= 0.0) return 0.0;
  switch (scenario) {
    case Scenario::I:
    case Scenario::II:
      return t / scale;
    case Scenario::III:
      return -std::log(boost::math::gamma_q(scale, t / 2.0));
    case Scenario::IV:
      return -std::log(0.5 * std::erfc((std::log(t) - scale) / std::numbers::sqrt2));
    case Scenario::V:
      return rate == 0.0 ? scale * t : scale * std::expm1(rate * t) / rate;
    case Scenario::VI:
    case Scenario::VII:
      return quadratic_drift_cumhaz(*this, t);
  }
  return 0.0;
}

double LatentSubject::hazard(double t) const {
  switch (scenario) {
    case Scenario::I:
    case Scenario::II:
      return 1.0 / scale;
    case Scenario::III: {
      if (t <= 0.0) return scale < 1.0 ? kInf : (scale == 1.0 ? 0.5 : 0.0);
      const double density = boost::math::gamma_p_derivative(scale, t / 2.0) / 2.0;
      return density / boost::math::gamma_q(scale, t / 2.0);
    }
    case Scenario::IV: {
      if (t <= 0.0) return 0.0;
      const double x = std::log(t) - scale;
      const double density = std::exp(-0.5 * x * x) / (t * std::sqrt(2.0 * std::numbers::pi));
      return density / (0.5 * std::erfc(x / std::numbers::sqrt2));
    }
    case Scenario::V:
      return scale * std::exp(rate * t);
    case Scenario::VI:
    case Scenario::VII: {
      double total = 0.0;
      for (std::size_t j = 0; j < slopes.size(); ++j) {
        const double d = t * slopes[j] / 10.0 - fixed[j];
        total += d * d;
      }
      return total;
    }
  }
  return 0.0;
}

double LatentSubject::survival(double t) const {
  if (t <= 0.0) return 1.0;
  switch (scenario) {
    case Scenario::III:
      return boost::math::gamma_q(scale, t / 2.0);
    case Scenario::IV:
      return 0.5 * std::erfc((std::log(t) - scale) / std::numbers::sqrt2);
    default:
      return std::exp(-cumulative_hazard(t));
  }
}

LatentSubject draw_subject(const ScenarioSpec& spec, Rng& rng) {
  LatentSubject s;
  s.scenario = spec.id;
  s.drift_intercept = spec.drift_intercept;
  std::exponential_distribution<double> unit_exp(1.0);
  switch (spec.id) {
    case Scenario::I: {
      s.fixed = mvn(factor_25_09(), 0.0, rng);
      s.scale = std::exp(0.1 * sum_range(s.fixed, 10, 25));
      s.event_time = s.scale * unit_exp(rng);
      break;
    }
    case Scenario::II: {
      s.fixed = uniforms(25, rng);
      s.scale = std::sin(s.fixed[0] * std::numbers::pi) + 2.0 * std::abs(s.fixed[1] - 0.5) +
                s.fixed[2] * s.fixed[2] * s.fixed[2];
      s.event_time = s.scale * unit_exp(rng);
      break;
    }
    case Scenario::III: {
      s.fixed = mvn(factor_25_075(), 0.0, rng);
      s.scale = 0.5 + 0.3 * std::abs(sum_range(s.fixed, 10, 15));
      std::gamma_distribution<double> gamma(s.scale, 2.0);
      s.event_time = gamma(rng);
      break;
    }
    case Scenario::IV: {
      s.fixed = mvn(factor_25_075(), 0.0, rng);
      s.scale = 0.1 * std::abs(sum_range(s.fixed, 0, 5)) + 0.1 * std::abs(sum_range(s.fixed, 20, 25));
      std::lognormal_distribution<double> lognormal(s.scale, 1.0);
      s.event_time = lognormal(rng);
      break;
    }
    case Scenario::V: {
      auto noise = mvn(factor_10_09(), 0.0, rng);
      auto tail = uniforms(10, rng);
      s.fixed = noise;
      s.fixed.insert(s.fixed.end(), tail.begin(), tail.end());
      s.slopes.assign(10, spec.drift_slope);
      // hazard exp{0.5 sum_j (k t + b + e_j) + Z11}/10 = A exp(5 k t)
      s.scale = std::exp(0.5 * (sum_range(noise, 0, 10) + 10.0 * spec.drift_intercept) + tail[0]) / 10.0;
      s.rate = 5.0 * spec.drift_slope;
      const double e = unit_exp(rng);
      s.event_time = s.rate == 0.0 ? e / s.scale : std::log1p(s.rate * e / s.scale) / s.rate;
      break;
    }
    case Scenario::VI:
    case Scenario::VII: {
      if (spec.id == Scenario::VI) {
        s.slopes = uniforms(10, rng);
        s.fixed = uniforms(10, rng);
      } else {
        s.slopes = mvn(factor_10_09(), 1.0, rng);
        s.fixed = normals(10, rng);
      }
      s.event_time = invert_cumhaz(s, unit_exp(rng));
      break;
    }
  }
  return s;
}

double censoring_variate(Scenario scenario, Rng& rng) {
  switch (scenario) {
    case Scenario::I:
      return std::exponential_distribution<double>(1.0)(rng);
    case Scenario::IV:
      return std::normal_distribution<double>()(rng);
    default:
      return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  }
}

double censoring_time(const LatentSubject& subject, double eta, double variate) {
  if (std::isinf(eta) && eta > 0.0) return kInf;
  switch (subject.scenario) {
    case Scenario::I:
      return eta * variate;  // exponential with mean eta
    case Scenario::IV:
      return std::exp(subject.scale + eta + variate);
    default:
      return eta * variate;  // uniform on [0, eta]
  }
}

CovariatePath record_path(const LatentSubject& subject, const std::string& id, double until,
                          bool event, double spacing) {
  CovariatePath path;
  path.id = id;
  path.y = until;
  path.event = event;
  const std::size_t p = has_time_dependent_covariates(subject.scenario) ? 20 : subject.fixed.size();
  std::vector<double> values(p);
  double start = 0.0;
  while (true) {
    const double next = has_time_dependent_covariates(subject.scenario) && spacing > 0.0
                            ? start + spacing
                            : kInf;
    const double stop = std::min(next, until);
    subject.covariates_at(start, values);
    path.starts.push_back(start);
    path.stops.push_back(stop);
    path.values.insert(path.values.end(), values.begin(), values.end());
    if (stop >= until) break;
    start = stop;
  }
  return path;
}

double population_horizon(const ScenarioSpec& spec, std::uint64_t seed, std::size_t draws) {
  Rng rng = make_stream(seed, "horizon-" + to_string(spec.id));
  std::vector<double> times(draws);
  for (double& t : times) t = draw_subject(spec, rng).event_time;
  std::sort(times.begin(), times.end());
  return type1_quantile(times, 0.95);
}

namespace {

struct CalibrationDraws {
  std::vector<LatentSubject> subjects;
  std::vector<double> variates;
};

CalibrationDraws calibration_draws(const ScenarioSpec& spec, std::uint64_t seed, std::size_t draws) {
  CalibrationDraws out;
  Rng rng = make_stream(seed, "calibrate-" + to_string(spec.id));
  out.subjects.reserve(draws);
  out.variates.reserve(draws);
  for (std::size_t j = 0; j < draws; ++j) {
    out.subjects.push_back(draw_subject(spec, rng));
    out.variates.push_back(censoring_variate(spec.id, rng));
  }
  return out;
}

double proportion(const CalibrationDraws& d, double eta) {
  std::size_t censored = 0;
  for (std::size_t j = 0; j < d.subjects.size(); ++j) {
    if (censoring_time(d.subjects[j], eta, d.variates[j]) < d.subjects[j].event_time) ++censored;
  }
  return static_cast<double>(censored) / static_cast<double>(d.subjects.size());
}

}  // namespace

double censoring_proportion(const ScenarioSpec& spec, double eta, std::uint64_t seed, std::size_t draws) {
  return proportion(calibration_draws(spec, seed, draws), eta);
}

double calibrate_censoring(const ScenarioSpec& spec, double target, std::uint64_t seed, double tolerance,
                           std::size_t draws) {
  if (target == 0.0) return kInf;
  if (!(target > 0.0 && target < 1.0)) throw DataError("target censoring must lie in [0, 1)");
  const auto d = calibration_draws(spec, seed, draws);
  // eta is a location shift for Scenario IV and a positive scale elsewhere.
  const bool additive = spec.id == Scenario::IV;
  auto to_eta = [&](double x) { return additive ? x : std::exp(x); };
  double lo = 0.0, hi = 0.0;  // proportion(lo) > target > proportion(hi)
  for (int step = 0; proportion(d, to_eta(lo)) <= target; ++step) {
    if (step > 60) throw NumericError("could not bracket the censoring parameter");
    lo -= 1.0 + step;
  }
  for (int step = 0; proportion(d, to_eta(hi)) >= target; ++step) {
    if (step > 60) throw NumericError("could not bracket the censoring parameter");
    hi += 1.0 + step;
  }
  for (int iteration = 0; iteration < 200; ++iteration) {
    const double mid = 0.5 * (lo + hi);
    const double prop = proportion(d, to_eta(mid));
    if (std::abs(prop - target) <= tolerance) return to_eta(mid);
    (prop > target ? lo : hi) = mid;
  }
  throw NumericError("censoring calibration did not converge");
}

ScenarioSpec prepare_scenario(Scenario id, std::size_t n, double target_censoring, std::uint64_t seed) {
  ScenarioSpec spec;
  spec.id = id;
  spec.n = n;
  spec.target_censoring = target_censoring;
  const std::uint64_t calibration_seed = derive_seed(seed, "scenario-calibration");
  spec.horizon = population_horizon(spec, calibration_seed);
  spec.visit_spacing = spec.horizon / 40.0;
  spec.eta = calibrate_censoring(spec, target_censoring, calibration_seed);
  return spec;
}

GeneratedData generate(const ScenarioSpec& spec, Rng& rng) {
  if (spec.n == 0) throw DataError("scenario sample size must be positive");
  GeneratedData out;
  std::vector<CovariatePath> paths;
  paths.reserve(spec.n);
  const bool censor = spec.target_censoring > 0.0 && !std::isinf(spec.eta);
  for (std::size_t i = 0; i < spec.n; ++i) {
    LatentSubject s = draw_subject(spec, rng);
    double c = kInf;
    if (censor) c = censoring_time(s, spec.eta, censoring_variate(spec.id, rng));
    const double y = std::min(s.event_time, c);
    const bool event = s.event_time <= c;
    paths.push_back(record_path(s, std::to_string(i + 1), y, event, spec.visit_spacing));
    out.truth.push_back(std::move(s));
  }
  std::vector<std::string> names;
  for (std::size_t j = 0; j < scenario_dim(spec.id); ++j) names.push_back("z" + std::to_string(j + 1));
  out.data = Dataset::make(std::move(paths), std::move(names));
  return out;
}

GeneratedData generate_new_subjects(const ScenarioSpec& spec, std::size_t count, Rng& rng) {
  GeneratedData out;
  std::vector<CovariatePath> paths;
  for (std::size_t i = 0; i < count; ++i) {
    LatentSubject s = draw_subject(spec, rng);
    paths.push_back(record_path(s, "new" + std::to_string(i + 1), spec.horizon, false, spec.visit_spacing));
    out.truth.push_back(std::move(s));
  }
  out.data.subjects = std::move(paths);
  out.data.p = scenario_dim(spec.id);
  out.data.horizon = spec.horizon;
  return out;
}

std::vector<double> iae_grid(double s, std::size_t points) {
  if (points < 2) throw DataError("IAE quadrature needs at least 2 points");
  std::vector<double> grid(points);
  for (std::size_t g = 0; g < points; ++g) grid[g] = s * static_cast<double>(g) / static_cast<double>(points - 1);
  grid.back() = s;
  return grid;
}

IaeResult iae(const std::vector<std::vector<double>>& predicted, std::span<const LatentSubject> truth,
              std::span<const double> grid) {
  if (predicted.size() != truth.size() || truth.empty()) throw DataError("prediction and truth counts differ");
  const double s = grid.back() - grid.front();
  if (!(s > 0.0)) throw DataError("IAE grid must span a positive interval");
  IaeResult result;
  double total = 0.0;
  std::vector<double> error(grid.size());
  for (std::size_t j = 0; j < truth.size(); ++j) {
    std::vector<double> pred = predicted[j];
    if (pred.size() != grid.size()) throw DataError("prediction does not match the IAE grid");
    // Replace undefined values by the nearest defined one (earlier wins on ties).
    std::vector<std::size_t> defined;
    for (std::size_t g = 0; g < pred.size(); ++g) {
      if (std::isfinite(pred[g])) defined.push_back(g);
    }
    if (defined.empty()) throw NumericError("predictor undefined on the whole IAE grid");
    for (std::size_t g = 0; g < pred.size(); ++g) {
      if (std::isfinite(pred[g])) continue;
      const auto it = std::lower_bound(defined.begin(), defined.end(), g);
      std::size_t pick;
      if (it == defined.end()) {
        pick = defined.back();
      } else if (it == defined.begin()) {
        pick = *it;
      } else {
        pick = (g - *(it - 1) <= *it - g) ? *(it - 1) : *it;
      }
      pred[g] = predicted[j][pick];
      ++result.substituted;
    }
    for (std::size_t g = 0; g < grid.size(); ++g) error[g] = std::abs(pred[g] - truth[j].survival(grid[g]));
    double integral = 0.0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
      integral += 0.5 * (grid[g] - grid[g - 1]) * (error[g] + error[g - 1]);
    }
    total += integral;
  }
  result.value = total / (static_cast<double>(truth.size()) * s);
  return result;
}

std::string to_string(Method method) {
  switch (method) {
    case Method::tree:
      return "tree";
    case Method::forest:
      return "forest";
    case Method::km:
      return "km";
  }
  return "";
}

Method parse_method(const std::string& name) {
  if (name == "tree") return Method::tree;
  if (name == "forest") return Method::forest;
  if (name == "km") return Method::km;
  throw DataError("unknown method '" + name + "'");
}

std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& config,
                                        const std::function<void(const BenchmarkRow&)>& on_row) {
  const ScenarioSpec spec = prepare_scenario(config.scenario, config.n, config.censoring, config.seed);
  const auto grid_points = iae_grid(spec.horizon);
  std::vector<BenchmarkRow> rows;
  auto emit = [&](BenchmarkRow row) {
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  };

  for (std::size_t r = 0; r < config.replicates; ++r) {
    std::vector<BenchmarkRow> pending;
    for (Method method : config.methods) {
      if (method == Method::km) {
        pending.push_back({config.scenario, config.n, config.censoring, method, std::nullopt, r, std::nullopt, ""});
        continue;
      }
      for (SplitCriterion criterion : config.criteria) {
        pending.push_back({config.scenario, config.n, config.censoring, method, criterion, r, std::nullopt, ""});
      }
    }
    try {
      Rng data_rng = make_stream(config.seed, "generate", r);
      auto generated = generate(spec, data_rng);
      Rng new_rng = make_stream(config.seed, "new-subjects", r);
      const auto fresh = generate_new_subjects(spec, config.new_subjects, new_rng);
      auto data = std::make_shared<const Dataset>(std::move(generated.data));
      const TimeGrid grid = uncensored_quantile_grid(*data, config.q);
      auto td = std::make_shared<const TransformedDataset>(transform(data, grid));
      const BandwidthPolicy policy = BandwidthPolicy::global(*data);

      for (auto& row : pending) {
        try {
          std::vector<std::vector<double>> predicted;
          if (row.method == Method::km) {
            predicted.assign(fresh.truth.size(), kaplan_meier(*data, grid_points));
          } else if (row.method == Method::tree) {
            TreeOptions options;
            options.grow.n_min = config.n_min;
            options.grow.criterion = *row.criterion;
            options.folds = config.folds;
            options.seed = derive_seed(config.seed, "tree-fit", r);
            const RocTree tree = select_by_cv(*td, policy, options);
            for (const auto& path : fresh.data.subjects) predicted.push_back(survival_curve(tree, path, grid_points));
          } else {
            ForestOptions options;
            options.trees = config.trees;
            options.mtry = config.mtry;
            options.n_min = config.n_min;
            options.criterion = *row.criterion;
            options.seed = derive_seed(config.seed, "forest-fit", r);
            options.threads = config.threads;
            const ForestModel forest = fit_forest(td, policy, options);
            predicted = forest_survival(forest, fresh.data.subjects, grid_points);
          }
          row.iae = iae(predicted, fresh.truth, grid_points).value;
        } catch (const std::exception& e) {
          row.message = e.what();
        }
      }
    } catch (const std::exception& e) {
      for (auto& row : pending) row.message = e.what();
    }
    for (auto& row : pending) emit(std::move(row));
  }
  return rows;
}

void write_benchmark_header(std::ostream& out) {
  out << "scenario,n,censoring,method,criterion,replicate,iae,error\n";
}

void write_benchmark_row(std::ostream& out, const BenchmarkRow& row) {
  out.precision(17);
  out << to_string(row.scenario) << ',' << row.n << ',' << row.censoring << ',' << to_string(row.method) << ','
      << (row.criterion ? to_string(*row.criterion) : "") << ',' << row.replicate + 1 << ',';
  if (row.iae) out << *row.iae;
  out << ',';
  std::string message = row.message;
  std::replace(message.begin(), message.end(), ',', ';');
  std::replace(message.begin(), message.end(), '\n', ' ');
  out << message << '\n';
}

}  // namespace rocsurv
