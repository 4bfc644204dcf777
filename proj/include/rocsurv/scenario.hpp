#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rocsurv/random.hpp"
#include "rocsurv/roc_tree.hpp"
#include "rocsurv/forest.hpp"
#include "rocsurv/survival_data.hpp"

namespace rocsurv {

enum class Scenario { I = 1, II, III, IV, V, VI, VII };

std::string to_string(Scenario scenario);
Scenario parse_scenario(const std::string& name);  // "I".."VII" or "1".."7"
std::size_t scenario_dim(Scenario scenario);
bool has_time_dependent_covariates(Scenario scenario);

struct ScenarioSpec {
  Scenario id = Scenario::I;
  std::size_t n = 200;
  double target_censoring = 0.0;
  double eta = std::numeric_limits<double>::infinity();  // +inf: no censoring drawn
  double horizon = 0.0;         // population 0.95 quantile of T
  double visit_spacing = 0.0;   // recording interval for time-dependent covariates
  double drift_slope = 0.1;     // Scenario V covariate mean k t + b
  double drift_intercept = 0.0;
};

/// Latent description of one generated subject. It fixes the whole covariate
/// process and the true conditional law of T, so it doubles as the truth oracle.
struct LatentSubject {
  Scenario scenario = Scenario::I;
  std::vector<double> fixed;   // time-invariant covariates (or the noise of drifting ones)
  std::vector<double> slopes;  // Scenarios V-VII: per drifting coordinate
  double scale = 0.0;          // I, II: mean; III: gamma shape; IV: log location; V: A
  double rate = 0.0;           // V: exponent rate of the hazard
  double event_time = 0.0;
  double drift_intercept = 0.0;

  void covariates_at(double t, std::span<double> out) const;
  double cumulative_hazard(double t) const;
  double hazard(double t) const;
  double survival(double t) const;  // P(T >= t | covariate history up to t)
};

using TruthOracle = LatentSubject;

LatentSubject draw_subject(const ScenarioSpec& spec, Rng& rng);

/// Standardized censoring variate (Exp(1), U(0,1) or N(0,1) by scenario) and
/// its mapping to a censoring time given eta; split so calibration can reuse
/// common random numbers.
double censoring_variate(Scenario scenario, Rng& rng);
double censoring_time(const LatentSubject& subject, double eta, double variate);

/// Observed history on (0, until]: one segment for time-invariant scenarios,
/// otherwise visits every `spacing` with the value at each visit carried forward.
CovariatePath record_path(const LatentSubject& subject, const std::string& id, double until,
                          bool event, double spacing);

double population_horizon(const ScenarioSpec& spec, std::uint64_t seed, std::size_t draws = 100000);

/// Monte Carlo censoring proportion at eta over `draws` subjects.
double censoring_proportion(const ScenarioSpec& spec, double eta, std::uint64_t seed,
                            std::size_t draws = 100000);

/// Bisection on eta until the Monte Carlo censoring proportion is within
/// `tolerance` of `target`. Target 0 returns +inf.
double calibrate_censoring(const ScenarioSpec& spec, double target, std::uint64_t seed,
                           double tolerance = 0.005, std::size_t draws = 100000);

/// Fills horizon, visit spacing and eta for (scenario, n, target censoring).
ScenarioSpec prepare_scenario(Scenario id, std::size_t n, double target_censoring, std::uint64_t seed);

struct GeneratedData {
  Dataset data;
  std::vector<LatentSubject> truth;
};

GeneratedData generate(const ScenarioSpec& spec, Rng& rng);

/// Uncensored prediction subjects with histories recorded over (0, spec.horizon].
GeneratedData generate_new_subjects(const ScenarioSpec& spec, std::size_t count, Rng& rng);

struct IaeResult {
  double value = 0.0;
  std::size_t substituted = 0;  // undefined predictions replaced by a neighbour
};

/// Uniform quadrature grid on [0, s].
std::vector<double> iae_grid(double s, std::size_t points = 200);

/// (1/(n0 s)) sum_j int_0^s |P_hat_j(t) - P_j(t)| dt by the trapezoid rule on
/// `grid`; predicted[j][g] is subject j's prediction at grid[g], NaN if undefined.
IaeResult iae(const std::vector<std::vector<double>>& predicted, std::span<const LatentSubject> truth,
              std::span<const double> grid);

enum class Method { tree, forest, km };

std::string to_string(Method method);
Method parse_method(const std::string& name);

struct BenchmarkConfig {
  Scenario scenario = Scenario::I;
  std::size_t n = 200;
  double censoring = 0.0;
  std::vector<Method> methods{Method::tree, Method::forest};
  std::vector<SplitCriterion> criteria{SplitCriterion::delta_icon};
  std::size_t replicates = 50;
  std::uint64_t seed = 1;
  std::size_t q = 20;
  std::size_t n_min = 15;
  std::size_t folds = 10;
  std::size_t trees = 500;
  std::optional<std::size_t> mtry;
  std::size_t new_subjects = 500;
  std::size_t threads = 0;
};

struct BenchmarkRow {
  Scenario scenario = Scenario::I;
  std::size_t n = 0;
  double censoring = 0.0;
  Method method = Method::tree;
  std::optional<SplitCriterion> criterion;  // absent for km
  std::size_t replicate = 0;
  std::optional<double> iae;                // absent when the replicate failed
  std::string message;
};

/// Runs generate -> fit -> IAE for every replicate. Failures are recorded in
/// the row and the run continues. `on_row` (optional) sees each row as it completes.
std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& config,
                                        const std::function<void(const BenchmarkRow&)>& on_row = {});

void write_benchmark_header(std::ostream& out);
void write_benchmark_row(std::ostream& out, const BenchmarkRow& row);

}  // namespace rocsurv
