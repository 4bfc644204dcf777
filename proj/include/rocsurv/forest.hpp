#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rocsurv/kernel_smoothing.hpp"
#include "rocsurv/roc_tree.hpp"
#include "rocsurv/survival_data.hpp"

namespace rocsurv {

/// `full_sample` gives every tree unit weights on all subjects.
enum class ResampleMode { bootstrap, subsample_honest, full_sample };

std::string to_string(ResampleMode mode);
ResampleMode parse_resample_mode(const std::string& name);

struct ForestOptions {
  std::size_t trees = 500;
  std::optional<std::size_t> mtry;  // default ceil(sqrt(p))
  std::size_t n_min = 15;
  ResampleMode mode = ResampleMode::bootstrap;
  double subsample_fraction = 0.632;
  SplitCriterion criterion = SplitCriterion::delta_icon;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0 = hardware concurrency
};

/// One unpruned member. `weights` are the estimation weights w_bi; in honest
/// mode `split_half` lists the subjects that placed the splits.
struct ForestTree {
  Partition partition;
  std::vector<double> weights;
  std::vector<std::uint32_t> split_half;
};

struct ForestModel {
  std::shared_ptr<const TransformedDataset> data;
  BandwidthPolicy policy;
  ForestOptions options;
  std::size_t mtry = 1;
  std::vector<ForestTree> trees;

  const TimeGrid& grid() const { return data->grid; }
  std::size_t p() const { return data->dim(); }
  std::size_t size() const { return trees.size(); }
};

ForestModel fit_forest(std::shared_ptr<const TransformedDataset> data, const BandwidthPolicy& policy,
                       const ForestOptions& options);

/// Resample weights for tree b (bootstrap counts, or the honest estimation half).
ForestTree draw_resample(std::size_t n, const ForestOptions& options, std::size_t b);

/// w_i(t, z) = (1/B) sum_b w_bi I(Z_i(t) shares the leaf of z in tree b),
/// with Z_i(t) transformed at the grid time nearest t.
std::vector<double> local_weights(const ForestModel& forest, double t, std::span<const double> z);

/// Kernel-weighted local hazard at t for a transformed covariate point z.
/// nullopt when every term has an empty local risk set.
std::optional<double> forest_hazard(const ForestModel& forest, std::span<const double> z, double t);

/// Same, with z the subject's own covariates at t.
std::optional<double> forest_hazard(const ForestModel& forest, const CovariatePath& path, double t);

struct ForestDiagnostics {
  std::size_t skipped_increments = 0;
};

/// Survival curves for many subjects at once: result[j][k] for paths[j] at times[k].
std::vector<std::vector<double>> forest_survival(const ForestModel& forest,
                                                 std::span<const CovariatePath> paths,
                                                 std::span<const double> times,
                                                 ForestDiagnostics* diagnostics = nullptr);

double forest_survival(const ForestModel& forest, const CovariatePath& path, double t,
                       ForestDiagnostics* diagnostics = nullptr);

}  // namespace rocsurv
