#include "rocsurv/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rocsurv/errors.hpp"
#include "rocsurv/parallel.hpp"
#include "rocsurv/random.hpp"

namespace rocsurv {

std::string to_string(ResampleMode mode) {
  switch (mode) {
    case ResampleMode::bootstrap:
      return "bootstrap";
    case ResampleMode::subsample_honest:
      return "subsample_honest";
    case ResampleMode::full_sample:
      return "full_sample";
  }
  return "";
}

ResampleMode parse_resample_mode(const std::string& name) {
  if (name == "bootstrap") return ResampleMode::bootstrap;
  if (name == "subsample_honest" || name == "honest") return ResampleMode::subsample_honest;
  if (name == "full_sample") return ResampleMode::full_sample;
  throw DataError("unknown resample mode '" + name + "'");
}

ForestTree draw_resample(std::size_t n, const ForestOptions& options, std::size_t b) {
  ForestTree tree;
  tree.weights.assign(n, 0.0);
  if (options.mode == ResampleMode::full_sample) {
    std::fill(tree.weights.begin(), tree.weights.end(), 1.0);
    return tree;
  }
  Rng rng = make_stream(options.seed, "resample", b);
  if (options.mode == ResampleMode::bootstrap) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t draw = 0; draw < n; ++draw) tree.weights[pick(rng)] += 1.0;
    return tree;
  }
  if (!(options.subsample_fraction > 0.0 && options.subsample_fraction <= 1.0)) {
    throw DataError("subsample fraction must lie in (0, 1]");
  }
  const auto m = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(options.subsample_fraction * static_cast<double>(n))));
  if (m > n) throw DataError("honest subsampling needs at least 2 subjects");
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  for (std::size_t j = 0; j < m; ++j) {
    std::uniform_int_distribution<std::size_t> pick(j, n - 1);
    std::swap(order[j], order[pick(rng)]);
  }
  const std::size_t half = m / 2;
  tree.split_half.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
  std::sort(tree.split_half.begin(), tree.split_half.end());
  for (std::size_t j = half; j < m; ++j) tree.weights[order[j]] = 1.0;
  return tree;
}

ForestModel fit_forest(std::shared_ptr<const TransformedDataset> data, const BandwidthPolicy& policy,
                       const ForestOptions& options) {
  if (options.trees == 0) throw DataError("forest needs at least one tree");
  const std::size_t p = data->dim();
  const std::size_t n = data->size();
  ForestModel forest;
  forest.policy = policy;
  forest.options = options;
  forest.mtry = options.mtry ? *options.mtry
                             : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))));
  if (forest.mtry < 1 || forest.mtry > p) throw DataError("mtry must lie in [1, p]");

  const GrowthIndex index(*data, policy.global_h);
  GrowOptions grow_options;
  grow_options.n_min = options.n_min;
  grow_options.criterion = options.criterion;
  grow_options.feature_subset = forest.mtry;
  grow_options.keep_node_curves = false;

  forest.trees.resize(options.trees);
  parallel_for(
      options.trees,
      [&](std::size_t b) {
        ForestTree tree = draw_resample(n, options, b);
        std::vector<double> grow_weights = tree.weights;
        if (options.mode == ResampleMode::subsample_honest) {
          std::fill(grow_weights.begin(), grow_weights.end(), 0.0);
          for (auto i : tree.split_half) grow_weights[i] = 1.0;
        }
        Rng rng = make_stream(options.seed, "forest-grow", b);
        tree.partition = grow(index, grow_options, grow_weights, rng);
        forest.trees[b] = std::move(tree);
      },
      options.threads);
  forest.data = std::move(data);
  return forest;
}

std::vector<double> local_weights(const ForestModel& forest, double t, std::span<const double> z) {
  const TransformedDataset& data = *forest.data;
  const std::size_t n = data.size();
  const std::size_t anchor = data.ecdf.anchor_for_time(t);
  Matrix at_t(n, data.dim());
  for (std::size_t i = 0; i < n; ++i) {
    data.ecdf.transform(anchor, data.source->subjects[i].values_at(t), at_t.row(i));
  }
  std::vector<double> weights(n, 0.0);
  for (const auto& tree : forest.trees) {
    const std::size_t leaf = tree.partition.route(z);
    for (std::size_t i = 0; i < n; ++i) {
      if (tree.weights[i] > 0.0 && tree.partition.route(at_t.row(i)) == leaf) weights[i] += tree.weights[i];
    }
  }
  for (double& w : weights) w /= static_cast<double>(forest.size());
  return weights;
}

std::optional<double> forest_hazard(const ForestModel& forest, std::span<const double> z, double t) {
  const TransformedDataset& data = *forest.data;
  const Dataset& raw = *data.source;
  const double h = forest.policy.global_h;
  const Kernel kernel{h};
  const double tc = boundary_clamp(t, h, raw.horizon);
  std::vector<std::size_t> terms;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw.subjects[i].event && kernel(tc - raw.subjects[i].y) > 0.0) terms.push_back(i);
  }
  std::vector<double> v0(terms.size(), 0.0), v1(terms.size(), 0.0);
  for (const auto& tree : forest.trees) {
    const std::size_t leaf = tree.partition.route(z);
    for (std::size_t a = 0; a < terms.size(); ++a) {
      const std::size_t i = terms[a];
      const double u = raw.subjects[i].y;
      if (tree.partition.route(data.at_event.row(i)) == leaf) v0[a] += tree.weights[i];
      double at_risk = 0.0;
      for (std::size_t j = 0; j < raw.size(); ++j) {
        if (tree.weights[j] <= 0.0 || raw.subjects[j].y < u) continue;
        const auto& path = data.paths[j];
        if (tree.partition.route(path.piece(path.piece_index(u))) == leaf) at_risk += tree.weights[j];
      }
      v1[a] += at_risk;
    }
  }
  double hazard = 0.0;
  bool any = false;
  for (std::size_t a = 0; a < terms.size(); ++a) {
    if (!(v1[a] > 0.0)) continue;
    hazard += kernel(tc - raw.subjects[terms[a]].y) * v0[a] / v1[a];
    any = true;
  }
  if (!any) return std::nullopt;
  return hazard;
}

std::optional<double> forest_hazard(const ForestModel& forest, const CovariatePath& path, double t) {
  const auto& ecdf = forest.data->ecdf;
  std::vector<double> z(forest.p());
  ecdf.transform(ecdf.anchor_for_time(t), path.values_at(t), z);
  return forest_hazard(forest, z, t);
}

std::vector<std::vector<double>> forest_survival(const ForestModel& forest,
                                                 std::span<const CovariatePath> paths,
                                                 std::span<const double> times,
                                                 ForestDiagnostics* diagnostics) {
  const TransformedDataset& data = *forest.data;
  std::vector<std::vector<double>> out(paths.size(), std::vector<double>(times.size(), 1.0));
  if (times.empty() || paths.empty()) return out;
  const double t_max = *std::max_element(times.begin(), times.end());
  if (!(t_max > 0.0)) return out;
  for (const auto& path : paths) {
    if (path.dim() != forest.p()) {
      throw DataError("subject '" + path.id + "' has " + std::to_string(path.dim()) +
                      " covariates; the model expects p = " + std::to_string(forest.p()));
    }
  }

  std::vector<TransformedPath> pieces(paths.size());
  for (std::size_t j = 0; j < paths.size(); ++j) pieces[j] = transform_path(paths[j], data.ecdf, t_max);

  std::vector<double> event_times = sorted_uncensored_times(*data.source);
  event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());
  const auto E = static_cast<std::size_t>(
      std::upper_bound(event_times.begin(), event_times.end(), t_max) - event_times.begin());

  // Piece index of each event time, shared by every tree.
  std::vector<std::vector<std::uint32_t>> piece_of(paths.size(), std::vector<std::uint32_t>(E));
  for (std::size_t j = 0; j < paths.size(); ++j) {
    std::size_t piece = 0;
    for (std::size_t e = 0; e < E; ++e) {
      while (pieces[j].stops[piece] < event_times[e]) ++piece;
      piece_of[j][e] = static_cast<std::uint32_t>(piece);
    }
  }

  std::vector<double> v2(paths.size() * E, 0.0), v3(paths.size() * E, 0.0);
  for (const auto& tree : forest.trees) {
    const LeafIncrements inc = leaf_increments(tree.partition, data, tree.weights);
    const auto ordinal = tree.partition.leaf_ordinals();
    const std::size_t L = inc.num_leaves;
    parallel_for(
        paths.size(),
        [&](std::size_t j) {
          std::vector<std::size_t> leaf(pieces[j].num_pieces());
          for (std::size_t k = 0; k < leaf.size(); ++k) {
            leaf[k] = static_cast<std::size_t>(ordinal[tree.partition.route(pieces[j].piece(k))]);
          }
          double* row2 = v2.data() + j * E;
          double* row3 = v3.data() + j * E;
          for (std::size_t e = 0; e < E; ++e) {
            const std::size_t l = leaf[piece_of[j][e]];
            row2[e] += inc.events[e * L + l];
            row3[e] += inc.at_risk[e * L + l];
          }
        },
        forest.options.threads);
  }

  for (std::size_t j = 0; j < paths.size(); ++j) {
    std::vector<double> cumulative(E);
    double hazard = 0.0;
    for (std::size_t e = 0; e < E; ++e) {
      if (v3[j * E + e] > 0.0) {
        hazard += v2[j * E + e] / v3[j * E + e];
      } else if (diagnostics) {
        ++diagnostics->skipped_increments;
      }
      cumulative[e] = hazard;
    }
    for (std::size_t k = 0; k < times.size(); ++k) {
      const auto count = static_cast<std::size_t>(
          std::upper_bound(event_times.begin(), event_times.begin() + static_cast<std::ptrdiff_t>(E), times[k]) -
          event_times.begin());
      out[j][k] = count == 0 ? 1.0 : std::exp(-cumulative[count - 1]);
    }
  }
  return out;
}

double forest_survival(const ForestModel& forest, const CovariatePath& path, double t,
                       ForestDiagnostics* diagnostics) {
  const double times[] = {t};
  return forest_survival(forest, std::span<const CovariatePath>(&path, 1), times, diagnostics)[0][0];
}

}  // namespace rocsurv
