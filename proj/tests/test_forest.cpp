#include "doctest.h"
#include "rocsurv/model_io.hpp"
#include "rocsurv/scenario.hpp"
#include "support.hpp"

using namespace rocsurv;

namespace {

std::shared_ptr<const TransformedDataset> prepared(Dataset d, std::size_t q = 10) {
  auto raw = std::make_shared<const Dataset>(std::move(d));
  return std::make_shared<const TransformedDataset>(transform(raw, uncensored_quantile_grid(*raw, q)));
}

ForestOptions small_options(std::size_t trees, ResampleMode mode, std::uint64_t seed = 3) {
  ForestOptions options;
  options.trees = trees;
  options.mode = mode;
  options.seed = seed;
  options.threads = 1;
  return options;
}

// Transform of z at the grid time nearest t, recomputed from the raw risk set.
std::vector<double> transform_by_rank(const Dataset& raw, const TimeGrid& grid, std::span<const double> z, double t) {
  const double tk = grid.times[grid.nearest(t)];
  std::vector<double> out(z.size());
  for (std::size_t c = 0; c < z.size(); ++c) {
    double below = 0.0, total = 0.0;
    for (const auto& s : raw.subjects) {
      if (s.y < tk) continue;
      total += 1.0;
      below += s.value(tk, c) <= z[c] ? 1.0 : 0.0;
    }
    out[c] = below / total;
  }
  return out;
}

}  // namespace

TEST_CASE("forest defaults") {
  const ForestOptions options;
  CHECK(options.trees == 500);
  CHECK(options.n_min == 15);
  CHECK(!options.mtry.has_value());
  auto data = prepared(testing::random_dataset(60, 25, 139));
  auto forest = fit_forest(data, BandwidthPolicy::global(*data->source), small_options(2, ResampleMode::bootstrap));
  CHECK(forest.mtry == 5);
}

TEST_CASE("bootstrap weights are multinomial counts summing to n") {
  const auto options = small_options(1, ResampleMode::bootstrap);
  for (std::size_t b = 0; b < 20; ++b) {
    const auto tree = draw_resample(97, options, b);
    double total = 0.0;
    for (double w : tree.weights) {
      CHECK(w == std::floor(w));
      total += w;
    }
    CHECK(total == 97.0);
  }
}

TEST_CASE("honest halves are disjoint") {
  const auto options = small_options(1, ResampleMode::subsample_honest);
  const std::size_t n = 200;
  const auto m = static_cast<std::size_t>(std::llround(0.632 * n));
  for (std::size_t b = 0; b < 20; ++b) {
    const auto tree = draw_resample(n, options, b);
    CHECK(tree.split_half.size() == m / 2);
    double total = 0.0;
    for (double w : tree.weights) total += w;
    CHECK(total == static_cast<double>(m - m / 2));
    for (auto i : tree.split_half) CHECK(tree.weights[i] == 0.0);
  }
}

TEST_CASE("forest fitting is deterministic for a fixed seed") {
  auto data = prepared(testing::random_dataset(120, 4, 149));
  const auto policy = BandwidthPolicy::global(*data->source);
  auto options = small_options(6, ResampleMode::bootstrap, 11);
  const auto a = to_json(fit_forest(data, policy, options)).dump();
  options.threads = 3;
  const auto b = to_json(fit_forest(data, policy, options)).dump();
  CHECK(a == b);
}

TEST_CASE("local weights agree with per-tree enumeration") {
  auto data = prepared(testing::random_dataset(40, 2, 151, 0.3, true), 6);
  const auto& raw = *data->source;
  auto forest = fit_forest(data, BandwidthPolicy::global(raw), small_options(3, ResampleMode::bootstrap));
  std::mt19937_64 rng(157);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    const double t = u(rng) * raw.horizon;
    const std::vector<double> z{u(rng), u(rng)};
    const auto weights = local_weights(forest, t, z);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const auto zi = transform_by_rank(raw, data->grid, raw.subjects[i].values_at(t), t);
      double expected = 0.0;
      for (const auto& tree : forest.trees) {
        if (tree.partition.route(zi) == tree.partition.route(z)) expected += tree.weights[i];
      }
      CHECK(weights[i] == doctest::Approx(expected / 3.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("forest hazard follows the kernel-weighted local estimator") {
  auto data = prepared(testing::random_dataset(60, 2, 163, 0.3, true), 6);
  const auto& raw = *data->source;
  const auto policy = BandwidthPolicy::global(raw);
  auto forest = fit_forest(data, policy, small_options(4, ResampleMode::bootstrap));
  const double h = policy.global_h;
  for (double t : {0.2 * raw.horizon, 0.5 * raw.horizon, 0.8 * raw.horizon}) {
    const double tc = std::clamp(t, h, raw.horizon - h);
    const std::vector<double> z{0.4, 0.7};
    double expected = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const auto& si = raw.subjects[i];
      const double kw = testing::epanechnikov((tc - si.y) / h) / h;
      if (!si.event || kw == 0.0) continue;
      double v0 = 0.0, v1 = 0.0;
      for (const auto& tree : forest.trees) {
        const auto leaf = tree.partition.route(z);
        const auto zi = transform_by_rank(raw, data->grid, si.values_at(si.y), si.y);
        if (tree.partition.route(zi) == leaf) v0 += tree.weights[i];
        for (std::size_t j = 0; j < raw.size(); ++j) {
          const auto& sj = raw.subjects[j];
          if (sj.y < si.y) continue;
          const auto zj = transform_by_rank(raw, data->grid, sj.values_at(si.y), si.y);
          if (tree.partition.route(zj) == leaf) v1 += tree.weights[j];
        }
      }
      if (v1 > 0.0) {
        expected += kw * v0 / v1;
        any = true;
      }
    }
    const auto got = forest_hazard(forest, z, t);
    REQUIRE(got.has_value() == any);
    if (any) CHECK(*got == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("one full-sample tree with all coordinates reproduces the tree survival") {
  auto data = prepared(testing::random_dataset(150, 3, 167, 0.3, true));
  const auto policy = BandwidthPolicy::global(*data->source);
  auto options = small_options(1, ResampleMode::full_sample);
  options.mtry = 3;
  const auto forest = fit_forest(data, policy, options);
  const RocTree tree = finalize_tree(forest.trees[0].partition, *data, policy);
  std::vector<double> times;
  for (int g = 0; g <= 50; ++g) times.push_back(data->source->horizon * g / 50.0);
  const auto& subjects = data->source->subjects;
  const auto batch = forest_survival(forest, std::span<const CovariatePath>(subjects.data(), 30), times);
  for (std::size_t j = 0; j < 30; ++j) CHECK(batch[j] == survival_curve(tree, subjects[j], times));
}

TEST_CASE("forest hazard is unchanged when every subject is duplicated") {
  const Dataset raw = testing::random_dataset(60, 2, 173);
  auto copy = raw.subjects;
  for (auto s : raw.subjects) {
    s.id += "_dup";
    copy.push_back(s);
  }
  auto a = prepared(raw, 6);
  auto b_raw = std::make_shared<const Dataset>(Dataset::make(copy, raw.covariate_names, raw.horizon));
  auto b = std::make_shared<const TransformedDataset>(transform(b_raw, a->grid));
  const auto policy = BandwidthPolicy::global(raw);
  const auto forest_a = fit_forest(a, policy, small_options(3, ResampleMode::full_sample));
  ForestModel forest_b = forest_a;
  forest_b.data = b;
  for (auto& tree : forest_b.trees) tree.weights.assign(b->size(), 1.0);
  const std::vector<double> z{0.3, 0.6};
  for (double t : a->grid.times) {
    const auto ha = forest_hazard(forest_a, z, t), hb = forest_hazard(forest_b, z, t);
    REQUIRE(ha.has_value() == hb.has_value());
    if (ha) CHECK(*hb == doctest::Approx(*ha).epsilon(1e-12));
  }
}

TEST_CASE("forest survival is monotone and insensitive to tree order") {
  auto data = prepared(testing::random_dataset(120, 3, 179, 0.3, true));
  const auto policy = BandwidthPolicy::global(*data->source);
  const auto forest = fit_forest(data, policy, small_options(8, ResampleMode::bootstrap));
  ForestModel reversed = forest;
  std::reverse(reversed.trees.begin(), reversed.trees.end());
  std::vector<double> times;
  for (int g = 0; g <= 40; ++g) times.push_back(data->source->horizon * g / 40.0);
  const auto& subjects = data->source->subjects;
  const std::span<const CovariatePath> some(subjects.data(), 20);
  const auto a = forest_survival(forest, some, times);
  const auto b = forest_survival(reversed, some, times);
  for (std::size_t j = 0; j < a.size(); ++j) {
    CHECK(a[j][0] == 1.0);
    for (std::size_t g = 1; g < times.size(); ++g) {
      CHECK(a[j][g] <= a[j][g - 1]);
      CHECK(b[j][g] == doctest::Approx(a[j][g]).epsilon(1e-12));
    }
  }
}

TEST_CASE("saved forests predict identically after loading") {
  auto data = prepared(testing::random_dataset(80, 3, 181, 0.3, true));
  const auto forest = fit_forest(data, BandwidthPolicy::global(*data->source), small_options(4, ResampleMode::subsample_honest));
  const auto back = forest_from_json(Json::parse(to_json(forest).dump()));
  const std::vector<double> times{0.0, 0.2, 0.5, 1.0};
  const auto& subjects = data->source->subjects;
  const std::span<const CovariatePath> some(subjects.data(), 10);
  CHECK(forest_survival(forest, some, times) == forest_survival(back, some, times));
}

TEST_CASE("deep forest recovers the Scenario I hazard at the median covariates") {
  const auto spec = prepare_scenario(Scenario::I, 1000, 0.0, 5);
  Rng rng = make_stream(5, "generate");
  auto data = prepared(generate(spec, rng).data, 20);
  const auto policy = BandwidthPolicy::global(*data->source);
  auto options = small_options(100, ResampleMode::bootstrap, 5);
  options.threads = 0;
  const auto forest = fit_forest(data, policy, options);
  CovariatePath median;
  median.id = "median";
  median.y = spec.horizon;
  median.starts = {0.0};
  median.stops = {spec.horizon};
  median.values.assign(25, 0.0);  // true hazard exp(-0.1 * 0) = 1
  std::size_t close = 0, total = 0;
  for (double t : data->grid.times) {
    if (t < policy.global_h || t > data->source->horizon - policy.global_h) continue;  // interior only
    const auto hazard = forest_hazard(forest, median, t);
    ++total;
    if (hazard && std::abs(*hazard - 1.0) <= 0.25) ++close;
  }
  MESSAGE("interior grid times within 25%: " << close << " / " << total);
  REQUIRE(total >= 8);
  CHECK(2 * close >= total);
}
