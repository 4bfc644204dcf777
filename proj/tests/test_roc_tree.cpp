#include "doctest.h"
#include "rocsurv/model_io.hpp"
#include "rocsurv/scenario.hpp"
#include "support.hpp"

using namespace rocsurv;

namespace {

struct Fitted {
  std::shared_ptr<const Dataset> raw;
  TransformedDataset data;
  BandwidthPolicy policy;
};

Fitted prepare(Dataset d, std::size_t q = 10) {
  Fitted f;
  f.raw = std::make_shared<const Dataset>(std::move(d));
  f.data = transform(f.raw, uncensored_quantile_grid(*f.raw, q));
  f.policy = BandwidthPolicy::global(*f.raw);
  return f;
}

Partition grow_unit(const Fitted& f, std::size_t n_min, std::uint64_t seed = 1) {
  GrowOptions options;
  options.n_min = n_min;
  Rng rng(seed);
  return grow(f.data, f.policy, options, {}, rng);
}

// Does x satisfy every split on the path from the root to `node`?
bool in_region(const Partition& tree, std::size_t node, std::span<const double> x) {
  auto child = static_cast<int>(node);
  int parent = tree.nodes[node].parent;
  while (parent >= 0) {
    const auto& split = *tree.nodes[static_cast<std::size_t>(parent)].split;
    const bool left = x[split.coordinate] <= split.threshold;
    if (left != (tree.nodes[static_cast<std::size_t>(parent)].left == child)) return false;
    child = parent;
    parent = tree.nodes[static_cast<std::size_t>(parent)].parent;
  }
  return true;
}

}  // namespace

TEST_CASE("n_min above n leaves the root unsplit") {
  const auto f = prepare(testing::random_dataset(40, 3, 73));
  const Partition tree = grow_unit(f, 41);
  CHECK(tree.num_leaves() == 1);
}

TEST_CASE("leaves partition the unit cube") {
  const auto f = prepare(testing::random_dataset(200, 3, 79));
  const Partition tree = grow_unit(f, 10);
  REQUIRE(tree.num_leaves() > 2);
  std::mt19937_64 rng(83);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto leaves = tree.leaves();
  for (int rep = 0; rep < 10000; ++rep) {
    std::vector<double> x{u(rng), u(rng), u(rng)};
    std::size_t hits = 0, hit = 0;
    for (auto leaf : leaves) {
      if (in_region(tree, leaf, x)) {
        ++hits;
        hit = leaf;
      }
    }
    REQUIRE(hits == 1);
    CHECK(tree.route(x) == hit);
  }
}

TEST_CASE("node sizes respect the splitting rules") {
  const auto f = prepare(testing::random_dataset(250, 3, 89));
  const std::size_t n_min = 20;
  const Partition tree = grow_unit(f, n_min);
  for (std::size_t node = 0; node < tree.nodes.size(); ++node) {
    double count = 0.0;
    for (std::size_t i = 0; i < f.data.size(); ++i) count += in_region(tree, node, f.data.baseline.row(i)) ? 1.0 : 0.0;
    CHECK(tree.nodes[node].baseline_count == count);
    if (tree.nodes[node].split) CHECK(count >= static_cast<double>(n_min));
    if (node > 0) CHECK(count >= static_cast<double>(n_min) / 2.0);
  }
}

TEST_CASE("pruning thresholds from hand-set ICON values") {
  PruneSequence seq;
  seq.icon = {0.50, 0.55, 0.57};
  compute_thresholds(seq);
  REQUIRE(seq.alpha.size() == 3);
  CHECK(seq.alpha[0] == 0.0);
  CHECK(seq.alpha[1] == doctest::Approx(0.02));
  CHECK(seq.alpha[2] == doctest::Approx(0.05));
  CHECK(seq.sizes == std::vector<std::size_t>{3, 2, 1});
  CHECK(seq.beta[0] == 0.0);
  CHECK(seq.beta[1] == doctest::Approx(std::sqrt(0.02 * 0.05)));
  CHECK(seq.beta[2] == doctest::Approx(0.05));
  CHECK(seq.size_for_alpha(0.0) == 3);
  CHECK(seq.size_for_alpha(0.019) == 3);
  CHECK(seq.size_for_alpha(0.02) == 2);
  CHECK(seq.size_for_alpha(0.049) == 2);
  CHECK(seq.size_for_alpha(seq.alpha[2]) == 1);
  CHECK(seq.size_for_alpha(1.0) == 1);
}

TEST_CASE("a one-leaf tree has an empty pruning path") {
  const auto f = prepare(testing::random_dataset(30, 2, 97));
  const Partition tree = grow_unit(f, 100);
  const auto seq = prune_sequence(tree, f.data.grid);
  CHECK(seq.alpha == std::vector<double>{0.0});
  CHECK(seq.sizes == std::vector<std::size_t>{1});
}

TEST_CASE("pruning path is nested with increasing thresholds") {
  const auto f = prepare(testing::random_dataset(300, 3, 101));
  const Partition tree = grow_unit(f, 15);
  const auto seq = prune_sequence(tree, f.data.grid);
  const std::size_t K = tree.num_leaves();
  REQUIRE(seq.candidates.size() == K);
  for (std::size_t k = 1; k <= K; ++k) CHECK(seq.candidates[k - 1].size() == k);
  CHECK(seq.icon[0] == doctest::Approx(0.5));
  for (std::size_t q = 1; q < seq.alpha.size(); ++q) {
    CHECK(seq.alpha[q] > seq.alpha[q - 1]);
    CHECK(seq.sizes[q] < seq.sizes[q - 1]);
  }
  for (std::size_t k = 1; k <= K; ++k) {
    CHECK(partition_icon(tree, seq.candidates[k - 1], f.data.grid) == doctest::Approx(seq.icon[k - 1]).epsilon(1e-12));
  }
}

TEST_CASE("leaf increments match direct counts") {
  const auto f = prepare(testing::random_dataset(120, 2, 103, 0.3, true));
  const Partition tree = grow_unit(f, 20);
  const auto inc = leaf_increments(tree, f.data, {});
  const auto ordinal = tree.leaf_ordinals();
  const auto& subjects = f.raw->subjects;
  for (std::size_t e = 0; e < inc.event_times.size(); ++e) {
    const double u = inc.event_times[e];
    std::vector<double> events(inc.num_leaves, 0.0), at_risk(inc.num_leaves, 0.0);
    for (std::size_t i = 0; i < subjects.size(); ++i) {
      if (subjects[i].y < u) continue;
      const auto& path = f.data.paths[i];
      const auto leaf = static_cast<std::size_t>(ordinal[tree.route(path.piece(path.piece_index(u)))]);
      at_risk[leaf] += 1.0;
      if (subjects[i].event && subjects[i].y == u) {
        events[static_cast<std::size_t>(ordinal[tree.route(f.data.at_event.row(i))])] += 1.0;
      }
    }
    for (std::size_t l = 0; l < inc.num_leaves; ++l) {
      CHECK(inc.events[e * inc.num_leaves + l] == events[l]);
      CHECK(inc.at_risk[e * inc.num_leaves + l] == at_risk[l]);
    }
  }
}

TEST_CASE("root-only survival is the Fleming-Harrington estimate") {
  const auto f = prepare(testing::random_dataset(80, 2, 107, 0.0));
  const RocTree tree = finalize_tree(grow_unit(f, 1000), f.data, f.policy);
  const auto& subject = f.raw->subjects[5];
  for (double t : {0.0, 0.05, 0.2, 0.6, 1.0, 2.0}) {
    CHECK(predict_survival(tree, subject, t) == doctest::Approx(std::exp(-testing::nelson_aalen(*f.raw, t))).epsilon(1e-12));
  }
}

TEST_CASE("root-only hazard ignores the covariates") {
  const auto f = prepare(testing::random_dataset(80, 2, 109));
  const RocTree tree = finalize_tree(grow_unit(f, 1000), f.data, f.policy);
  const double t = f.data.grid.times[3];
  const auto a = predict_hazard(tree, f.raw->subjects[0], t);
  for (const auto& s : f.raw->subjects) CHECK(predict_hazard(tree, s, t) == a);
}

TEST_CASE("constant covariates predict the hazard of their leaf") {
  const auto f = prepare(testing::random_dataset(200, 2, 113));
  const RocTree tree = finalize_tree(grow_unit(f, 20), f.data, f.policy);
  const auto ordinal = tree.partition.leaf_ordinals();
  for (std::size_t k = 0; k < f.data.grid.size(); ++k) {
    const double t = f.data.grid.times[k];
    for (std::size_t i = 0; i < 20; ++i) {
      const auto& s = f.raw->subjects[i];
      std::vector<double> x(2);
      tree.ecdf->transform(tree.ecdf->anchor_for_time(t), s.values_at(t), x);
      const auto& curve = tree.leaf_curves[static_cast<std::size_t>(ordinal[tree.partition.route(x)])];
      CHECK(predict_hazard(tree, s, t) == curve.hazard[k]);
    }
  }
}

TEST_CASE("predicted survival starts at one and never increases") {
  const auto f = prepare(testing::random_dataset(200, 3, 127, 0.3, true));
  const RocTree tree = finalize_tree(grow_unit(f, 20), f.data, f.policy);
  std::vector<double> times;
  for (int g = 0; g <= 100; ++g) times.push_back(f.raw->horizon * g / 100.0);
  for (std::size_t i = 0; i < 30; ++i) {
    const auto curve = survival_curve(tree, f.raw->subjects[i], times);
    CHECK(curve[0] == 1.0);
    for (std::size_t g = 1; g < curve.size(); ++g) {
      CHECK(curve[g] <= curve[g - 1]);
      CHECK(curve[g] >= 0.0);
    }
  }
}

TEST_CASE("fitting is deterministic for a fixed seed") {
  const auto f = prepare(testing::random_dataset(150, 3, 131));
  TreeOptions options;
  options.seed = 9;
  options.folds = 5;
  const auto a = to_json(select_by_cv(f.data, f.policy, options)).dump();
  const auto b = to_json(select_by_cv(f.data, f.policy, options)).dump();
  CHECK(a == b);
}

TEST_CASE("saved trees predict identically after loading") {
  const auto f = prepare(testing::random_dataset(150, 3, 137, 0.3, true));
  TreeOptions options;
  options.seed = 4;
  options.folds = 5;
  const RocTree tree = select_by_cv(f.data, f.policy, options);
  const RocTree back = tree_from_json(Json::parse(to_json(tree).dump()));
  std::vector<double> times{0.0, 0.1, 0.4, 0.9, 1.5};
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(survival_curve(tree, f.raw->subjects[i], times) == survival_curve(back, f.raw->subjects[i], times));
  }
}

TEST_CASE("noise covariates prune well below the full tree with held-out ICON near one half") {
  const std::size_t runs = 40;
  std::size_t root_only = 0;
  double selected_leaves = 0.0, full_leaves = 0.0, heldout = 0.0;
  for (std::size_t r = 0; r < runs; ++r) {
    Rng rng = make_stream(2024, "noise", r);
    std::exponential_distribution<double> e(1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<CovariatePath> paths;
    for (int i = 0; i < 100; ++i) {
      CovariatePath s;
      s.id = std::to_string(i);
      s.y = e(rng);
      s.event = true;
      s.starts = {0.0};
      s.stops = {s.y};
      s.values = {u(rng), u(rng), u(rng)};
      paths.push_back(s);
    }
    const auto f = prepare(Dataset::make(paths, {"a", "b", "c"}), 20);
    TreeOptions options;
    options.seed = r;
    const RocTree tree = select_by_cv(f.data, f.policy, options);
    root_only += tree.num_leaves() == 1 ? 1 : 0;
    selected_leaves += static_cast<double>(tree.num_leaves());
    full_leaves += static_cast<double>(tree.pruning.candidates.size());
    const auto& curve = tree.cv.mean_heldout_icon;
    heldout += *std::max_element(curve.begin(), curve.end());
  }
  selected_leaves /= runs;
  full_leaves /= runs;
  heldout /= runs;
  MESSAGE("root-only " << root_only << "/" << runs << ", mean leaves " << selected_leaves << " of " << full_leaves
                       << ", mean selected held-out ICON " << heldout);
  CHECK(selected_leaves <= 0.6 * full_leaves);
  CHECK(std::abs(heldout - 0.5) < 0.05);
}

TEST_CASE("first split on Scenario II uses a signal coordinate") {
  std::size_t signal = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto spec = prepare_scenario(Scenario::II, 400, 0.0, seed);
    Rng rng = make_stream(seed, "generate");
    const auto f = prepare(generate(spec, rng).data, 20);
    const Partition tree = grow_unit(f, 15, seed);
    REQUIRE(tree.nodes[0].split);
    signal += tree.nodes[0].split->coordinate <= 2 ? 1 : 0;
  }
  CHECK(signal >= 4);
}
