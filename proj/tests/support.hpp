#pragma once

// Random datasets and independent brute-force references shared by the tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rocsurv/concordance.hpp"
#include "rocsurv/roc_tree.hpp"
#include "rocsurv/survival_data.hpp"

namespace testing {

using namespace rocsurv;

/// n subjects, p covariates. With `drift`, covariate 0 jumps once at a random
/// time before Y. Event times are exponential with a rate depending on z0.
inline Dataset random_dataset(std::size_t n, std::size_t p, std::uint64_t seed, double censor_prob = 0.3,
                              bool drift = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal;
  std::vector<CovariatePath> paths;
  for (std::size_t i = 0; i < n; ++i) {
    CovariatePath path;
    path.id = "s" + std::to_string(i);
    std::vector<double> z(p);
    for (double& v : z) v = normal(rng);
    const double rate = std::exp(0.8 * z[0]);
    path.y = -std::log(1.0 - u(rng)) / rate + 1e-6;
    path.event = u(rng) >= censor_prob;
    if (drift && u(rng) < 0.6) {
      const double jump = path.y * (0.2 + 0.6 * u(rng));
      path.starts = {0.0, jump};
      path.stops = {jump, path.y};
      path.values = z;
      z[0] += normal(rng);
      path.values.insert(path.values.end(), z.begin(), z.end());
    } else {
      path.starts = {0.0};
      path.stops = {path.y};
      path.values = z;
    }
    paths.push_back(std::move(path));
  }
  if (std::none_of(paths.begin(), paths.end(), [](const auto& s) { return s.event; })) paths[0].event = true;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < p; ++j) names.push_back("z" + std::to_string(j + 1));
  return Dataset::make(std::move(paths), std::move(names));
}

inline double epanechnikov(double x) { return std::abs(x) < 1.0 ? 0.75 * (1.0 - x * x) : 0.0; }

/// Pairwise concordance at grid time t over subjects: every uncensored subject
/// i is a case with weight K_h(t' - Y_i)/n and marker = hazard of the node
/// holding its covariates at Y_i; every subject with Y_j >= t is a control with
/// weight 1/n and marker = hazard of its node at t. O(n^2).
struct SubjectMass {
  double marker;
  double weight;
};

inline std::optional<double> pairwise_concordance(const std::vector<SubjectMass>& cases,
                                                  const std::vector<SubjectMass>& controls) {
  double num = 0.0, den = 0.0;
  for (const auto& a : cases) {
    for (const auto& b : controls) {
      if (std::isnan(a.marker) || std::isnan(b.marker)) continue;
      const double m = a.weight * b.weight;
      den += m;
      if (a.marker > b.marker) num += m;
      if (a.marker == b.marker) num += 0.5 * m;
    }
  }
  if (!(den > 0.0)) return std::nullopt;
  return num / den;
}

/// Nelson-Aalen cumulative hazard from raw (y, event) pairs, evaluated at t.
inline double nelson_aalen(const Dataset& data, double t) {
  std::map<double, std::pair<double, double>> by_time;  // time -> (deaths, at risk)
  for (const auto& s : data.subjects) {
    if (s.event && s.y <= t) by_time[s.y].first += 1.0;
  }
  double total = 0.0;
  for (auto& [u, dr] : by_time) {
    double at_risk = 0.0;
    for (const auto& s : data.subjects) at_risk += s.y >= u ? 1.0 : 0.0;
    total += dr.first / at_risk;
  }
  return total;
}

/// Random partition with at most `max_leaves` leaves built from random splits.
inline Partition random_partition(std::size_t p, std::size_t max_leaves, std::mt19937_64& rng) {
  Partition tree;
  tree.nodes.push_back(TreeNode{});
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::uniform_int_distribution<std::size_t> coord(0, p - 1);
  std::uniform_int_distribution<std::size_t> leaves_dist(1, max_leaves);
  const std::size_t target = leaves_dist(rng);
  while (tree.num_leaves() < target) {
    auto leaves = tree.leaves();
    std::uniform_int_distribution<std::size_t> pick(0, leaves.size() - 1);
    const std::size_t node = leaves[pick(rng)];
    tree.nodes[node].split = SplitRule{coord(rng), u(rng)};
    tree.nodes[node].left = static_cast<int>(tree.nodes.size());
    tree.nodes[node].right = static_cast<int>(tree.nodes.size() + 1);
    TreeNode child;
    child.parent = static_cast<int>(node);
    tree.nodes.push_back(child);
    tree.nodes.push_back(child);
  }
  return tree;
}

}  // namespace testing
