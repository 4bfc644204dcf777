#include "rocsurv/roc_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rocsurv/errors.hpp"

namespace rocsurv {

std::string to_string(SplitCriterion criterion) {
  return criterion == SplitCriterion::delta_icon ? "delta_icon" : "global_icon";
}

SplitCriterion parse_split_criterion(const std::string& name) {
  if (name == "delta_icon") return SplitCriterion::delta_icon;
  if (name == "global_icon") return SplitCriterion::global_icon;
  throw DataError("unknown split criterion '" + name + "'");
}

// --- Partition -------------------------------------------------------------

std::size_t Partition::route(std::span<const double> x) const {
  std::size_t node = 0;
  while (nodes[node].split) {
    const auto& rule = *nodes[node].split;
    node = static_cast<std::size_t>(x[rule.coordinate] <= rule.threshold ? nodes[node].left
                                                                          : nodes[node].right);
  }
  return node;
}

std::vector<std::size_t> Partition::leaves() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) out.push_back(i);
  }
  return out;
}

std::size_t Partition::num_leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::vector<int> Partition::leaf_ordinals() const {
  std::vector<int> ordinal(nodes.size(), -1);
  int next = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) ordinal[i] = next++;
  }
  return ordinal;
}

Partition Partition::collapsed(std::span<const std::size_t> frontier) const {
  std::vector<char> is_frontier(nodes.size(), 0);
  for (std::size_t f : frontier) is_frontier[f] = 1;
  // Keep nodes reachable from the root without passing through a frontier node.
  std::vector<char> keep(nodes.size(), 0);
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const std::size_t node = stack.back();
    stack.pop_back();
    keep[node] = 1;
    if (!is_frontier[node] && nodes[node].split) {
      stack.push_back(static_cast<std::size_t>(nodes[node].left));
      stack.push_back(static_cast<std::size_t>(nodes[node].right));
    }
  }
  std::vector<int> new_index(nodes.size(), -1);
  Partition out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!keep[i]) continue;
    new_index[i] = static_cast<int>(out.nodes.size());
    out.nodes.push_back(nodes[i]);
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!keep[i]) continue;
    TreeNode& node = out.nodes[static_cast<std::size_t>(new_index[i])];
    node.parent = node.parent >= 0 ? new_index[static_cast<std::size_t>(node.parent)] : -1;
    if (is_frontier[i] || !node.split) {
      node.split.reset();
      node.left = node.right = -1;
    } else {
      node.left = new_index[static_cast<std::size_t>(node.left)];
      node.right = new_index[static_cast<std::size_t>(node.right)];
    }
  }
  return out;
}

// --- Growth ----------------------------------------------------------------

GrowthIndex::GrowthIndex(const TransformedDataset& d, double bandwidth)
    : data(&d), h(bandwidth), kernels(kernel_table(d, bandwidth)) {
  for (std::size_t k = 0; k < d.grid.size(); ++k) {
    for (std::size_t r = 0; r < d.at_risk[k].size(); ++r) {
      record_subject.push_back(static_cast<std::uint32_t>(d.at_risk[k][r]));
      record_time.push_back(static_cast<std::uint16_t>(k));
      record_values.push_back(d.grid_values[k].row(r).data());
    }
  }
}

namespace {

struct NodeWork {
  std::vector<std::uint32_t> baseline;
  std::vector<std::uint32_t> records;
  std::vector<std::uint32_t> events;
  std::vector<double> f;  // unnormalized weighted sums per grid time
  std::vector<double> s;
  double count = 0.0;
};

struct SplitChoice {
  double score = -std::numeric_limits<double>::infinity();
  std::size_t coordinate = 0;
  double threshold = 0.0;
  bool found = false;
};

class Grower {
 public:
  Grower(const GrowthIndex& index, const GrowOptions& options, std::span<const double> weights,
         Rng& rng)
      : index_(index),
        data_(*index.data),
        options_(options),
        rng_(rng),
        q_(data_.grid.size()),
        p_(data_.dim()) {
    const std::size_t n = data_.size();
    weights_.assign(n, 1.0);
    if (!weights.empty()) std::copy(weights.begin(), weights.end(), weights_.begin());
    total_weight_ = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    if (!(total_weight_ > 0.0)) throw DataError("growth weights sum to zero");
  }

  Partition run() {
    NodeWork root;
    const std::size_t n = data_.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (weights_[i] <= 0.0) continue;
      root.baseline.push_back(static_cast<std::uint32_t>(i));
      if (!index_.kernels.by_subject[i].empty()) root.events.push_back(static_cast<std::uint32_t>(i));
    }
    for (std::size_t r = 0; r < index_.record_subject.size(); ++r) {
      if (weights_[index_.record_subject[r]] > 0.0) root.records.push_back(static_cast<std::uint32_t>(r));
    }
    Partition tree;
    add_node(tree, std::move(root), -1);
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
      NodeWork work = std::move(work_[k]);
      work_[k] = NodeWork{};
      if (work.count < static_cast<double>(options_.n_min)) continue;
      // Nothing to separate in a node without event mass near the grid.
      if (std::all_of(work.f.begin(), work.f.end(), [](double v) { return v == 0.0; })) continue;
      const SplitChoice choice = best_split(tree, k, work);
      if (!choice.found) continue;
      apply_split(tree, k, std::move(work), choice);
    }
    if (!options_.keep_node_curves) {
      for (auto& node : tree.nodes) {
        node.f_star = {};
        node.s_star = {};
      }
    }
    return tree;
  }

 private:
  void summarize(NodeWork& work) const {
    work.f.assign(q_, 0.0);
    work.s.assign(q_, 0.0);
    work.count = 0.0;
    for (auto i : work.baseline) work.count += weights_[i];
    for (auto r : work.records) work.s[index_.record_time[r]] += weights_[index_.record_subject[r]];
    for (auto i : work.events) {
      for (const auto& e : index_.kernels.by_subject[i]) work.f[e.k] += weights_[i] * e.weight;
    }
  }

  void add_node(Partition& tree, NodeWork work, int parent) {
    summarize(work);
    TreeNode node;
    node.parent = parent;
    node.baseline_count = work.count;
    node.f_star.resize(q_);
    node.s_star.resize(q_);
    for (std::size_t k = 0; k < q_; ++k) {
      node.f_star[k] = work.f[k] / total_weight_;
      node.s_star[k] = work.s[k] / total_weight_;
    }
    tree.nodes.push_back(std::move(node));
    work_.push_back(std::move(work));
  }

  std::vector<std::size_t> candidate_coordinates() {
    std::vector<std::size_t> coords(p_);
    std::iota(coords.begin(), coords.end(), 0);
    if (options_.feature_subset && *options_.feature_subset < p_) {
      const std::size_t m = *options_.feature_subset;
      for (std::size_t j = 0; j < m; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, p_ - 1);
        std::swap(coords[j], coords[pick(rng_)]);
      }
      coords.resize(m);
      std::sort(coords.begin(), coords.end());
    }
    return coords;
  }

  std::vector<double> thresholds(const NodeWork& work, std::size_t c) const {
    std::vector<double> values;
    values.reserve(work.baseline.size());
    for (auto i : work.baseline) values.push_back(data_.baseline(i, c));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::vector<double> mids;
    for (std::size_t j = 0; j + 1 < values.size(); ++j) mids.push_back(0.5 * (values[j] + values[j + 1]));
    const std::size_t cap = options_.max_thresholds;
    if (mids.size() > cap) {
      std::vector<double> thinned;
      thinned.reserve(cap);
      for (std::size_t j = 0; j < cap; ++j) thinned.push_back(mids[(j + 1) * mids.size() / (cap + 1)]);
      mids = std::move(thinned);
    }
    return mids;
  }

  // Whole-tree ICON context with the node being split removed.
  std::vector<ConIncrement> others_without(const Partition& tree, std::size_t node) const {
    std::vector<ConIncrement> out;
    out.reserve(q_);
    std::vector<NodeValue> values;
    for (std::size_t k = 0; k < q_; ++k) {
      values.clear();
      for (std::size_t j = 0; j < tree.nodes.size(); ++j) {
        if (j == node || !tree.nodes[j].is_leaf()) continue;
        values.push_back(NodeValue::from_estimates(tree.nodes[j].f_star[k], tree.nodes[j].s_star[k]));
      }
      out.emplace_back(values);
    }
    return out;
  }

  SplitChoice best_split(const Partition& tree, std::size_t node, const NodeWork& work) {
    SplitChoice best;
    const auto coords = candidate_coordinates();
    std::vector<ConIncrement> others;
    if (options_.criterion == SplitCriterion::global_icon) others = others_without(tree, node);
    const double half_min = 0.5 * static_cast<double>(options_.n_min);
    const auto& omega = data_.grid.weights;

    std::vector<double> hist_n, hist_s, hist_f;
    for (std::size_t c : coords) {
      const auto cuts = thresholds(work, c);
      if (cuts.empty()) continue;
      const std::size_t bins = cuts.size() + 1;
      hist_n.assign(bins, 0.0);
      hist_s.assign(bins * q_, 0.0);
      hist_f.assign(bins * q_, 0.0);
      auto bin_of = [&](double x) {
        return static_cast<std::size_t>(std::lower_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
      };
      for (auto i : work.baseline) hist_n[bin_of(data_.baseline(i, c))] += weights_[i];
      for (auto r : work.records) {
        const std::size_t b = bin_of(index_.record_values[r][c]);
        hist_s[b * q_ + index_.record_time[r]] += weights_[index_.record_subject[r]];
      }
      for (auto i : work.events) {
        const std::size_t b = bin_of(data_.at_event(i, c));
        for (const auto& e : index_.kernels.by_subject[i]) hist_f[b * q_ + e.k] += weights_[i] * e.weight;
      }
      double n_left = 0.0;
      std::vector<double> f_left(q_, 0.0), s_left(q_, 0.0);
      NodeValue pair[2];
      for (std::size_t t = 0; t < cuts.size(); ++t) {
        n_left += hist_n[t];
        for (std::size_t k = 0; k < q_; ++k) {
          f_left[k] += hist_f[t * q_ + k];
          s_left[k] += hist_s[t * q_ + k];
        }
        const double n_right = work.count - n_left;
        if (n_left < half_min || n_right < half_min) continue;
        double score = 0.0;
        if (options_.criterion == SplitCriterion::delta_icon) {
          for (std::size_t k = 0; k < q_; ++k) {
            const double denominator = work.f[k] * work.s[k];
            if (!(denominator > 0.0)) continue;
            const double f_right = work.f[k] - f_left[k];
            const double s_right = work.s[k] - s_left[k];
            score += omega[k] * std::abs(f_left[k] * s_right - f_right * s_left[k]) / denominator;
          }
        } else {
          for (std::size_t k = 0; k < q_; ++k) {
            pair[0] = NodeValue::from_estimates(f_left[k] / total_weight_, s_left[k] / total_weight_);
            pair[1] = NodeValue::from_estimates((work.f[k] - f_left[k]) / total_weight_,
                                                (work.s[k] - s_left[k]) / total_weight_);
            if (const auto con = others[k].con_with(pair)) score += omega[k] * *con;
          }
        }
        if (score > best.score) {
          best.score = score;
          best.coordinate = c;
          best.threshold = cuts[t];
          best.found = true;
        }
      }
    }
    return best;
  }

  void apply_split(Partition& tree, std::size_t node, NodeWork work, const SplitChoice& choice) {
    const std::size_t c = choice.coordinate;
    const double cut = choice.threshold;
    NodeWork left, right;
    for (auto i : work.baseline) (data_.baseline(i, c) <= cut ? left : right).baseline.push_back(i);
    for (auto r : work.records) (index_.record_values[r][c] <= cut ? left : right).records.push_back(r);
    for (auto i : work.events) (data_.at_event(i, c) <= cut ? left : right).events.push_back(i);
    tree.nodes[node].split = SplitRule{c, cut};
    tree.nodes[node].left = static_cast<int>(tree.nodes.size());
    tree.nodes[node].right = static_cast<int>(tree.nodes.size() + 1);
    add_node(tree, std::move(left), static_cast<int>(node));
    add_node(tree, std::move(right), static_cast<int>(node));
  }

  const GrowthIndex& index_;
  const TransformedDataset& data_;
  const GrowOptions& options_;
  Rng& rng_;
  std::size_t q_;
  std::size_t p_;
  std::vector<double> weights_;
  double total_weight_ = 0.0;
  std::vector<NodeWork> work_;
};

}  // namespace

Partition grow(const GrowthIndex& index, const GrowOptions& options, std::span<const double> weights,
               Rng& rng) {
  if (options.n_min < 2) throw DataError("n_min must be at least 2");
  if (index.data->size() == 0) throw DataError("cannot grow a tree on an empty dataset");
  if (!weights.empty() && weights.size() != index.data->size()) {
    throw DataError("weight vector does not match the dataset");
  }
  return Grower(index, options, weights, rng).run();
}

Partition grow(const TransformedDataset& data, const BandwidthPolicy& policy,
               const GrowOptions& options, std::span<const double> weights, Rng& rng) {
  const GrowthIndex index(data, policy.global_h);
  return grow(index, options, weights, rng);
}

// --- Pruning ---------------------------------------------------------------

double partition_icon(const Partition& tree, std::span<const std::size_t> frontier,
                      const TimeGrid& grid) {
  std::vector<std::vector<NodeValue>> per_time(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    for (std::size_t node : frontier) {
      const auto& n = tree.nodes[node];
      per_time[k].push_back(NodeValue::from_estimates(n.f_star[k], n.s_star[k]));
    }
  }
  return icon(per_time, grid).icon;
}

std::size_t PruneSequence::size_for_alpha(double a) const {
  std::size_t q = 0;
  while (q + 1 < alpha.size() && alpha[q + 1] <= a) ++q;
  return sizes[q];
}

std::size_t PruneSequence::size_for_penalty(double penalty) const {
  std::size_t best = 1;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= icon.size(); ++k) {
    const double value = icon[k - 1] - penalty * static_cast<double>(k);
    if (value > best_value) {
      best_value = value;
      best = k;
    }
  }
  return best;
}

PruneSequence prune_sequence(const Partition& tree, const TimeGrid& grid) {
  if (tree.nodes.empty() || tree.nodes.front().f_star.size() != grid.size()) {
    throw NumericError("pruning requires node curves on the fit grid");
  }
  const std::size_t K = tree.num_leaves();
  PruneSequence seq;
  seq.candidates.resize(K);
  seq.icon.resize(K);
  std::vector<std::size_t> frontier = tree.leaves();
  seq.candidates[K - 1] = frontier;
  seq.icon[K - 1] = partition_icon(tree, frontier, grid);
  for (std::size_t size = K; size > 1; --size) {
    std::vector<char> in_frontier(tree.nodes.size(), 0);
    for (auto f : frontier) in_frontier[f] = 1;
    double best_icon = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_frontier;
    for (std::size_t node = 0; node < tree.nodes.size(); ++node) {
      const auto& n = tree.nodes[node];
      if (!n.split || in_frontier[node]) continue;
      if (!in_frontier[static_cast<std::size_t>(n.left)] || !in_frontier[static_cast<std::size_t>(n.right)]) {
        continue;
      }
      std::vector<std::size_t> next;
      for (auto f : frontier) {
        if (f != static_cast<std::size_t>(n.left) && f != static_cast<std::size_t>(n.right)) next.push_back(f);
      }
      next.push_back(node);
      std::sort(next.begin(), next.end());
      const double value = partition_icon(tree, next, grid);
      if (value > best_icon) {
        best_icon = value;
        best_frontier = std::move(next);
      }
    }
    frontier = std::move(best_frontier);
    seq.candidates[size - 2] = frontier;
    seq.icon[size - 2] = best_icon;
  }

  compute_thresholds(seq);
  return seq;
}

void compute_thresholds(PruneSequence& sequence) {
  sequence.alpha.clear();
  sequence.sizes.clear();
  sequence.beta.clear();
  const std::size_t K = sequence.icon.size();
  sequence.alpha.push_back(0.0);
  sequence.sizes.push_back(K);
  std::size_t current = K;
  while (current > 1) {
    double alpha = std::numeric_limits<double>::infinity();
    std::size_t smallest = current;
    for (std::size_t k = 1; k < current; ++k) {
      const double a = (sequence.icon[current - 1] - sequence.icon[k - 1]) / static_cast<double>(current - k);
      if (a < alpha) {
        alpha = a;
        smallest = k;
      }
    }
    if (alpha <= sequence.alpha.back()) {
      sequence.sizes.back() = smallest;  // equal threshold: the smaller tree represents it
    } else {
      sequence.alpha.push_back(alpha);
      sequence.sizes.push_back(smallest);
    }
    current = smallest;
  }
  const std::size_t Q = sequence.alpha.size() - 1;
  for (std::size_t q = 0; q < Q; ++q) sequence.beta.push_back(std::sqrt(sequence.alpha[q] * sequence.alpha[q + 1]));
  sequence.beta.push_back(sequence.alpha[Q]);
}

// --- Increments and finalization -------------------------------------------

LeafIncrements leaf_increments(const Partition& tree, const TransformedDataset& data,
                               std::span<const double> weights) {
  const Dataset& raw = *data.source;
  LeafIncrements inc;
  inc.event_times = sorted_uncensored_times(raw);
  inc.event_times.erase(std::unique(inc.event_times.begin(), inc.event_times.end()),
                        inc.event_times.end());
  const auto ordinal = tree.leaf_ordinals();
  const std::size_t L = tree.num_leaves();
  const std::size_t E = inc.event_times.size();
  inc.num_leaves = L;
  inc.events.assign(E * L, 0.0);
  std::vector<double> diff((E + 1) * L, 0.0);
  const auto& times = inc.event_times;
  for (std::size_t j = 0; j < raw.size(); ++j) {
    const double w = weights.empty() ? 1.0 : weights[j];
    if (w <= 0.0) continue;
    const auto& path = data.paths[j];
    double start = 0.0;
    for (std::size_t piece = 0; piece < path.num_pieces(); ++piece) {
      const double stop = path.stops[piece];
      const auto lo = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), start) - times.begin());
      const auto hi = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), stop) - times.begin());
      if (lo < hi) {
        const auto leaf = static_cast<std::size_t>(ordinal[tree.route(path.piece(piece))]);
        diff[lo * L + leaf] += w;
        diff[hi * L + leaf] -= w;
      }
      start = stop;
    }
    if (raw.subjects[j].event) {
      const auto e = static_cast<std::size_t>(
          std::lower_bound(times.begin(), times.end(), raw.subjects[j].y) - times.begin());
      const auto leaf = static_cast<std::size_t>(ordinal[tree.route(data.at_event.row(j))]);
      inc.events[e * L + leaf] += w;
    }
  }
  inc.at_risk.assign(E * L, 0.0);
  for (std::size_t l = 0; l < L; ++l) {
    double running = 0.0;
    for (std::size_t e = 0; e < E; ++e) {
      running += diff[e * L + l];
      inc.at_risk[e * L + l] = running;
    }
  }
  return inc;
}

RocTree finalize_tree(Partition partition, const TransformedDataset& data,
                      const BandwidthPolicy& policy) {
  RocTree tree;
  tree.grid = data.grid;
  tree.policy = policy;
  tree.ecdf = std::make_shared<EcdfTable>(data.ecdf);
  tree.p = data.dim();
  for (std::size_t leaf : partition.leaves()) {
    tree.leaf_curves.push_back(node_hazard(
        data, [&](std::span<const double> x) { return partition.route(x) == leaf; }, policy));
  }
  tree.increments = leaf_increments(partition, data, {});
  tree.partition = std::move(partition);
  return tree;
}

namespace {

void check_dimension(const CovariatePath& path, std::size_t p) {
  if (path.dim() != p) {
    throw DataError("subject '" + path.id + "' has " + std::to_string(path.dim()) +
                    " covariates; the model expects p = " + std::to_string(p));
  }
}

}  // namespace

std::size_t RocTree::leaf_of(const CovariatePath& path, double t) const {
  check_dimension(path, p);
  std::vector<double> x(p);
  ecdf->transform(ecdf->anchor_for_time(t), path.values_at(t), x);
  return static_cast<std::size_t>(partition.leaf_ordinals()[partition.route(x)]);
}

ConcordanceReport RocTree::concordance() const { return icon(leaf_curves, grid); }

// --- Cross-validation ------------------------------------------------------

namespace {

// Held-out f*, S* sums for every node of `tree` (unnormalized; ratios only).
void heldout_sums(const Partition& tree, const GrowthIndex& index, std::span<const double> weights,
                  std::vector<std::vector<double>>& f, std::vector<std::vector<double>>& s) {
  const auto& data = *index.data;
  const std::size_t q = data.grid.size();
  f.assign(tree.nodes.size(), std::vector<double>(q, 0.0));
  s.assign(tree.nodes.size(), std::vector<double>(q, 0.0));
  auto visit = [&](std::span<const double> x, auto&& add) {
    std::size_t node = 0;
    while (true) {
      add(node);
      if (!tree.nodes[node].split) break;
      const auto& rule = *tree.nodes[node].split;
      node = static_cast<std::size_t>(x[rule.coordinate] <= rule.threshold ? tree.nodes[node].left
                                                                           : tree.nodes[node].right);
    }
  };
  const std::size_t p = data.dim();
  for (std::size_t r = 0; r < index.record_subject.size(); ++r) {
    const double w = weights[index.record_subject[r]];
    if (w <= 0.0) continue;
    const std::size_t k = index.record_time[r];
    visit({index.record_values[r], p}, [&](std::size_t node) { s[node][k] += w; });
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double w = weights[i];
    if (w <= 0.0 || index.kernels.by_subject[i].empty()) continue;
    visit(data.at_event.row(i), [&](std::size_t node) {
      for (const auto& e : index.kernels.by_subject[i]) f[node][e.k] += w * e.weight;
    });
  }
}

}  // namespace

RocTree select_by_cv(const TransformedDataset& data, const BandwidthPolicy& policy,
                     const TreeOptions& options) {
  if (options.folds < 2) throw DataError("cross-validation needs at least 2 folds");
  const GrowthIndex index(data, policy.global_h);
  const std::size_t n = data.size();

  Rng grow_rng = make_stream(options.seed, "tree-grow");
  const Partition full = grow(index, options.grow, {}, grow_rng);
  PruneSequence sequence = prune_sequence(full, data.grid);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng fold_rng = make_stream(options.seed, "cv-folds");
  std::shuffle(order.begin(), order.end(), fold_rng);
  std::vector<std::size_t> fold_of(n);
  for (std::size_t j = 0; j < n; ++j) fold_of[order[j]] = j % options.folds;

  CvTrace trace;
  trace.beta = sequence.beta;
  std::vector<double> total(sequence.beta.size(), 0.0);
  const std::size_t q = data.grid.size();
  for (std::size_t fold = 0; fold < options.folds; ++fold) {
    std::vector<double> train(n, 0.0), heldout(n, 0.0);
    bool heldout_event = false;
    bool train_any = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold_of[i] == fold) {
        heldout[i] = 1.0;
        heldout_event = heldout_event || !index.kernels.by_subject[i].empty();
      } else {
        train[i] = 1.0;
        train_any = true;
      }
    }
    if (!heldout_event || !train_any) {
      trace.warnings.push_back("fold " + std::to_string(fold + 1) + " skipped: no held-out events near the grid");
      continue;
    }
    Rng fold_grow = make_stream(options.seed, "cv-grow", fold);
    const Partition fold_tree = grow(index, options.grow, train, fold_grow);
    const PruneSequence fold_seq = prune_sequence(fold_tree, data.grid);
    std::vector<std::vector<double>> f, s;
    heldout_sums(fold_tree, index, heldout, f, s);

    std::vector<double> scores(sequence.beta.size());
    bool defined = true;
    for (std::size_t b = 0; b < sequence.beta.size() && defined; ++b) {
      const auto& frontier = fold_seq.candidates[fold_seq.size_for_penalty(sequence.beta[b]) - 1];
      std::vector<std::vector<NodeValue>> per_time(q);
      for (std::size_t k = 0; k < q; ++k) {
        for (std::size_t node : frontier) {
          const auto& tn = fold_tree.nodes[node];
          NodeValue v = NodeValue::from_estimates(tn.f_star[k], tn.s_star[k]);
          v.f = f[node][k];
          v.s = s[node][k];
          per_time[k].push_back(v);
        }
      }
      try {
        scores[b] = icon(per_time, data.grid).icon;
      } catch (const NumericError&) {
        defined = false;
      }
    }
    if (!defined) {
      trace.warnings.push_back("fold " + std::to_string(fold + 1) + " skipped: held-out concordance undefined");
      continue;
    }
    for (std::size_t b = 0; b < scores.size(); ++b) total[b] += scores[b];
    ++trace.folds_used;
  }
  if (trace.folds_used == 0) throw NumericError("every cross-validation fold was skipped");

  std::size_t chosen = 0;
  trace.mean_heldout_icon.resize(total.size());
  for (std::size_t b = 0; b < total.size(); ++b) {
    trace.mean_heldout_icon[b] = total[b] / static_cast<double>(trace.folds_used);
    if (trace.mean_heldout_icon[b] >= trace.mean_heldout_icon[chosen]) chosen = b;
  }
  trace.selected_beta = sequence.beta[chosen];

  const std::size_t size = sequence.size_for_penalty(trace.selected_beta);
  RocTree tree = finalize_tree(full.collapsed(sequence.candidates[size - 1]), data, policy);
  tree.n_min = options.grow.n_min;
  tree.seed = options.seed;
  tree.criterion = options.grow.criterion;
  tree.pruning = std::move(sequence);
  tree.cv = std::move(trace);
  return tree;
}

// --- Prediction ------------------------------------------------------------

std::optional<double> predict_hazard(const RocTree& tree, const CovariatePath& path, double t) {
  const auto& curve = tree.leaf_curves[tree.leaf_of(path, t)];
  const auto& times = tree.grid.times;
  if (t <= times.front()) return curve.hazard.front();
  if (t >= times.back()) return curve.hazard.back();
  const auto j = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
  const auto& lo = curve.hazard[j - 1];
  const auto& hi = curve.hazard[j];
  if (lo && hi) {
    const double w = (t - times[j - 1]) / (times[j] - times[j - 1]);
    return *lo + w * (*hi - *lo);
  }
  return lo ? lo : hi;
}

std::vector<double> survival_curve(const RocTree& tree, const CovariatePath& path,
                                   std::span<const double> times, PredictionDiagnostics* diagnostics) {
  check_dimension(path, tree.p);
  std::vector<double> out(times.size(), 1.0);
  if (times.empty()) return out;
  const double t_max = *std::max_element(times.begin(), times.end());
  if (!(t_max > 0.0)) return out;
  const auto pieces = transform_path(path, *tree.ecdf, t_max);
  const auto ordinal = tree.partition.leaf_ordinals();
  std::vector<std::size_t> piece_leaf(pieces.num_pieces());
  for (std::size_t j = 0; j < pieces.num_pieces(); ++j) {
    piece_leaf[j] = static_cast<std::size_t>(ordinal[tree.partition.route(pieces.piece(j))]);
  }
  const auto& inc = tree.increments;
  const std::size_t L = inc.num_leaves;
  std::vector<double> cumulative;
  std::size_t piece = 0;
  double hazard = 0.0;
  for (std::size_t e = 0; e < inc.event_times.size() && inc.event_times[e] <= t_max; ++e) {
    while (pieces.stops[piece] < inc.event_times[e]) ++piece;
    const std::size_t leaf = piece_leaf[piece];
    const double at_risk = inc.at_risk[e * L + leaf];
    if (at_risk > 0.0) {
      hazard += inc.events[e * L + leaf] / at_risk;
    } else if (diagnostics) {
      ++diagnostics->skipped_increments;
    }
    cumulative.push_back(hazard);
  }
  for (std::size_t j = 0; j < times.size(); ++j) {
    const auto count = static_cast<std::size_t>(
        std::upper_bound(inc.event_times.begin(), inc.event_times.begin() + static_cast<std::ptrdiff_t>(cumulative.size()), times[j]) -
        inc.event_times.begin());
    out[j] = count == 0 ? 1.0 : std::exp(-cumulative[count - 1]);
  }
  return out;
}

double predict_survival(const RocTree& tree, const CovariatePath& path, double t,
                        PredictionDiagnostics* diagnostics) {
  const double times[] = {t};
  return survival_curve(tree, path, times, diagnostics).front();
}

}  // namespace rocsurv
