#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rocsurv/concordance.hpp"
#include "rocsurv/kernel_smoothing.hpp"
#include "rocsurv/random.hpp"
#include "rocsurv/survival_data.hpp"

namespace rocsurv {

enum class SplitCriterion { delta_icon, global_icon };

std::string to_string(SplitCriterion criterion);
SplitCriterion parse_split_criterion(const std::string& name);

/// Axis-aligned split on the transformed scale; left child is {x[coordinate] <= threshold}.
struct SplitRule {
  std::size_t coordinate = 0;
  double threshold = 0.5;
};

struct TreeNode {
  std::optional<SplitRule> split;
  int left = -1;
  int right = -1;
  int parent = -1;
  double baseline_count = 0.0;  // weighted n(tau) from baseline membership
  std::vector<double> f_star;   // on the fit grid; may be empty for forest members
  std::vector<double> s_star;

  bool is_leaf() const { return !split; }
};

/// Binary partition of [0,1]^p. Nodes are stored in breadth-first label order:
/// node 0 is the root and the children of the k-th split are appended as a pair.
struct Partition {
  std::vector<TreeNode> nodes;

  std::size_t route(std::span<const double> x) const;  // node index of the leaf containing x
  std::vector<std::size_t> leaves() const;              // ascending node indices
  std::size_t num_leaves() const;
  /// Leaf ordinal (position in leaves()) for every node; -1 for internal nodes.
  std::vector<int> leaf_ordinals() const;
  /// Subtree whose leaves are exactly `frontier` (node indices of the full tree).
  Partition collapsed(std::span<const std::size_t> frontier) const;
};

struct GrowOptions {
  std::size_t n_min = 15;
  SplitCriterion criterion = SplitCriterion::delta_icon;
  std::optional<std::size_t> feature_subset;  // m coordinates drawn per split
  std::size_t max_thresholds = 64;
  bool keep_node_curves = true;
};

/// Flattened training records shared by every tree grown on one dataset.
struct GrowthIndex {
  const TransformedDataset* data = nullptr;
  double h = 0.0;
  KernelTable kernels;
  std::vector<std::uint32_t> record_subject;  // grid records over all k
  std::vector<std::uint16_t> record_time;
  std::vector<const double*> record_values;

  GrowthIndex(const TransformedDataset& data, double h);
};

/// Grows an unpruned tree by breadth-first splitting. A node is splittable when
/// its weighted baseline count reaches n_min; each child must keep n_min/2.
/// Empty `weights` means unit weights.
Partition grow(const GrowthIndex& index, const GrowOptions& options, std::span<const double> weights,
               Rng& rng);
Partition grow(const TransformedDataset& data, const BandwidthPolicy& policy,
               const GrowOptions& options, std::span<const double> weights, Rng& rng);

/// Full-data ICON of the subtree with the given leaves, from the stored node curves.
double partition_icon(const Partition& tree, std::span<const std::size_t> frontier,
                      const TimeGrid& grid);

/// Concordance-complexity pruning path over the greedy weakest-link subtrees.
struct PruneSequence {
  std::vector<std::vector<std::size_t>> candidates;  // candidates[k-1]: leaves of T_(k)
  std::vector<double> icon;                           // icon[k-1] = ICON(T_(k))
  std::vector<double> alpha;                          // alpha_0 = 0 < alpha_1 < ... < alpha_Q
  std::vector<std::size_t> sizes;                     // |T^{alpha_q}|
  std::vector<double> beta;                           // representatives per interval

  /// Size of T^alpha: the entry of the largest alpha_q <= alpha.
  std::size_t size_for_alpha(double alpha) const;
  /// Size maximizing ICON - penalty * size over the candidates (ties to the smaller tree).
  std::size_t size_for_penalty(double penalty) const;
};

PruneSequence prune_sequence(const Partition& tree, const TimeGrid& grid);

/// Fills alpha, sizes and beta from `icon` (icon[k-1] for the size-k candidate).
void compute_thresholds(PruneSequence& sequence);

/// Per distinct training event time and leaf: weighted event count and
/// weighted at-risk count, with membership evaluated at the event time.
struct LeafIncrements {
  std::vector<double> event_times;
  std::size_t num_leaves = 0;
  std::vector<double> events;   // E x L
  std::vector<double> at_risk;  // E x L
};

LeafIncrements leaf_increments(const Partition& tree, const TransformedDataset& data,
                               std::span<const double> weights);

struct CvTrace {
  std::vector<double> beta;
  std::vector<double> mean_heldout_icon;
  std::size_t folds_used = 0;
  std::vector<std::string> warnings;
  double selected_beta = 0.0;
};

/// A fitted survival tree with everything needed to predict for new subjects.
struct RocTree {
  Partition partition;
  TimeGrid grid;
  BandwidthPolicy policy;
  std::shared_ptr<const EcdfTable> ecdf;
  std::vector<NodeHazardCurve> leaf_curves;  // per leaf ordinal
  LeafIncrements increments;
  std::size_t n_min = 15;
  std::uint64_t seed = 0;
  SplitCriterion criterion = SplitCriterion::delta_icon;
  std::size_t p = 0;
  PruneSequence pruning;  // of the full-data tree
  CvTrace cv;

  std::size_t num_leaves() const { return partition.num_leaves(); }
  std::size_t leaf_of(const CovariatePath& path, double t) const;
  ConcordanceReport concordance() const;
};

/// Attaches leaf hazard curves, increments and routing tables to a partition.
RocTree finalize_tree(Partition partition, const TransformedDataset& data,
                      const BandwidthPolicy& policy);

struct TreeOptions {
  GrowOptions grow;
  std::size_t folds = 10;
  std::uint64_t seed = 0;
};

/// Grows on all data, builds the pruning path, picks the penalty maximizing
/// mean held-out ICON across folds, and returns the pruned full-data tree.
RocTree select_by_cv(const TransformedDataset& data, const BandwidthPolicy& policy,
                     const TreeOptions& options);

struct PredictionDiagnostics {
  std::size_t skipped_increments = 0;
};

/// Leaf hazard at t for a subject with the given history (linear between grid
/// times, nearest grid value outside the grid span).
std::optional<double> predict_hazard(const RocTree& tree, const CovariatePath& path, double t);

/// Product-integral survival from the training counting processes along the path.
double predict_survival(const RocTree& tree, const CovariatePath& path, double t,
                        PredictionDiagnostics* diagnostics = nullptr);

std::vector<double> survival_curve(const RocTree& tree, const CovariatePath& path,
                                   std::span<const double> times,
                                   PredictionDiagnostics* diagnostics = nullptr);

}  // namespace rocsurv
