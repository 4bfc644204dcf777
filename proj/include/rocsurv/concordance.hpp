#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "rocsurv/kernel_smoothing.hpp"
#include "rocsurv/survival_data.hpp"

namespace rocsurv {

/// One terminal node at a fixed time: its ranking marker (estimated hazard)
/// and its case mass f* and control mass S*.
///
/// A node with S* = 0 but f* > 0 ranks above every other node (infinite
/// hazard). A node with f* = S* = 0 contributes nothing. NaN hazards mark
/// undefined nodes, which are excluded from both sums.
struct NodeValue {
  double hazard = 0.0;
  double f = 0.0;
  double s = 0.0;

  static NodeValue from_estimates(double f, double s);
};

/// Concordance among nodes at one time: the probability that a case ranks
/// above a control, ties counted one half. O(M log M).
/// Returns nullopt when total case mass or total control mass is zero.
std::optional<double> con_t(std::span<const NodeValue> nodes);

/// Same quantity evaluated by the double sum over ordered node pairs, O(M^2).
std::optional<double> con_t_direct(std::span<const NodeValue> nodes);

/// Piecewise-linear ROC curve through the cumulative (control, case) mass
/// fractions of nodes sorted by decreasing hazard, tied nodes merged.
struct RocStarCurve {
  std::vector<double> fpr;  // includes 0 and 1
  std::vector<double> tpr;

  double operator()(double q) const;
  double area() const;
};

std::optional<RocStarCurve> roc_star(std::span<const NodeValue> nodes);

struct ConcordanceReport {
  std::vector<double> times;
  std::vector<double> weights;
  std::vector<std::optional<double>> con;
  double icon = 0.0;
};

/// Weighted average of per-time concordance over the grid points where it is
/// defined, renormalized by their total weight. Throws NumericError when no
/// grid point is defined. `per_time[k]` lists the nodes at grid time k.
ConcordanceReport icon(const std::vector<std::vector<NodeValue>>& per_time, const TimeGrid& grid);

/// Same, from per-node curves (f*, S*, hazard on the grid).
ConcordanceReport icon(std::span<const NodeHazardCurve> curves, const TimeGrid& grid);

/// Within-node concordance gain of splitting `parent` into `left` and `right`:
/// sum_k w_k |fL SR - fR SL| / (fP SP), skipping grid points with fP SP = 0.
double delta_icon(std::span<const double> parent_f, std::span<const double> parent_s,
                  std::span<const double> left_f, std::span<const double> left_s,
                  std::span<const double> right_f, std::span<const double> right_s,
                  std::span<const double> weights);

/// Concordance of a fixed node set extended by a few extra nodes, without
/// re-sorting the fixed set. Used to score candidate splits by whole-tree ICON.
class ConIncrement {
 public:
  explicit ConIncrement(std::span<const NodeValue> others);
  std::optional<double> con_with(std::span<const NodeValue> extra) const;

 private:
  std::vector<double> hazard_;   // distinct hazards, ascending
  std::vector<double> f_;        // per hazard group
  std::vector<double> s_;
  std::vector<double> f_below_;  // prefix sums over groups strictly below
  std::vector<double> s_below_;
  double f_total_ = 0.0;
  double s_total_ = 0.0;
  double numerator_ = 0.0;
};

/// Scored subject mass for concordance of an arbitrary (continuous) marker.
struct Scored {
  double score = 0.0;
  double weight = 0.0;
};

/// sum_{a in cases, b in controls} w_a w_b ([score_a > score_b] + 0.5 [equal])
/// divided by (sum w_a)(sum w_b). O((n + m) log m).
std::optional<double> pairwise_con_t(std::span<const Scored> cases, std::span<const Scored> controls);

/// CSV with header `t,weight,con_t`; undefined points are written as NA.
void write_report_csv(std::ostream& out, const ConcordanceReport& report);

}  // namespace rocsurv
