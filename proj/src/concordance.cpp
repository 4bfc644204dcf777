#include "rocsurv/concordance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "rocsurv/errors.hpp"

namespace rocsurv {

namespace {

struct Group {
  double hazard;
  double f;
  double s;
};

// Nodes with defined hazard and nonzero mass, merged by equal hazard, sorted ascending.
std::vector<Group> hazard_groups(std::span<const NodeValue> nodes) {
  std::vector<Group> items;
  items.reserve(nodes.size());
  for (const auto& node : nodes) {
    if (std::isnan(node.hazard)) continue;
    if (node.f == 0.0 && node.s == 0.0) continue;
    items.push_back({node.hazard, node.f, node.s});
  }
  std::stable_sort(items.begin(), items.end(),
                   [](const Group& a, const Group& b) { return a.hazard < b.hazard; });
  std::vector<Group> groups;
  for (const auto& item : items) {
    if (!groups.empty() && groups.back().hazard == item.hazard) {
      groups.back().f += item.f;
      groups.back().s += item.s;
    } else {
      groups.push_back(item);
    }
  }
  return groups;
}

}  // namespace

NodeValue NodeValue::from_estimates(double f, double s) {
  NodeValue v{0.0, f, s};
  if (s > 0.0) {
    v.hazard = f / s;
  } else if (f > 0.0) {
    v.hazard = std::numeric_limits<double>::infinity();
  }
  return v;
}

std::optional<double> con_t(std::span<const NodeValue> nodes) {
  const auto groups = hazard_groups(nodes);
  double f_total = 0.0;
  double s_total = 0.0;
  double numerator = 0.0;
  for (const auto& g : groups) {
    numerator += g.f * s_total + 0.5 * g.f * g.s;  // s_total so far = mass strictly below
    f_total += g.f;
    s_total += g.s;
  }
  const double denominator = f_total * s_total;
  if (!(denominator > 0.0)) return std::nullopt;
  return numerator / denominator;
}

std::optional<double> con_t_direct(std::span<const NodeValue> nodes) {
  double numerator = 0.0;
  double denominator = 0.0;
  for (const auto& a : nodes) {
    if (std::isnan(a.hazard)) continue;
    for (const auto& b : nodes) {
      if (std::isnan(b.hazard)) continue;
      const double mass = a.f * b.s;
      denominator += mass;
      if (a.hazard > b.hazard) {
        numerator += mass;
      } else if (a.hazard == b.hazard) {
        numerator += 0.5 * mass;
      }
    }
  }
  if (!(denominator > 0.0)) return std::nullopt;
  return numerator / denominator;
}

double RocStarCurve::operator()(double q) const {
  q = std::clamp(q, 0.0, 1.0);
  const auto it = std::upper_bound(fpr.begin(), fpr.end(), q);
  if (it == fpr.end()) return tpr.back();
  const auto j = static_cast<std::size_t>(it - fpr.begin());
  const double x0 = fpr[j - 1];
  const double x1 = fpr[j];
  if (x1 == x0) return tpr[j];
  return tpr[j - 1] + (tpr[j] - tpr[j - 1]) * (q - x0) / (x1 - x0);
}

double RocStarCurve::area() const {
  double area = 0.0;
  for (std::size_t j = 1; j < fpr.size(); ++j) {
    area += 0.5 * (fpr[j] - fpr[j - 1]) * (tpr[j] + tpr[j - 1]);
  }
  return area;
}

std::optional<RocStarCurve> roc_star(std::span<const NodeValue> nodes) {
  auto groups = hazard_groups(nodes);
  double f_total = 0.0;
  double s_total = 0.0;
  for (const auto& g : groups) {
    f_total += g.f;
    s_total += g.s;
  }
  if (!(f_total * s_total > 0.0)) return std::nullopt;
  RocStarCurve curve;
  curve.fpr.push_back(0.0);
  curve.tpr.push_back(0.0);
  double f_cum = 0.0;
  double s_cum = 0.0;
  for (auto it = groups.rbegin(); it != groups.rend(); ++it) {
    f_cum += it->f;
    s_cum += it->s;
    curve.fpr.push_back(s_cum / s_total);
    curve.tpr.push_back(f_cum / f_total);
  }
  curve.fpr.back() = 1.0;
  curve.tpr.back() = 1.0;
  return curve;
}

ConcordanceReport icon(const std::vector<std::vector<NodeValue>>& per_time, const TimeGrid& grid) {
  if (per_time.size() != grid.size()) throw NumericError("node values do not match the grid");
  ConcordanceReport report;
  report.times = grid.times;
  report.weights = grid.weights;
  report.con.resize(grid.size());
  double weighted = 0.0;
  double weight_total = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    report.con[k] = con_t(per_time[k]);
    if (report.con[k]) {
      weighted += grid.weights[k] * *report.con[k];
      weight_total += grid.weights[k];
    }
  }
  if (!(weight_total > 0.0)) throw NumericError("concordance undefined at every grid time");
  report.icon = weighted / weight_total;
  return report;
}

ConcordanceReport icon(std::span<const NodeHazardCurve> curves, const TimeGrid& grid) {
  std::vector<std::vector<NodeValue>> per_time(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    for (const auto& curve : curves) {
      NodeValue v = NodeValue::from_estimates(curve.f_star[k], curve.s_star[k]);
      per_time[k].push_back(v);
    }
  }
  return icon(per_time, grid);
}

double delta_icon(std::span<const double> parent_f, std::span<const double> parent_s,
                  std::span<const double> left_f, std::span<const double> left_s,
                  std::span<const double> right_f, std::span<const double> right_s,
                  std::span<const double> weights) {
  double total = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double denominator = parent_f[k] * parent_s[k];
    if (!(denominator > 0.0)) continue;
    total += weights[k] * std::abs(left_f[k] * right_s[k] - right_f[k] * left_s[k]) / denominator;
  }
  return total;
}

ConIncrement::ConIncrement(std::span<const NodeValue> others) {
  for (const auto& g : hazard_groups(others)) {
    f_below_.push_back(f_total_);
    s_below_.push_back(s_total_);
    numerator_ += g.f * s_total_ + 0.5 * g.f * g.s;
    hazard_.push_back(g.hazard);
    f_.push_back(g.f);
    s_.push_back(g.s);
    f_total_ += g.f;
    s_total_ += g.s;
  }
}

std::optional<double> ConIncrement::con_with(std::span<const NodeValue> extra) const {
  double numerator = numerator_;
  double f_total = f_total_;
  double s_total = s_total_;
  for (const auto& x : extra) {
    if (std::isnan(x.hazard)) continue;
    const auto it = std::lower_bound(hazard_.begin(), hazard_.end(), x.hazard);
    const auto g = static_cast<std::size_t>(it - hazard_.begin());
    const bool tie = it != hazard_.end() && *it == x.hazard;
    const double s_below = g < s_below_.size() ? s_below_[g] : s_total_;
    const double f_below = g < f_below_.size() ? f_below_[g] : f_total_;
    const double s_tie = tie ? s_[g] : 0.0;
    const double f_tie = tie ? f_[g] : 0.0;
    const double f_above = f_total_ - f_below - f_tie;
    numerator += x.f * (s_below + 0.5 * s_tie) + x.s * (f_above + 0.5 * f_tie);
    f_total += x.f;
    s_total += x.s;
  }
  for (const auto& a : extra) {
    if (std::isnan(a.hazard)) continue;
    for (const auto& b : extra) {
      if (std::isnan(b.hazard)) continue;
      if (a.hazard > b.hazard) {
        numerator += a.f * b.s;
      } else if (a.hazard == b.hazard) {
        numerator += 0.5 * a.f * b.s;
      }
    }
  }
  const double denominator = f_total * s_total;
  if (!(denominator > 0.0)) return std::nullopt;
  return numerator / denominator;
}

std::optional<double> pairwise_con_t(std::span<const Scored> cases,
                                     std::span<const Scored> controls) {
  std::vector<Scored> sorted(controls.begin(), controls.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const Scored& a, const Scored& b) { return a.score < b.score; });
  std::vector<double> prefix(sorted.size() + 1, 0.0);
  for (std::size_t j = 0; j < sorted.size(); ++j) prefix[j + 1] = prefix[j] + sorted[j].weight;
  const double control_total = prefix.back();
  double case_total = 0.0;
  double numerator = 0.0;
  for (const auto& c : cases) {
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), c.score,
                                     [](const Scored& s, double v) { return s.score < v; });
    const auto hi = std::upper_bound(sorted.begin(), sorted.end(), c.score,
                                     [](double v, const Scored& s) { return v < s.score; });
    const double below = prefix[lo - sorted.begin()];
    const double equal = prefix[hi - sorted.begin()] - below;
    numerator += c.weight * (below + 0.5 * equal);
    case_total += c.weight;
  }
  const double denominator = case_total * control_total;
  if (!(denominator > 0.0)) return std::nullopt;
  return numerator / denominator;
}

void write_report_csv(std::ostream& out, const ConcordanceReport& report) {
  out.precision(17);
  out << "t,weight,con_t\n";
  for (std::size_t k = 0; k < report.times.size(); ++k) {
    out << report.times[k] << ',' << report.weights[k] << ',';
    if (report.con[k]) {
      out << *report.con[k];
    } else {
      out << "NA";
    }
    out << '\n';
  }
}

}  // namespace rocsurv
