#include "rocsurv/kernel_smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rocsurv/errors.hpp"

namespace rocsurv {

namespace {

double total_weight(const Dataset& data, std::span<const double> weights) {
  if (weights.empty()) return static_cast<double>(data.size());
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

double weight_of(std::span<const double> weights, std::size_t i) {
  return weights.empty() ? 1.0 : weights[i];
}

}  // namespace

double BandwidthPolicy::bandwidth(double node_count) const {
  double h = global_h;
  if (mode == BandwidthMode::node_adaptive) {
    h = node_count > 0.0 ? c * std::pow(node_count, -0.2) : horizon / 2.0;
  }
  return std::min(h, horizon / 2.0);
}

BandwidthPolicy BandwidthPolicy::global(const Dataset& data) {
  BandwidthPolicy policy;
  policy.mode = BandwidthMode::global_fixed;
  policy.horizon = data.horizon;
  policy.global_h = type1_quantile(sorted_uncensored_times(data), 0.95) / 20.0;
  policy.c = data.horizon / 8.0;
  if (!(policy.global_h > 0.0)) throw NumericError("bandwidth must be positive");
  return policy;
}

BandwidthPolicy BandwidthPolicy::node_adaptive(const Dataset& data, std::optional<double> c) {
  BandwidthPolicy policy = global(data);
  policy.mode = BandwidthMode::node_adaptive;
  policy.c = c ? *c : data.horizon / 8.0;
  if (!(policy.c > 0.0)) throw NumericError("bandwidth constant must be positive");
  return policy;
}

double boundary_clamp(double t, double h, double s) {
  if (s < 2.0 * h) throw NumericError("analysis window shorter than twice the bandwidth");
  return std::clamp(t, h, s - h);
}

double estimate_f_star(const Dataset& data, std::span<const char> member_at_event,
                       const Kernel& kernel, double t, std::span<const double> weights) {
  const double tc = boundary_clamp(t, kernel.h, data.horizon);
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data.subjects[i];
    if (!s.event || !member_at_event[i]) continue;
    sum += weight_of(weights, i) * kernel(tc - s.y);
  }
  return sum / total_weight(data, weights);
}

double estimate_S_star(const Dataset& data, std::span<const char> member_at_t, double t,
                       std::span<const double> weights) {
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.subjects[i].y >= t && member_at_t[i]) sum += weight_of(weights, i);
  }
  return sum / total_weight(data, weights);
}

NodeHazardCurve node_hazard(const TransformedDataset& data, const RegionTest& contains,
                            const BandwidthPolicy& policy, std::span<const double> weights) {
  const Dataset& raw = *data.source;
  const std::size_t n = raw.size();
  std::vector<char> at_event(n);
  double node_count = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    at_event[i] = contains(data.at_event.row(i)) ? 1 : 0;
    if (at_event[i]) node_count += weight_of(weights, i);
  }
  NodeHazardCurve curve;
  curve.bandwidth = policy.bandwidth(node_count);
  const Kernel kernel{curve.bandwidth};
  const std::size_t q = data.grid.size();
  curve.f_star.resize(q);
  curve.s_star.resize(q);
  curve.hazard.resize(q);
  std::vector<char> at_t(n);
  for (std::size_t k = 0; k < q; ++k) {
    std::fill(at_t.begin(), at_t.end(), 0);
    for (std::size_t r = 0; r < data.at_risk[k].size(); ++r) {
      at_t[data.at_risk[k][r]] = contains(data.grid_values[k].row(r)) ? 1 : 0;
    }
    const double t = data.grid.times[k];
    curve.f_star[k] = estimate_f_star(raw, at_event, kernel, t, weights);
    curve.s_star[k] = estimate_S_star(raw, at_t, t, weights);
    if (curve.s_star[k] > 0.0) curve.hazard[k] = curve.f_star[k] / curve.s_star[k];
  }
  return curve;
}

KernelTable kernel_table(const TransformedDataset& data, double h) {
  const Dataset& raw = *data.source;
  const Kernel kernel{h};
  std::vector<double> clamped;
  for (double t : data.grid.times) clamped.push_back(boundary_clamp(t, h, raw.horizon));
  KernelTable table;
  table.by_subject.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& s = raw.subjects[i];
    if (!s.event) continue;
    for (std::size_t k = 0; k < clamped.size(); ++k) {
      const double w = kernel(clamped[k] - s.y);
      if (w > 0.0) table.by_subject[i].push_back({static_cast<std::uint32_t>(k), w});
    }
  }
  return table;
}

}  // namespace rocsurv
