#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rocsurv/survival_data.hpp"

namespace rocsurv {

/// Epanechnikov kernel K(x) = 0.75 (1 - x^2) on [-1, 1], scaled to K_h(d) = K(d/h)/h.
struct Kernel {
  double h = 1.0;

  static double profile(double x) { return (x > -1.0 && x < 1.0) ? 0.75 * (1.0 - x * x) : 0.0; }
  double operator()(double distance) const { return profile(distance / h) / h; }
};

inline double kernel_weight(const Kernel& kernel, double distance) { return kernel(distance); }

enum class BandwidthMode { global_fixed, node_adaptive };

/// Global h = t0/20 (t0 = 0.95 quantile of uncensored times), or per node
/// h = c * n_node^(-1/5) with c defaulting to s/8. Bandwidths are capped at s/2.
struct BandwidthPolicy {
  BandwidthMode mode = BandwidthMode::global_fixed;
  double global_h = 0.0;
  double c = 0.0;
  double horizon = 0.0;

  double bandwidth(double node_count) const;

  static BandwidthPolicy global(const Dataset& data);
  static BandwidthPolicy node_adaptive(const Dataset& data, std::optional<double> c = std::nullopt);
};

/// Boundary rule: evaluation times below h use h, above s - h use s - h.
/// Throws NumericError when s < 2h.
double boundary_clamp(double t, double h, double s);

/// f*(t, node) = (1/W) sum_i w_i K_h(t' - Y_i) Delta_i I(member at Y_i), W = sum_i w_i.
/// Empty `weights` means unit weights.
double estimate_f_star(const Dataset& data, std::span<const char> member_at_event,
                       const Kernel& kernel, double t, std::span<const double> weights = {});

/// S*(t, node) = (1/W) sum_i w_i I(member at t, Y_i >= t).
double estimate_S_star(const Dataset& data, std::span<const char> member_at_t, double t,
                       std::span<const double> weights = {});

struct NodeHazardCurve {
  std::vector<double> f_star;
  std::vector<double> s_star;
  std::vector<std::optional<double>> hazard;  // empty where S* = 0
  double bandwidth = 0.0;
};

using RegionTest = std::function<bool(std::span<const double>)>;

/// Node hazard on the grid of `data`: lambda = f*/S*, undefined where S* = 0.
/// Membership uses the transformed covariates at Y_i for f* and at t_k for S*.
NodeHazardCurve node_hazard(const TransformedDataset& data, const RegionTest& contains,
                            const BandwidthPolicy& policy, std::span<const double> weights = {});

/// Nonzero kernel weights K_h(t'_k - Y_i) for each uncensored subject i and grid index k.
struct KernelTable {
  struct Entry {
    std::uint32_t k;
    double weight;
  };
  std::vector<std::vector<Entry>> by_subject;  // empty for censored subjects
};

KernelTable kernel_table(const TransformedDataset& data, double h);

}  // namespace rocsurv
