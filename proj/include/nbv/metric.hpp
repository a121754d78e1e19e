#pragma once

#include "nbv/tda.hpp"

#include <vector>

namespace nbv {

struct MetricConfig {
  double alpha = 0.15;
  std::vector<double> radii{0.002, 0.003, 0.004};

  void validate() const;
};

/// V = alpha * sum_r beta1(r) - (1 - alpha) * sum_r beta0(r).
/// Throws RadiiMismatch when the profile was computed at other radii.
double view_value(const FiltrationProfile& profile, const MetricConfig& config);

/// Gain of merging a new view into the previous cloud: V(prev ∪ new) - V(prev).
inline double reward(double v_prev, double v_union) { return v_union - v_prev; }

}  // namespace nbv
