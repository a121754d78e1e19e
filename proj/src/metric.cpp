#include "nbv/metric.hpp"

#include "nbv/error.hpp"

namespace nbv {

void MetricConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidParameter("alpha must lie in [0, 1]");
  validate_radii(radii);
}

double view_value(const FiltrationProfile& profile, const MetricConfig& config) {
  if (profile.entries.size() != config.radii.size()) {
    throw RadiiMismatch("profile has " + std::to_string(profile.entries.size()) + " radii, config has " +
                        std::to_string(config.radii.size()));
  }
  for (std::size_t i = 0; i < config.radii.size(); ++i) {
    if (profile.entries[i].radius != config.radii[i]) {
      throw RadiiMismatch("profile radius " + std::to_string(profile.entries[i].radius) +
                          " differs from configured " + std::to_string(config.radii[i]));
    }
  }
  return config.alpha * static_cast<double>(profile.betti1_sum()) -
         (1.0 - config.alpha) * static_cast<double>(profile.betti0_sum());
}

}  // namespace nbv
