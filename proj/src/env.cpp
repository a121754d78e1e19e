#include "nbv/env.hpp"

#include "nbv/error.hpp"

namespace nbv {

int action_index(int yaw_bucket, int pitch_bucket, const ActionSpace& space) {
  if (yaw_bucket < 0 || yaw_bucket >= space.yaw_buckets || pitch_bucket < 0 || pitch_bucket >= space.pitch_buckets) {
    throw IndexOutOfRange("bucket (" + std::to_string(yaw_bucket) + ", " + std::to_string(pitch_bucket) +
                          ") outside the action space");
  }
  return yaw_bucket * space.pitch_buckets + pitch_bucket;
}

std::pair<int, int> decompose_action(int index, const ActionSpace& space) {
  if (index < 0 || index >= space.action_count()) {
    throw IndexOutOfRange("action " + std::to_string(index) + " outside the action space");
  }
  return {index / space.pitch_buckets, index % space.pitch_buckets};
}

ViewPose action_pose(int index, const ActionSpace& space) {
  const auto [yaw, pitch] = decompose_action(index, space);
  return ViewPose::bucket_center(yaw, pitch, space);
}

std::size_t observation_size(std::size_t radius_count) { return 2 * radius_count + 2; }

Observation build_observation(const FiltrationProfile& profile, const ViewPose& pose, const ActionSpace& space) {
  Observation obs;
  obs.features.reserve(observation_size(profile.entries.size()));
  for (const auto& e : profile.entries) {
    obs.features.push_back(kBettiFeatureScale * static_cast<double>(e.betti0));
    obs.features.push_back(kBettiFeatureScale * static_cast<double>(e.betti1));
  }
  obs.features.push_back(static_cast<double>(pose.yaw_bucket) / space.yaw_buckets);
  obs.features.push_back(static_cast<double>(pose.pitch_bucket) / space.pitch_buckets);
  return obs;
}

double env_step(int initial, int action, const BettiCache& cache, CacheAccessLog* log) {
  if (action == initial) {
    cache.single(initial);  // still validates the id
    return 0.0;
  }
  const double v_prev = cache.single(initial).value;
  const double v_union = cache.pair(initial, action).value;
  if (log) {
    log->singles.insert(initial);
    log->pairs.insert(BettiCache::canonical(initial, action));
  }
  return reward(v_prev, v_union);
}

std::vector<double> reward_vector(int initial, int action_count, const BettiCache& cache, CacheAccessLog* log) {
  std::vector<double> rewards(static_cast<std::size_t>(action_count));
  for (int a = 0; a < action_count; ++a) rewards[static_cast<std::size_t>(a)] = env_step(initial, a, cache, log);
  return rewards;
}

}  // namespace nbv
