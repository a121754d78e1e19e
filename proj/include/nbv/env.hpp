#pragma once

#include "nbv/dataset.hpp"
#include "nbv/geometry.hpp"
#include "nbv/metric.hpp"
#include "nbv/registration.hpp"
#include "nbv/tda.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace nbv {

/// index = yaw_bucket * pitch_buckets + pitch_bucket
int action_index(int yaw_bucket, int pitch_bucket, const ActionSpace& space);
std::pair<int, int> decompose_action(int index, const ActionSpace& space);
ViewPose action_pose(int index, const ActionSpace& space);

inline constexpr double kBettiFeatureScale = 0.01;

/// [b0(r1), b1(r1), ..., b0(rn), b1(rn), yaw_norm, pitch_norm] with Betti
/// counts scaled by 1/100.
struct Observation {
  std::vector<double> features;
};

std::size_t observation_size(std::size_t radius_count);
Observation build_observation(const FiltrationProfile& profile, const ViewPose& pose, const ActionSpace& space);

struct CacheEntry {
  FiltrationProfile profile;
  double value = 0.0;
};

/// Profiles and values of single views and unordered view pairs. Pair keys
/// are stored as (min, max); a view paired with itself is never stored.
class BettiCache {
public:
  using PairKey = std::pair<int, int>;

  static PairKey canonical(int a, int b) { return a < b ? PairKey{a, b} : PairKey{b, a}; }

  std::map<int, CacheEntry> singles;
  std::map<PairKey, CacheEntry> pairs;

  const CacheEntry& single(int view) const;
  const CacheEntry& pair(int a, int b) const;
  bool has_pair(int a, int b) const { return pairs.contains(canonical(a, b)); }

  /// One JSON object per line: singles by view id, then pairs by key.
  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

  /// Reads a cache file. A malformed final line (an interrupted append) is
  /// ignored; malformed lines elsewhere are errors.
  static BettiCache load(const std::filesystem::path& path);

  /// Throws if any stored value disagrees with the metric.
  void check_metric(const MetricConfig& metric) const;
};

std::string cache_line_single(int view, const CacheEntry& e);
std::string cache_line_pair(const BettiCache::PairKey& key, const CacheEntry& e);

/// Betti profile of one view as the cache stores it (voxel-deduplicated).
FiltrationProfile single_view_profile(const PointCloud& world_view, const MetricConfig& metric, double voxel);
/// Profile of the TUR merge of two world-frame views, lower id first.
FiltrationProfile pair_profile(const PointCloud& lower, const PointCloud& upper, const MetricConfig& metric,
                               const TurParams& tur);

struct PrecomputeOptions {
  int jobs = 1;
  /// Stop after this many new pair entries (for staged or interrupted runs).
  std::size_t max_new_pairs = static_cast<std::size_t>(-1);
  /// Pairs computed between appends to the file.
  std::size_t chunk_size = 512;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Fills the cache for every view and unordered view pair of a dataset,
/// resuming from the entries already in cache_path. The file ends up in the
/// canonical order of BettiCache::serialize regardless of interruptions or
/// the number of jobs.
BettiCache precompute_cache(const DatasetManifest& manifest, const MetricConfig& metric, const TurParams& tur,
                            const std::filesystem::path& cache_path, const PrecomputeOptions& options = {});

/// Records the cache keys an env_step reads.
struct CacheAccessLog {
  std::set<int> singles;
  std::set<BettiCache::PairKey> pairs;
};

/// Reward of moving from `initial` to the view selected by `action`:
/// V(pair(initial, action)) - V(initial), and 0 when they coincide.
double env_step(int initial, int action, const BettiCache& cache, CacheAccessLog* log = nullptr);

/// env_step for every action.
std::vector<double> reward_vector(int initial, int action_count, const BettiCache& cache,
                                  CacheAccessLog* log = nullptr);

}  // namespace nbv
