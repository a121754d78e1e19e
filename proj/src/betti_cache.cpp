#include "nbv/env.hpp"

#include "nbv/error.hpp"
#include "nbv/ply_io.hpp"

#include <json.hpp>

#include <exception>
#include <fstream>
#include <sstream>

namespace nbv {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

json entry_json(const std::string& key, const CacheEntry& e) {
  json j;
  j["key"] = key;
  j["radii"] = json::array();
  j["betti0"] = json::array();
  j["betti1"] = json::array();
  for (const auto& f : e.profile.entries) {
    j["radii"].push_back(f.radius);
    j["betti0"].push_back(f.betti0);
    j["betti1"].push_back(f.betti1);
  }
  j["value"] = e.value;
  return j;
}

CacheEntry entry_from_json(const json& j) {
  CacheEntry e;
  const auto& r = j.at("radii");
  const auto& b0 = j.at("betti0");
  const auto& b1 = j.at("betti1");
  if (r.size() != b0.size() || r.size() != b1.size()) throw InvalidParameter("cache entry arrays differ in length");
  for (std::size_t i = 0; i < r.size(); ++i) {
    e.profile.entries.push_back({r[i].get<double>(), b0[i].get<std::int64_t>(), b1[i].get<std::int64_t>()});
  }
  e.value = j.at("value").get<double>();
  return e;
}

/// Parses "s:12" or "p:3:17".
void insert_line(BettiCache& cache, const std::string& line) {
  const json j = json::parse(line);
  const std::string key = j.at("key").get<std::string>();
  CacheEntry entry = entry_from_json(j);
  if (key.rfind("s:", 0) == 0) {
    cache.singles[std::stoi(key.substr(2))] = std::move(entry);
    return;
  }
  if (key.rfind("p:", 0) == 0) {
    const auto colon = key.find(':', 2);
    if (colon == std::string::npos) throw InvalidParameter("bad pair key " + key);
    const int a = std::stoi(key.substr(2, colon - 2));
    const int b = std::stoi(key.substr(colon + 1));
    if (!(a < b)) throw InvalidParameter("pair key not canonical: " + key);
    cache.pairs[{a, b}] = std::move(entry);
    return;
  }
  throw InvalidParameter("unknown cache key " + key);
}

}  // namespace

std::string cache_line_single(int view, const CacheEntry& e) {
  return entry_json("s:" + std::to_string(view), e).dump();
}

std::string cache_line_pair(const BettiCache::PairKey& key, const CacheEntry& e) {
  return entry_json("p:" + std::to_string(key.first) + ":" + std::to_string(key.second), e).dump();
}

const CacheEntry& BettiCache::single(int view) const {
  const auto it = singles.find(view);
  if (it == singles.end()) throw MissingCacheEntry("no cache entry s:" + std::to_string(view));
  return it->second;
}

const CacheEntry& BettiCache::pair(int a, int b) const {
  const auto key = canonical(a, b);
  const auto it = pairs.find(key);
  if (it == pairs.end()) {
    throw MissingCacheEntry("no cache entry p:" + std::to_string(key.first) + ":" + std::to_string(key.second));
  }
  return it->second;
}

std::string BettiCache::serialize() const {
  std::string out;
  for (const auto& [view, e] : singles) out += cache_line_single(view, e) + '\n';
  for (const auto& [key, e] : pairs) out += cache_line_pair(key, e) + '\n';
  return out;
}

void BettiCache::save(const fs::path& path) const { write_text_file(path, serialize()); }

BettiCache BettiCache::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open cache");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(std::move(line));
  }
  BettiCache cache;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      insert_line(cache, lines[i]);
    } catch (const std::exception& e) {
      if (i + 1 == lines.size()) break;  // torn final append
      throw IoError(path.string(), "line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return cache;
}

void BettiCache::check_metric(const MetricConfig& metric) const {
  const auto check = [&](const std::string& key, const CacheEntry& e) {
    double v = 0.0;
    try {
      v = view_value(e.profile, metric);
    } catch (const RadiiMismatch& err) {
      throw RadiiMismatch("cache entry " + key + ": " + err.what());
    }
    if (v != e.value) throw InvalidParameter("cache entry " + key + " was built with a different alpha");
  };
  for (const auto& [view, e] : singles) check("s:" + std::to_string(view), e);
  for (const auto& [key, e] : pairs) check("p:" + std::to_string(key.first) + ":" + std::to_string(key.second), e);
}

FiltrationProfile single_view_profile(const PointCloud& world_view, const MetricConfig& metric, double voxel) {
  return filtration_profile(voxel_dedup(world_view, voxel), metric.radii);
}

FiltrationProfile pair_profile(const PointCloud& lower, const PointCloud& upper, const MetricConfig& metric,
                               const TurParams& tur) {
  const std::vector<PointCloud> views{lower, upper};
  return filtration_profile(tur_merge_world(views, tur).merged, metric.radii);
}

BettiCache precompute_cache(const DatasetManifest& manifest, const MetricConfig& metric, const TurParams& tur,
                            const fs::path& cache_path, const PrecomputeOptions& options) {
  metric.validate();
  BettiCache cache;
  if (fs::exists(cache_path)) {
    cache = BettiCache::load(cache_path);
    cache.check_metric(metric);
  }

  std::vector<int> ids;
  for (const auto& v : manifest.views) ids.push_back(v.view_id);
  std::vector<PointCloud> views(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) views[i] = load_view(manifest, ids[i]);

  const int jobs = std::max(1, options.jobs);

  // singles
  std::vector<std::size_t> missing_singles;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!cache.singles.contains(ids[i])) missing_singles.push_back(i);
  }
  {
    std::vector<CacheEntry> computed(missing_singles.size());
    std::vector<std::exception_ptr> errors(missing_singles.size());
    const auto count = static_cast<std::int64_t>(missing_singles.size());
#pragma omp parallel for num_threads(jobs) schedule(dynamic, 1)
    for (std::int64_t m = 0; m < count; ++m) {
      try {
        const std::size_t i = missing_singles[m];
        computed[m].profile = single_view_profile(views[i], metric, tur.voxel);
        computed[m].value = view_value(computed[m].profile, metric);
      } catch (...) {
        errors[m] = std::current_exception();
      }
    }
    for (std::size_t m = 0; m < missing_singles.size(); ++m) {
      if (errors[m]) {
        try {
          std::rethrow_exception(errors[m]);
        } catch (const std::exception& e) {
          throw Error("s:" + std::to_string(ids[missing_singles[m]]) + ": " + e.what());
        }
      }
      cache.singles[ids[missing_singles[m]]] = std::move(computed[m]);
    }
  }
  cache.save(cache_path);

  // pairs
  std::vector<std::pair<std::size_t, std::size_t>> missing_pairs;
  for (std::size_t a = 0; a < ids.size(); ++a) {
    for (std::size_t b = a + 1; b < ids.size(); ++b) {
      if (!cache.has_pair(ids[a], ids[b])) missing_pairs.emplace_back(a, b);
    }
  }
  if (missing_pairs.size() > options.max_new_pairs) missing_pairs.resize(options.max_new_pairs);

  std::ofstream append(cache_path, std::ios::app);
  if (!append) throw IoError(cache_path.string(), "cannot append to cache");
  const std::size_t chunk = std::max<std::size_t>(1, options.chunk_size);
  for (std::size_t start = 0; start < missing_pairs.size(); start += chunk) {
    const std::size_t end = std::min(missing_pairs.size(), start + chunk);
    std::vector<CacheEntry> computed(end - start);
    std::vector<std::exception_ptr> errors(end - start);
    const auto count = static_cast<std::int64_t>(end - start);
#pragma omp parallel for num_threads(jobs) schedule(dynamic, 1)
    for (std::int64_t m = 0; m < count; ++m) {
      try {
        const auto [a, b] = missing_pairs[start + m];
        computed[m].profile = pair_profile(views[a], views[b], metric, tur);
        computed[m].value = view_value(computed[m].profile, metric);
      } catch (...) {
        errors[m] = std::current_exception();
      }
    }
    std::string lines;
    for (std::size_t m = 0; m < computed.size(); ++m) {
      const auto [a, b] = missing_pairs[start + m];
      const BettiCache::PairKey key{ids[a], ids[b]};
      if (errors[m]) {
        try {
          std::rethrow_exception(errors[m]);
        } catch (const std::exception& e) {
          throw Error("p:" + std::to_string(key.first) + ":" + std::to_string(key.second) + ": " + e.what());
        }
      }
      lines += cache_line_pair(key, computed[m]) + '\n';
      cache.pairs[key] = std::move(computed[m]);
    }
    append << lines << std::flush;
    if (!append) throw IoError(cache_path.string(), "append failed");
    if (options.progress) options.progress(end, missing_pairs.size());
  }
  append.close();
  cache.save(cache_path);
  return cache;
}

}  // namespace nbv
