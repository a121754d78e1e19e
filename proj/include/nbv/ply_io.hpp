#pragma once

#include "nbv/geometry.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace nbv {

/// ASCII PLY with float x, y, z vertices, 9 significant digits.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);
std::string format_ply(const PointCloud& cloud);

/// Reads ASCII PLY whose vertex element starts with x, y, z. Extra vertex
/// properties are skipped. Non-finite coordinates are rejected.
PointCloud read_ply(const std::filesystem::path& path);

struct PoseRecord {
  int view_id = 0;
  ViewPose pose;
};

/// CSV with header `view_id,yaw_ticks,pitch_ticks,yaw_bucket,pitch_bucket`.
void write_pose_csv(const std::filesystem::path& path, const std::vector<PoseRecord>& poses);
std::vector<PoseRecord> read_pose_csv(const std::filesystem::path& path);

/// Writes via a temporary sibling and rename, so readers never observe a
/// partially written file.
void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace nbv
