#include "nbv/ply_io.hpp"

#include "nbv/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace nbv {

namespace fs = std::filesystem;

void write_text_file(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError(path.parent_path().string(), ec.message());
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError(path.string(), "write failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError(path.string(), ec.message());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_ply(const PointCloud& cloud) {
  std::string out;
  out.reserve(64 + cloud.size() * 48);
  out += "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.size()) +
         "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  char line[96];
  for (const auto& p : cloud.points) {
    const int n = std::snprintf(line, sizeof line, "%.9g %.9g %.9g\n", p.x(), p.y(), p.z());
    out.append(line, static_cast<std::size_t>(n));
  }
  return out;
}

void write_ply(const fs::path& path, const PointCloud& cloud) {
  write_text_file(path, format_ply(cloud));
}

PointCloud read_ply(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  const auto fail = [&](const std::string& what) { throw IoError(path.string(), what); };

  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) fail("missing ply magic");

  std::size_t vertex_count = 0;
  bool in_vertex = false;
  bool ascii = false;
  std::vector<std::string> vertex_props;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "end_header") break;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
    } else if (word == "element") {
      std::string name;
      ls >> name;
      in_vertex = name == "vertex";
      if (in_vertex) ls >> vertex_count;
    } else if (word == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      vertex_props.push_back(name);
    }
  }
  if (!ascii) fail("only ascii PLY is supported");
  if (vertex_props.size() < 3 || vertex_props[0] != "x" || vertex_props[1] != "y" ||
      vertex_props[2] != "z") {
    fail("vertex element must start with x, y, z");
  }

  PointCloud cloud;
  cloud.points.reserve(vertex_count);
  for (std::size_t i = 0; i < vertex_count; ++i) {
    if (!std::getline(in, line)) fail("truncated vertex list");
    std::istringstream ls(line);
    double x, y, z;
    if (!(ls >> x >> y >> z)) fail("malformed vertex line " + std::to_string(i));
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
      fail("non-finite vertex " + std::to_string(i));
    }
    cloud.points.emplace_back(x, y, z);
  }
  return cloud;
}

void write_pose_csv(const fs::path& path, const std::vector<PoseRecord>& poses) {
  std::string out = "view_id,yaw_ticks,pitch_ticks,yaw_bucket,pitch_bucket\n";
  for (const auto& r : poses) {
    out += std::to_string(r.view_id) + ',' + std::to_string(r.pose.yaw_ticks) + ',' +
           std::to_string(r.pose.pitch_ticks) + ',' + std::to_string(r.pose.yaw_bucket) + ',' +
           std::to_string(r.pose.pitch_bucket) + '\n';
  }
  write_text_file(path, out);
}

std::vector<PoseRecord> read_pose_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::string line;
  if (!std::getline(in, line) || line.rfind("view_id,yaw_ticks,pitch_ticks,yaw_bucket,pitch_bucket", 0) != 0) {
    throw IoError(path.string(), "unexpected pose CSV header");
  }
  std::vector<PoseRecord> poses;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    PoseRecord r;
    char c1, c2, c3, c4;
    std::istringstream ls(line);
    if (!(ls >> r.view_id >> c1 >> r.pose.yaw_ticks >> c2 >> r.pose.pitch_ticks >> c3 >>
          r.pose.yaw_bucket >> c4 >> r.pose.pitch_bucket)) {
      throw IoError(path.string(), "malformed pose line: " + line);
    }
    poses.push_back(r);
  }
  return poses;
}

}  // namespace nbv
