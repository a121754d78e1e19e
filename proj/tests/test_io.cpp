#include "nbv/config.hpp"
#include "nbv/error.hpp"
#include "nbv/ply_io.hpp"
#include "nbv/rng.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace nbv;

TEST_CASE("PLY round trip keeps nine significant digits") {
  CounterRng rng(1);
  const auto cloud = oracle::cloud_of(oracle::random_points(rng, 500, 0.1));
  const auto dir = oracle::scratch_dir("ply");
  write_ply(dir / "a.ply", cloud);
  const auto back = read_ply(dir / "a.ply");
  REQUIRE(back.size() == cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      const double a = cloud.points[i][k], b = back.points[i][k];
      CHECK(std::abs(a - b) <= 1e-8 * std::max(1.0, std::abs(a)));
    }
  }
  // a second pass is a fixed point
  CHECK(format_ply(read_ply(dir / "a.ply")) == read_text_file(dir / "a.ply"));

  write_ply(dir / "empty.ply", PointCloud{});
  CHECK(read_ply(dir / "empty.ply").empty());
}

TEST_CASE("PLY reader accepts extra properties and rejects bad input") {
  const auto dir = oracle::scratch_dir("ply_bad");
  write_text_file(dir / "extra.ply",
                  "ply\r\nformat ascii 1.0\r\ncomment x\r\nelement vertex 2\r\nproperty float x\r\nproperty float y\r\n"
                  "property float z\r\nproperty uchar red\r\nend_header\r\n1 2 3 255\r\n4 5 6 0\r\n");
  const auto c = read_ply(dir / "extra.ply");
  REQUIRE(c.size() == 2);
  CHECK(c.points[1] == Point3(4, 5, 6));

  const std::string header = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  write_text_file(dir / "short.ply", header + "1 2 3\n");
  CHECK_THROWS_AS(read_ply(dir / "short.ply"), IoError);
  write_text_file(dir / "nan.ply", header + "1 2 3\nnan 0 0\n");
  CHECK_THROWS_AS(read_ply(dir / "nan.ply"), IoError);
  write_text_file(dir / "bin.ply", "ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n");
  CHECK_THROWS_AS(read_ply(dir / "bin.ply"), IoError);
  write_text_file(dir / "magic.ply", "off\n");
  CHECK_THROWS_AS(read_ply(dir / "magic.ply"), IoError);
  CHECK_THROWS_AS(read_ply(dir / "absent.ply"), IoError);
}

TEST_CASE("pose CSV round trip") {
  const ActionSpace space;
  std::vector<PoseRecord> poses;
  for (int v = 0; v < space.action_count(); v += 7) poses.push_back({v, ViewPose::from_ticks((v * 37) % 4096, (v * 11) % 2048, space)});
  const auto dir = oracle::scratch_dir("csv");
  write_pose_csv(dir / "p.csv", poses);
  const auto back = read_pose_csv(dir / "p.csv");
  REQUIRE(back.size() == poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    CHECK(back[i].view_id == poses[i].view_id);
    CHECK(back[i].pose == poses[i].pose);
  }
  CHECK(read_text_file(dir / "p.csv").rfind("view_id,yaw_ticks,pitch_ticks,yaw_bucket,pitch_bucket\n", 0) == 0);
  write_text_file(dir / "bad.csv", "a,b\n");
  CHECK_THROWS_AS(read_pose_csv(dir / "bad.csv"), IoError);
}

TEST_CASE("run config JSON round trip and validation") {
  const auto c = RunConfig::defaults();
  CHECK(c.objects.size() == 4);
  CHECK_FALSE(c.object("two_torus").train);
  CHECK_THROWS_AS(c.object("teapot"), InvalidParameter);

  const auto dir = oracle::scratch_dir("config");
  write_text_file(dir / "c.json", c.to_json());
  const auto back = RunConfig::load(dir / "c.json");
  // relative paths are resolved against the file, everything else is unchanged
  CHECK(back.data_dir == dir / "data");
  auto expected = c;
  expected.data_dir = back.data_dir;
  expected.model_path = back.model_path;
  expected.learning_curve_path = back.learning_curve_path;
  CHECK(back.to_json() == expected.to_json());

  write_text_file(dir / "partial.json", R"({"seed": 9, "train": {"cycles": 3}, "data_dir": "/abs"})");
  const auto p = RunConfig::load(dir / "partial.json");
  CHECK(p.seed == 9);
  CHECK(p.train.cycles == 3);
  CHECK(p.train.batch_size == 64);
  CHECK(p.data_dir == "/abs");
  CHECK(p.objects.size() == 4);

  write_text_file(dir / "broken.json", "{");
  CHECK_THROWS_AS(RunConfig::load(dir / "broken.json"), IoError);
  write_text_file(dir / "invalid.json", R"({"orbit_radius": -1})");
  CHECK_THROWS_AS(RunConfig::load(dir / "invalid.json"), InvalidParameter);
  write_text_file(dir / "kind.json", R"({"objects": [{"name": "x", "kind": "teapot"}]})");
  CHECK_THROWS_AS(RunConfig::load(dir / "kind.json"), InvalidParameter);
}

TEST_CASE("atomic text writes replace the whole file") {
  const auto dir = oracle::scratch_dir("text");
  write_text_file(dir / "t.txt", std::string(10000, 'a'));
  write_text_file(dir / "t.txt", "b");
  CHECK(read_text_file(dir / "t.txt") == "b");
  write_text_file(dir / "nested" / "deeper" / "t.txt", "c");
  CHECK(read_text_file(dir / "nested" / "deeper" / "t.txt") == "c");
}
