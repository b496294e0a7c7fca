#include <doctest.h>

#include <fstream>
#include <random>

#include "mvdepth/config.hpp"
#include "mvdepth/scene_io.hpp"
#include "oracles.hpp"

using namespace mvdepth;

namespace {

void write_raw_pgm(const std::filesystem::path& p, const std::string& header,
                   const std::vector<unsigned>& raw16) {
  std::ofstream out(p, std::ios::binary);
  out << header;
  for (unsigned v : raw16) {
    out.put(static_cast<char>((v >> 8) & 0xff));
    out.put(static_cast<char>(v & 0xff));
  }
}

}  // namespace

TEST_CASE("all-zero samples read as an all-invalid image") {
  const auto dir = oracle::temp_dir("zero_pgm");
  write_raw_pgm(dir / "z.pgm", "P5\n# scale=0.5\n3 2\n65535\n", {0, 0, 0, 0, 0, 0});
  const DepthImage img = read_depth_image(dir / "z.pgm");
  CHECK(img.height() == 2);
  CHECK(img.width() == 3);
  CHECK(img.valid_count() == 0);
}

TEST_CASE("raw samples are multiplied by the header scale") {
  const auto dir = oracle::temp_dir("scale_pgm");
  write_raw_pgm(dir / "s.pgm", "P5\n# scale=0.1\n1 1\n65535\n", {1000});
  const DepthImage img = read_depth_image(dir / "s.pgm");
  REQUIRE(img.valid(0, 0));
  CHECK(img.value(0, 0) == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("malformed depth files are rejected") {
  const auto dir = oracle::temp_dir("bad_pgm");
  write_raw_pgm(dir / "noscale.pgm", "P5\n1 1\n65535\n", {5});
  CHECK_THROWS_WITH_AS(read_depth_image(dir / "noscale.pgm"), doctest::Contains("scale"),
                       std::runtime_error);
  write_raw_pgm(dir / "magic.pgm", "P2\n# scale=1\n1 1\n65535\n", {5});
  CHECK_THROWS(read_depth_image(dir / "magic.pgm"));
  write_raw_pgm(dir / "huge.pgm", "P5\n# scale=1\n100000 100000\n65535\n", {});
  CHECK_THROWS_WITH(read_depth_image(dir / "huge.pgm"), doctest::Contains("overflow"));
  write_raw_pgm(dir / "short.pgm", "P5\n# scale=1\n4 4\n65535\n", {1, 2});
  CHECK_THROWS_WITH(read_depth_image(dir / "short.pgm"), doctest::Contains("truncated"));
  write_raw_pgm(dir / "digits.pgm", "P5\n# scale=1\n1x 1\n65535\n", {1});
  CHECK_THROWS(read_depth_image(dir / "digits.pgm"));
  CHECK_THROWS(read_depth_image(dir / "missing.pgm"));
}

TEST_CASE("depth images round-trip within half the storage step") {
  const auto dir = oracle::temp_dir("roundtrip_pgm");
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> depth(0.5, 400.0);
  std::bernoulli_distribution hole(0.1);
  for (int trial = 0; trial < 10; ++trial) {
    DepthImage img(7 + trial, 13);
    for (int r = 0; r < img.height(); ++r)
      for (int c = 0; c < img.width(); ++c)
        if (!hole(rng)) img.set(r, c, depth(rng));
    const double scale = fitting_scale(img, 0.01);
    write_depth_image(img, dir / "img.pgm", scale);
    const DepthImage back = read_depth_image(dir / "img.pgm");
    REQUIRE(back.same_shape(img));
    for (int r = 0; r < img.height(); ++r)
      for (int c = 0; c < img.width(); ++c) {
        REQUIRE(back.valid(r, c) == img.valid(r, c));
        if (img.valid(r, c)) CHECK(std::abs(back.value(r, c) - img.value(r, c)) <= scale / 2 + 1e-12);
      }
  }
}

TEST_CASE("storage scale grows to fit deep images into 16 bits") {
  DepthImage img(1, 2);
  img.set(0, 0, 1000.0);
  img.set(0, 1, 3.0);
  const double s = fitting_scale(img, 0.01);
  CHECK(s >= 0.01);
  CHECK(1000.0 / s <= 65535.0);
  CHECK(std::fmod(s / 0.01, 1.0) == doctest::Approx(0.0));
  CHECK_THROWS(write_depth_image(img, oracle::temp_dir("toofine") / "x.pgm", 0.01));
}

TEST_CASE("negative depths are rejected") {
  DepthImage img(1, 1);
  CHECK_THROWS_AS(img.set(0, 0, -1.0), std::invalid_argument);
}

TEST_CASE("point clouds: empty, single point, and round trip") {
  const auto dir = oracle::temp_dir("ply");
  PointCloud empty;
  write_point_cloud(empty, dir / "empty.ply");
  CHECK(oracle::slurp(dir / "empty.ply").find("element vertex 0") != std::string::npos);
  CHECK(read_point_cloud(dir / "empty.ply").size() == 0);

  PointCloud one;
  one.points.emplace_back(1.5, -2.25, 3.0);
  write_point_cloud(one, dir / "one.ply");
  const PointCloud one_back = read_point_cloud(dir / "one.ply");
  REQUIRE(one_back.size() == 1);
  CHECK(one_back.points[0] == one.points[0]);
  CHECK(oracle::slurp(dir / "one.ply").find("1.5 -2.25 3") != std::string::npos);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 100.0);
  PointCloud cloud;
  for (int i = 0; i < 200; ++i) {
    cloud.points.emplace_back(g(rng), g(rng), g(rng));
    cloud.normals.push_back(Eigen::Vector3d(g(rng), g(rng), g(rng)).normalized());
  }
  write_point_cloud(cloud, dir / "cloud.ply");
  const PointCloud back = read_point_cloud(dir / "cloud.ply");
  REQUIRE(back.size() == cloud.size());
  REQUIRE(back.has_normals());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK((back.points[i] - cloud.points[i]).norm() <= 1e-6 * cloud.points[i].norm());
    CHECK((back.normals[i] - cloud.normals[i]).norm() <= 1e-12);
  }
}

TEST_CASE("non-unit normals are refused") {
  PointCloud c;
  c.points.emplace_back(0, 0, 1);
  c.normals.emplace_back(0, 0, 2);
  CHECK_THROWS(c.validate());
  CHECK_THROWS(write_point_cloud(c, oracle::temp_dir("badnormal") / "c.ply"));
}

TEST_CASE("rig survives a config round trip field for field") {
  RunConfig cfg;
  cfg.rig = CameraRig{512.25, 0.16, 255.5, 191.75, 512, 384};
  cfg.surface.base_depth = 5.0;
  cfg.surface.slope_u = 0.0;
  cfg.surface.slope_v = 0.0;
  cfg.surface.amplitude = 0.0;
  const RunConfig back = parse_run_config(to_json(cfg));
  CHECK(back.rig == cfg.rig);
}

TEST_CASE("rig and image validation") {
  CHECK_THROWS(CameraRig{0.0, 1.0, 0, 0, 4, 4}.validate());
  CHECK_THROWS(CameraRig{1.0, -1.0, 0, 0, 4, 4}.validate());
  CHECK_THROWS(CameraRig{1.0, 1.0, 0, 0, 0, 4}.validate());
  CHECK_NOTHROW(CameraRig{1.0, 0.0, 0, 0, 4, 4}.validate());
  DepthImage img(3, 5);
  CHECK_THROWS(img.check_matches(CameraRig{1.0, 1.0, 0, 0, 4, 3}));
  CHECK_NOTHROW(img.check_matches(CameraRig{1.0, 1.0, 0, 0, 5, 3}));
}
