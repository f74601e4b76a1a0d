#include "doctest.h"
#include "pnp/geom.hpp"

#include <random>

using namespace pnp;

namespace {

PointCloud random_cloud(std::mt19937_64& rng, size_t n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(0.0, scale);
  PointCloud c;
  for (size_t i = 0; i < n; ++i) c.points.push_back(Vec3(u(rng), u(rng), u(rng)));
  return c;
}

Pose3 random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec3 w(u(rng), u(rng), u(rng));
  return Pose3(Vec3(u(rng), u(rng), u(rng)), Quat(exp_so3(w)));
}

}  // namespace

TEST_CASE("homogeneous_2d basics") {
  CHECK(homogeneous_2d(Pose2()).isApprox(Eigen::Matrix3d::Identity()));

  auto T = homogeneous_2d(Pose2(1, 2, 0));
  CHECK(T(0, 2) == doctest::Approx(1.0));
  CHECK(T(1, 2) == doctest::Approx(2.0));
  CHECK(T.topLeftCorner<2, 2>().isApprox(Eigen::Matrix2d::Identity()));

  // quarter turn about the origin maps (1,0) to (0,1)
  auto R = homogeneous_2d(Pose2(0, 0, M_PI / 2));
  Eigen::Vector3d p = R * Eigen::Vector3d(1, 0, 1);
  CHECK(p.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p.y() == doctest::Approx(1.0));
}

TEST_CASE("homogeneous_2d composition identity") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    Pose2 p(u(rng), u(rng), u(rng));
    Pose2 q(u(rng), u(rng), u(rng));
    CHECK((homogeneous_2d(p) * homogeneous_2d(q) - homogeneous_2d(p.compose(q))).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("abs_rotation") {
  CHECK(abs_rotation(Pose3()).isApprox(Mat3::Identity()));

  Pose3 pz(Vec3::Zero(), Quat(Eigen::AngleAxisd(M_PI, Vec3::UnitZ())));
  CHECK(abs_rotation(pz).isApprox(Mat3::Identity(), 1e-12));

  Pose3 px(Vec3::Zero(), Quat(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitX())));
  Mat3 expected;
  expected << 1, 0, 0, 0, 0, 1, 0, 1, 0;  // |Rx(pi/2)|
  CHECK((abs_rotation(px) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("transform_points group action and inverse") {
  std::mt19937_64 rng(11);
  auto cloud = random_cloud(rng, 40);

  CHECK(transform_points(Pose3(), cloud).points[5].isApprox(cloud.points[5]));

  PointCloud single;
  single.points.push_back(Vec3::Zero());
  auto moved = transform_points(Pose3(Vec3(0, 0, 1), Quat::Identity()), single);
  CHECK(moved.points[0].isApprox(Vec3(0, 0, 1)));

  for (int trial = 0; trial < 20; ++trial) {
    Pose3 p1 = random_pose(rng), p2 = random_pose(rng);
    auto a = transform_points(p2, transform_points(p1, cloud));
    auto b = transform_points(p2.compose(p1), cloud);
    for (size_t i = 0; i < cloud.size(); ++i) CHECK((a.points[i] - b.points[i]).norm() < 1e-9);
    auto rt = transform_points(p1.inverse(), transform_points(p1, cloud));
    for (size_t i = 0; i < cloud.size(); ++i) CHECK((rt.points[i] - cloud.points[i]).norm() < 1e-9);
  }
}

TEST_CASE("bounding_box_2d") {
  PointCloud c;
  CHECK_THROWS_AS(bounding_box_2d(c), EmptyInputError);

  c.points.push_back(Vec3(1, 2, 3));
  auto b = bounding_box_2d(c);
  CHECK(b.length == 0.0);
  CHECK(b.width == 0.0);

  c.points.push_back(Vec3(0, 0, -5));
  c.points[0] = Vec3(2, 1, 9);
  b = bounding_box_2d(c);
  CHECK(b.length == doctest::Approx(2.0));
  CHECK(b.width == doctest::Approx(1.0));

  // translated copy grows the length by exactly the shift
  PointCloud c2 = c;
  for (auto p : c.points) c2.points.push_back(p + Vec3(3, 0, 0));
  CHECK(bounding_box_2d(c2).length == doctest::Approx(b.length + 3.0));

  // translation equivariance in the plane, invariance to z
  std::mt19937_64 rng(3);
  auto cloud = random_cloud(rng, 30);
  auto b0 = bounding_box_2d(cloud);
  PointCloud shifted = cloud;
  for (auto& p : shifted.points) p += Vec3(0.7, -0.3, 12.0);
  auto b1 = bounding_box_2d(shifted);
  CHECK(b1.length == doctest::Approx(b0.length));
  CHECK(b1.width == doctest::Approx(b0.width));
  CHECK((b1.center - (b0.center + Vec2(0.7, -0.3))).norm() < 1e-12);
}

TEST_CASE("centroid") {
  PointCloud c;
  CHECK_THROWS_AS(centroid(c), EmptyInputError);
  c.points.push_back(Vec3(1, -2, 3));
  CHECK(centroid(c).isApprox(Vec3(1, -2, 3)));
  c.points.push_back(Vec3(3, -2, 3));
  c.points[0] = Vec3(1, -2, 3);
  CHECK(centroid(c).x() == doctest::Approx(2.0));

  std::mt19937_64 rng(1);
  auto cloud = random_cloud(rng, 1000);
  CHECK((centroid(cloud) - Vec3(0.5, 0.5, 0.5)).norm() < 0.05);
}

TEST_CASE("voxelize") {
  PointCloud c;
  CHECK_THROWS_AS(voxelize(c, 0.01, 2), EmptyInputError);
  c.points.push_back(Vec3(0.1, 0.2, 0.3));
  CHECK_THROWS_AS(voxelize(c, -1.0, 2), ParameterError);

  auto g = voxelize(c, 0.01, 2);
  CHECK(g.dims == std::array<int, 3>{5, 5, 5});
  int occ = 0;
  for (auto v : g.cells) occ += v;
  CHECK(occ == 1);
  CHECK(g.occupied(2, 2, 2));

  // two points in the same cell: still one occupied cell
  c.points.push_back(Vec3(0.1001, 0.2001, 0.3001));
  g = voxelize(c, 0.01, 2);
  occ = 0;
  for (auto v : g.cells) occ += v;
  CHECK(occ == 1);

  // 10 cells apart along x
  PointCloud two;
  two.points.push_back(Vec3(0, 0, 0));
  two.points.push_back(Vec3(0.1, 0, 0));
  g = voxelize(two, 0.01, 1);
  auto a = g.cell_of(two.points[0]);
  auto b = g.cell_of(two.points[1]);
  CHECK(b[0] - a[0] == 10);
  CHECK(g.occupied(a[0], a[1], a[2]));
  CHECK(g.occupied(b[0], b[1], b[2]));
}

TEST_CASE("voxelize centers stay near inputs") {
  std::mt19937_64 rng(17);
  auto cloud = random_cloud(rng, 200, 0.3);
  double spacing = 0.02;
  auto g = voxelize(cloud, spacing, 2);
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        if (!g.occupied(i, j, k)) continue;
        Vec3 c = g.cell_center(i, j, k);
        double best = 1e9;
        for (const auto& p : cloud.points) best = std::min(best, (p - c).norm());
        CHECK(best <= spacing * std::sqrt(3.0) / 2.0 + 1e-12);
      }
}

TEST_CASE("pose invariants") {
  Pose2 p(0, 0, 3 * M_PI);
  CHECK(p.theta == doctest::Approx(M_PI));
  Pose3 q(Vec3::Zero(), Quat(-1, 0, 0, 0));
  CHECK(q.q.w() >= 0);
  CHECK(std::abs(q.q.norm() - 1.0) < 1e-9);
}
