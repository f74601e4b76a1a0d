#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pnp {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Errors carry a category so callers can branch without string matching.
struct EmptyInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DegenerateGeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double wrap_angle(double theta);  // -> (-pi, pi]

// so3 helpers shared by poses, costs and the solver.
Mat3 skew(const Vec3& w);
Mat3 exp_so3(const Vec3& w);
Vec3 log_so3(const Mat3& R);
// Left Jacobian of exp: exp((w+dw)^) ~= exp((Jl(w)*dw)^) * exp(w^).
Mat3 left_jacobian_so3(const Vec3& w);
Mat3 inv_left_jacobian_so3(const Vec3& w);

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // normalized to (-pi, pi]

  Pose2() = default;
  Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}

  Pose2 compose(const Pose2& rhs) const;
  Pose2 inverse() const;
  Vec2 apply(const Vec2& p) const;
};

struct Pose3 {
  Vec3 t = Vec3::Zero();
  Quat q = Quat::Identity();  // unit, w >= 0

  Pose3() = default;
  Pose3(const Vec3& t_, const Quat& q_);
  static Pose3 identity() { return {}; }
  static Pose3 from_matrix(const Vec3& t_, const Mat3& R);

  Mat3 rotation() const { return q.toRotationMatrix(); }
  Pose3 compose(const Pose3& rhs) const;
  Pose3 inverse() const;
  Vec3 apply(const Vec3& p) const { return q * p + t; }
};

struct PointCloud {
  std::vector<Vec3> points;
  std::string frame = "world";

  size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct OccupancyGrid {
  Vec3 origin = Vec3::Zero();  // min corner of the voxel volume
  double spacing = 0.01;
  std::array<int, 3> dims{0, 0, 0};
  std::vector<uint8_t> cells;  // x fastest, then y, then z

  size_t index(int i, int j, int k) const {
    return static_cast<size_t>(i) +
           static_cast<size_t>(dims[0]) * (static_cast<size_t>(j) + static_cast<size_t>(dims[1]) * k);
  }
  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
  }
  bool occupied(int i, int j, int k) const { return cells[index(i, j, k)] != 0; }
  Vec3 cell_center(int i, int j, int k) const {
    return origin + spacing * Vec3(i + 0.5, j + 0.5, k + 0.5);
  }
  // Half-open cells [lo, hi); points exactly on the max boundary land in the last cell.
  std::array<int, 3> cell_of(const Vec3& p) const;
  size_t num_cells() const {
    return static_cast<size_t>(dims[0]) * dims[1] * dims[2];
  }
};

struct Box2 {
  double length = 0.0;  // extent along x
  double width = 0.0;   // extent along y
  Vec2 center = Vec2::Zero();
};

Eigen::Matrix3d homogeneous_2d(const Pose2& p);
Mat3 abs_rotation(const Pose3& p);
// Product of per-axis absolute factors |Rx||Ry||Rz| from the ZYX Euler split;
// kept behind this entry point, elementwise |R| is the default convention.
Mat3 abs_rotation_factored(const Pose3& p);

PointCloud transform_points(const Pose3& p, const PointCloud& c);
Box2 bounding_box_2d(const PointCloud& c);
Vec3 centroid(const PointCloud& c);
OccupancyGrid voxelize(const PointCloud& c, double spacing, int padding);
// Fuse additional points into an existing grid, growing bounds when needed.
// Returns true if any cell changed occupancy.
bool fuse_into_grid(OccupancyGrid& grid, const PointCloud& c);

}  // namespace pnp
