#include "pnp/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pnp {

double wrap_angle(double theta) {
  double t = std::fmod(theta + M_PI, 2.0 * M_PI);
  if (t <= 0.0) t += 2.0 * M_PI;
  return t - M_PI;
}

Mat3 skew(const Vec3& w) {
  Mat3 S;
  S << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return S;
}

Mat3 exp_so3(const Vec3& w) {
  double th = w.norm();
  if (th < 1e-12) return Mat3::Identity() + skew(w);
  Mat3 S = skew(w / th);
  return Mat3::Identity() + std::sin(th) * S + (1.0 - std::cos(th)) * S * S;
}

Vec3 log_so3(const Mat3& R) {
  double c = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
  double th = std::acos(c);
  if (th < 1e-10) {
    return 0.5 * Vec3(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  }
  if (th > M_PI - 1e-6) {
    // Near pi the antisymmetric part vanishes; recover axis from R + I.
    Mat3 B = 0.5 * (R + Mat3::Identity());
    Vec3 axis = B.diagonal().cwiseMax(0.0).cwiseSqrt();
    int k;
    B.diagonal().maxCoeff(&k);
    if (axis[k] > 0) {
      for (int i = 0; i < 3; ++i)
        if (i != k) axis[i] = B(k, i) / axis[k] * ((axis[i] < 0) ? -1.0 : 1.0);
    }
    axis.normalize();
    // Fix overall sign from the off-diagonal antisymmetric residue.
    Vec3 v(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    if (axis.dot(v) < 0) axis = -axis;
    return th * axis;
  }
  return th / (2.0 * std::sin(th)) * Vec3(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
}

Mat3 left_jacobian_so3(const Vec3& w) {
  double th = w.norm();
  if (th < 1e-8) return Mat3::Identity() + 0.5 * skew(w);
  Mat3 S = skew(w);
  double th2 = th * th;
  return Mat3::Identity() + (1.0 - std::cos(th)) / th2 * S + (th - std::sin(th)) / (th2 * th) * S * S;
}

Mat3 inv_left_jacobian_so3(const Vec3& w) {
  double th = w.norm();
  if (th < 1e-8) return Mat3::Identity() - 0.5 * skew(w);
  Mat3 S = skew(w);
  double half = 0.5 * th;
  double cot = 1.0 / std::tan(half);
  return Mat3::Identity() - 0.5 * S + (1.0 - half * cot) / (th * th) * S * S;
}

Pose2 Pose2::compose(const Pose2& rhs) const {
  double c = std::cos(theta), s = std::sin(theta);
  return Pose2(x + c * rhs.x - s * rhs.y, y + s * rhs.x + c * rhs.y, theta + rhs.theta);
}

Pose2 Pose2::inverse() const {
  double c = std::cos(theta), s = std::sin(theta);
  return Pose2(-(c * x + s * y), -(-s * x + c * y), -theta);
}

Vec2 Pose2::apply(const Vec2& p) const {
  double c = std::cos(theta), s = std::sin(theta);
  return Vec2(x + c * p.x() - s * p.y(), y + s * p.x() + c * p.y());
}

Pose3::Pose3(const Vec3& t_, const Quat& q_) : t(t_), q(q_.normalized()) {
  if (q.w() < 0) q.coeffs() = -q.coeffs();
}

Pose3 Pose3::from_matrix(const Vec3& t_, const Mat3& R) { return Pose3(t_, Quat(R)); }

Pose3 Pose3::compose(const Pose3& rhs) const { return Pose3(t + q * rhs.t, q * rhs.q); }

Pose3 Pose3::inverse() const {
  Quat qi = q.conjugate();
  return Pose3(qi * (-t), qi);
}

std::array<int, 3> OccupancyGrid::cell_of(const Vec3& p) const {
  std::array<int, 3> idx;
  for (int a = 0; a < 3; ++a) {
    double u = (p[a] - origin[a]) / spacing;
    // Tolerate FP jitter at cell boundaries; deterministic for a given input.
    int i = static_cast<int>(std::floor(u + 1e-9));
    // Max-boundary points belong to the last cell.
    if (i == dims[a] && std::abs(u - dims[a]) < 1e-12) i = dims[a] - 1;
    idx[a] = i;
  }
  return idx;
}

Eigen::Matrix3d homogeneous_2d(const Pose2& p) {
  double c = std::cos(p.theta), s = std::sin(p.theta);
  Eigen::Matrix3d T;
  T << c, -s, p.x, s, c, p.y, 0, 0, 1;
  return T;
}

Mat3 abs_rotation(const Pose3& p) { return p.rotation().cwiseAbs(); }

Mat3 abs_rotation_factored(const Pose3& p) {
  Vec3 e = p.rotation().eulerAngles(0, 1, 2);  // Rx(e0) Ry(e1) Rz(e2)
  Mat3 Rx = Eigen::AngleAxisd(e[0], Vec3::UnitX()).toRotationMatrix().cwiseAbs();
  Mat3 Ry = Eigen::AngleAxisd(e[1], Vec3::UnitY()).toRotationMatrix().cwiseAbs();
  Mat3 Rz = Eigen::AngleAxisd(e[2], Vec3::UnitZ()).toRotationMatrix().cwiseAbs();
  return Rx * Ry * Rz;
}

PointCloud transform_points(const Pose3& p, const PointCloud& c) {
  PointCloud out;
  out.frame = c.frame;
  out.points.reserve(c.points.size());
  Mat3 R = p.rotation();
  for (const auto& pt : c.points) out.points.push_back(R * pt + p.t);
  return out;
}

Box2 bounding_box_2d(const PointCloud& c) {
  if (c.empty()) throw EmptyInputError("bounding_box_2d: empty cloud");
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& p : c.points) {
    xmin = std::min(xmin, p.x());
    xmax = std::max(xmax, p.x());
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
  }
  Box2 b;
  b.length = xmax - xmin;
  b.width = ymax - ymin;
  b.center = Vec2(0.5 * (xmin + xmax), 0.5 * (ymin + ymax));
  return b;
}

Vec3 centroid(const PointCloud& c) {
  if (c.empty()) throw EmptyInputError("centroid: empty cloud");
  Vec3 sum = Vec3::Zero();
  for (const auto& p : c.points) sum += p;
  return sum / static_cast<double>(c.points.size());
}

OccupancyGrid voxelize(const PointCloud& c, double spacing, int padding) {
  if (c.empty()) throw EmptyInputError("voxelize: empty cloud");
  if (spacing <= 0.0) throw ParameterError("voxelize: spacing must be > 0");
  if (padding < 1) throw ParameterError("voxelize: padding must be >= 1");
  Vec3 lo = c.points.front(), hi = lo;
  for (const auto& p : c.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  OccupancyGrid g;
  g.spacing = spacing;
  for (int a = 0; a < 3; ++a) {
    int span = static_cast<int>(std::floor((hi[a] - lo[a]) / spacing)) + 1;
    g.dims[a] = span + 2 * padding;
    g.origin[a] = lo[a] - padding * spacing;
  }
  g.cells.assign(g.num_cells(), 0);
  for (const auto& p : c.points) {
    auto idx = g.cell_of(p);
    g.cells[g.index(idx[0], idx[1], idx[2])] = 1;
  }
  return g;
}

bool fuse_into_grid(OccupancyGrid& grid, const PointCloud& c) {
  if (c.empty()) throw EmptyInputError("fuse_into_grid: empty cloud");
  Vec3 lo = c.points.front(), hi = lo;
  for (const auto& p : c.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  // Grow the grid if the new points spill outside current bounds.
  std::array<int, 3> shift{0, 0, 0};
  std::array<int, 3> ndims = grid.dims;
  bool grow = false;
  for (int a = 0; a < 3; ++a) {
    int lo_i = static_cast<int>(std::floor((lo[a] - grid.origin[a]) / grid.spacing));
    int hi_i = static_cast<int>(std::floor((hi[a] - grid.origin[a]) / grid.spacing));
    if (lo_i < 0) {
      shift[a] = -lo_i + 1;
      grow = true;
    }
    ndims[a] += shift[a];
    if (hi_i + shift[a] >= ndims[a]) {
      ndims[a] = hi_i + shift[a] + 2;
      grow = true;
    }
  }
  if (grow) {
    OccupancyGrid ng;
    ng.spacing = grid.spacing;
    ng.dims = ndims;
    ng.origin = grid.origin - grid.spacing * Vec3(shift[0], shift[1], shift[2]);
    ng.cells.assign(ng.num_cells(), 0);
    for (int k = 0; k < grid.dims[2]; ++k)
      for (int j = 0; j < grid.dims[1]; ++j)
        for (int i = 0; i < grid.dims[0]; ++i)
          if (grid.occupied(i, j, k))
            ng.cells[ng.index(i + shift[0], j + shift[1], k + shift[2])] = 1;
    grid = std::move(ng);
  }
  bool changed = grow;
  for (const auto& p : c.points) {
    auto idx = grid.cell_of(p);
    if (!grid.in_bounds(idx[0], idx[1], idx[2])) continue;
    auto& cell = grid.cells[grid.index(idx[0], idx[1], idx[2])];
    if (!cell) {
      cell = 1;
      changed = true;
    }
  }
  return changed;
}

}  // namespace pnp
