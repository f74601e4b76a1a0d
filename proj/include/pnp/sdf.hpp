#pragma once

#include <iosfwd>
#include <optional>

#include "pnp/geom.hpp"

namespace pnp {

// Voxelized truncated signed distance field of the placement scene.
// Distances are exact Euclidean (cell-center to cell-center) to the nearest
// surface voxel, clamped to [-truncation, +truncation]. Sign is positive on
// free cells, zero on occupied surface cells, negative strictly inside.
struct TruncatedSdf {
  Vec3 origin = Vec3::Zero();
  double spacing = 0.01;
  std::array<int, 3> dims{0, 0, 0};
  double truncation = 0.08;
  std::vector<float> distance;       // per voxel, x fastest
  std::vector<float> gradient;       // 3 per voxel, interleaved
  OccupancyGrid source_occupancy;    // fused occupancy the field was built from

  size_t index(int i, int j, int k) const {
    return static_cast<size_t>(i) +
           static_cast<size_t>(dims[0]) * (static_cast<size_t>(j) + static_cast<size_t>(dims[1]) * k);
  }
  size_t num_cells() const {
    return static_cast<size_t>(dims[0]) * dims[1] * dims[2];
  }
  Vec3 cell_center(int i, int j, int k) const {
    return origin + spacing * Vec3(i + 0.5, j + 0.5, k + 0.5);
  }
};

// Points to check against the field, expressed in the object-placement frame.
// Robot entries are sphere centers; their radii are added to the required
// margin at query time (center-distance trick).
struct CollisionQuerySet {
  PointCloud object_points;
  PointCloud robot_points;
  std::vector<double> robot_radii;
};

struct SdfSample {
  double distance = 0.0;
  Vec3 gradient = Vec3::Zero();
};

struct SetQueryResult {
  double min_distance = 0.0;   // min over the transformed union (radii subtracted)
  double min_object = 0.0;     // per-set minima for separate constraint handling
  double min_robot = 0.0;
  Vec3 argmin_local = Vec3::Zero();   // pre-transform point attaining the min
  Vec3 argmin_world = Vec3::Zero();
  Vec3 argmin_gradient = Vec3::Zero();
  bool argmin_is_robot = false;
  // Argmin bookkeeping for the per-set gradients.
  Vec3 object_argmin_local = Vec3::Zero();
  Vec3 object_argmin_gradient = Vec3::Zero();
  Vec3 robot_argmin_local = Vec3::Zero();
  Vec3 robot_argmin_gradient = Vec3::Zero();
};

struct MarginResult {
  double residual = 0.0;                         // epsilon - min distance; <= 0 means satisfied
  Eigen::Matrix<double, 6, 1> grad_xp = Eigen::Matrix<double, 6, 1>::Zero();
  // Gradient is over (translation xyz, world-frame rotation increment xyz).
};

TruncatedSdf build_sdf(const OccupancyGrid& occ, double truncation);
// Serial per-cell brute force over the full seed list; reference for the
// binned parallel kernel, kept for testing and benchmarking.
TruncatedSdf build_sdf_serial(const OccupancyGrid& occ, double truncation);

void compute_gradients(TruncatedSdf& s);

SdfSample query(const TruncatedSdf& s, const Vec3& point);

SetQueryResult min_sdf_over_set(const TruncatedSdf& s, const Pose3& x_p, const CollisionQuerySet& q);
SetQueryResult min_sdf_over_set_serial(const TruncatedSdf& s, const Pose3& x_p, const CollisionQuerySet& q);

TruncatedSdf update_sdf(const TruncatedSdf& s, const PointCloud& placed_object, const Pose3& at);

// Union constraint of the augmented cloud: residual = epsilon - min sdf.
MarginResult collision_margin(const TruncatedSdf& s, const Pose3& x_p, const CollisionQuerySet& q,
                              double epsilon);
// Object and robot sets treated separately for more informative gradients.
std::pair<MarginResult, MarginResult> collision_margins_split(const TruncatedSdf& s, const Pose3& x_p,
                                                              const CollisionQuerySet& q, double epsilon);

void dump_tsdf(const TruncatedSdf& s, std::ostream& os);
TruncatedSdf load_tsdf(std::istream& is);

}  // namespace pnp
