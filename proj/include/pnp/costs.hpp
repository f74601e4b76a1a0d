#pragma once

#include "pnp/geom.hpp"

namespace pnp {

enum class CostKind { Target, Pack, Stack, Inline };

// Placement pose, SE(2) or SE(3) by task. Planar tasks keep the full pose
// but only (x, y, yaw) are free; z and tilt are fixed by the task.
struct PlacePose {
  bool planar = true;
  Pose3 pose;

  static PlacePose make_planar(const Pose2& p, double z = 0.0);
  static PlacePose make_spatial(const Pose3& p) { return {false, p}; }
  Pose2 as_planar() const;
  int dof() const { return planar ? 3 : 6; }
};

struct TaskParams {
  CostKind kind = CostKind::Target;
  double alpha = 1.0;           // cost-to-likelihood sharpness
  PlacePose target;             // target task
  Vec2 line_point = Vec2::Zero();  // inline
  double line_angle = 0.0;
  Vec3 stack_base = Vec3::Zero();  // stacking
  double lambda_c = 10.0;          // stack position tether weight
  double beta = 100.0;             // pack softmax temperature, 1/m
  Vec2 pack_reference = Vec2::Zero();
};

// Everything a cost may need besides the pose. The object cloud lives in the
// object (centroid) frame; the environment cloud in the world frame.
struct CostContext {
  PointCloud object;
  PointCloud environment;
  Vec3 object_extents = Vec3::Zero();  // full extents (L, W, H) in object frame
  TaskParams params;
};

struct CostEval {
  double value = 0.0;
  Eigen::VectorXd gradient;  // dim 3 planar (x, y, yaw) or 6 spatial (t, rot increment)
};

double likelihood_from_cost(double cost, double alpha);

CostEval cost_target(const PlacePose& x_p, const PlacePose& x_t);
CostEval cost_stack(const PlacePose& x_p, const Vec3& extents, const Vec3& stack_base,
                    double lambda_c, bool factored_abs = false);
CostEval cost_inline(const PlacePose& x_p, const Vec2& line_point, double line_angle);

struct PackEval {
  double value = 0.0;       // hard bounding-box extents (reported)
  double value_soft = 0.0;  // softmax extents, matches the gradient
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();
  double scene_area = 0.0;  // hard L_E * W_E after placing, for baselines
};

PackEval cost_pack(const PlacePose& x_p, const PointCloud& object, const PointCloud& environment,
                   const Vec2& reference, double beta);

// Dispatch on the task kind; value uses the hard variant where one exists.
CostEval placement_cost(const PlacePose& x_p, const CostContext& ctx);

// Area of the tight xy bounding box of environment u object placed at x_p.
double pack_footprint_area(const PlacePose& x_p, const PointCloud& object,
                           const PointCloud& environment);

}  // namespace pnp
