#pragma once

#include <memory>

#include "pnp/costs.hpp"
#include "pnp/robot.hpp"
#include "pnp/solver.hpp"

namespace pnp {

// Rectangular placement surface: footprint bounds in world xy, top at z.
struct SurfaceRect {
  double x_min = -0.5, x_max = 0.5;
  double y_min = -0.5, y_max = 0.5;
  double z = 0.0;

  bool degenerate() const { return !(x_min < x_max && y_min < y_max); }
};

struct PlannerSettings {
  SolverSettings solver;
  int restarts_grasp = 4;       // prior samples tried
  int restarts_place = 2;       // top place candidates per grasp
  int n_samples = 450;          // sampling baseline budget
  int refine_iters = 15;        // sampling baseline local refinement
  double margin = 0.005;        // collision margin epsilon, m
  double sdf_spacing = 0.01;
  double sdf_truncation = 0.08;
  double query_spacing = 0.02;  // object subsample for collision queries
  double prior_cell = 0.02;     // init_place_prior mask resolution
  int prior_yaw_samples = 16;
  int ik_filter_budget = 32;    // candidates passed to the kinematic filter; 0 = skip
};

struct ProblemSpec {
  PointCloud grasp_object;      // Z_O, grasp-scene world frame
  PointCloud grasp_clutter;     // optional clutter around the grasp target
  PointCloud place_env;         // Z_E, place-scene world frame
  SurfaceRect surface;
  TaskParams task;
  std::shared_ptr<const GraspModel> grasp_model;
  SurrogateParams surrogate;    // drives the grasp prior
  ArmModel arm;
  GripperGeometry gripper;
  PlannerSettings settings;
};

// Whether the task's placement pose lives in SE(2).
bool planar_task(const TaskParams& task);

enum class SolveStatus { Converged, MaxIters, Infeasible };

struct ConstraintReport {
  double fk_grasp = 0.0;        // residual norms
  double fk_place = 0.0;
  double collide_grasp = 0.0;   // epsilon - min distance; <= 0 satisfied
  double collide_place_object = 0.0;
  double collide_place_robot = 0.0;
  double box_violation = 0.0;   // placement rect + joint limits, max overrun
  double max_violation() const;
};

struct Solution {
  SolveStatus status = SolveStatus::Infeasible;
  GraspConfig theta_g;
  PlacePose x_p;
  Eigen::VectorXd q_grasp;
  Eigen::VectorXd q_place;
  double objective = 0.0;       // alpha * H - ln F
  double grasp_score = 0.0;     // F
  double place_cost = 0.0;      // H (hard value)
  ConstraintReport residuals;
  int outer_iterations = 0;
  int inner_iterations = 0;
  int restart_index = -1;
  double wall_time = 0.0;       // seconds, informational only
};

// Shared per-problem scratch: SDFs, query set, object summary. Built once,
// immutable afterwards.
struct PreparedScene {
  TruncatedSdf grasp_sdf;
  TruncatedSdf place_sdf;
  ObjectSummary object;
  CollisionQuerySet query_set;  // object frame; robot part depends on theta_g
  Vec3 object_extents = Vec3::Zero();  // full AABB extents for the stack cost
  PointCloud env_for_cost;      // subsampled place cloud for cost contexts
  double rest_z = 0.0;          // centroid height when resting on the surface
};

PreparedScene prepare_scene(const ProblemSpec& spec);

// alpha * H(x_p) - ln F(theta_g) and its gradient over [x_p | theta_g].
struct ObjectiveEval {
  double value = 0.0;
  Eigen::VectorXd grad_xp;      // dof of the task
  GraspGrad grad_theta = GraspGrad::Zero();
  double grasp_score = 0.0;
  double place_cost = 0.0;      // solver-facing (soft for pack)
};

ObjectiveEval objective(const GraspConfig& theta_g, const PlacePose& x_p,
                        const ProblemSpec& spec, const PreparedScene& scene);

struct PlaceCandidate {
  PlacePose pose;
  double score = 0.0;           // task likelihood G
  Eigen::VectorXd q_seed;       // IK solution used by the feasibility filter
};

// Collision-free placement candidates from 2D mask cross-correlation, ranked
// by task likelihood, kinematics-filtered. Throws InfeasibleInitError when
// no cell admits the footprint.
struct InfeasibleInitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<PlaceCandidate> init_place_prior(const ProblemSpec& spec, const PreparedScene& scene,
                                             const GraspConfig& theta_g0);

Solution joint_solve(const ProblemSpec& spec, uint64_t seed);
Solution sequential_solve(const ProblemSpec& spec, uint64_t seed);
Solution sampling_solve(const ProblemSpec& spec, int n_samples, uint64_t seed);

// Variants over a caller-prepared scene, for sharing SDFs across methods or
// feeding incrementally updated ones.
Solution joint_solve(const ProblemSpec& spec, const PreparedScene& scene, uint64_t seed);
Solution sequential_solve(const ProblemSpec& spec, const PreparedScene& scene, uint64_t seed);
Solution sampling_solve(const ProblemSpec& spec, const PreparedScene& scene, int n_samples,
                        uint64_t seed);

ConstraintReport check_constraints(const Solution& sol, const ProblemSpec& spec,
                                   const PreparedScene& scene);

}  // namespace pnp
