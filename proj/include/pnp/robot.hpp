#pragma once

#include <iosfwd>

#include "pnp/grasp.hpp"
#include "pnp/sdf.hpp"

namespace pnp {

// One revolute joint: a fixed transform from the previous joint frame,
// then rotation by q about `axis` (unit vector in the joint frame).
struct Joint {
  Vec3 axis = Vec3::UnitZ();
  Pose3 origin;
  double lo = -M_PI;
  double hi = M_PI;
};

struct ArmModel {
  Pose3 base;
  std::vector<Joint> joints;
  Pose3 tool;  // flange to palm

  int dof() const { return int(joints.size()); }
};

struct FkResult {
  Pose3 pose;
  Eigen::Matrix<double, 6, Eigen::Dynamic> jacobian;  // rows: (linear, angular), world frame
};

struct ResidualResult {
  Eigen::Matrix<double, 6, 1> residual;  // (position error, world rotation log error)
  Eigen::Matrix<double, 6, Eigen::Dynamic> jacobian;
};

Pose3 fk(const ArmModel& arm, const Eigen::VectorXd& q);
FkResult fk_jacobian(const ArmModel& arm, const Eigen::VectorXd& q);
ResidualResult fk_residual(const ArmModel& arm, const Eigen::VectorXd& q, const Pose3& target);
Eigen::VectorXd clamp_joints(const ArmModel& arm, const Eigen::VectorXd& q);

// Damped-least-squares IK toward `target`, joint limits enforced by clamping.
struct IkResult {
  Eigen::VectorXd q;
  double residual_norm = 0.0;
  int iterations = 0;
};
IkResult ik_dls(const ArmModel& arm, const Pose3& target, const Eigen::VectorXd& q0,
                int max_iters = 100, double damping = 1e-3);

struct GripperGeometry {
  std::vector<Vec3> centers;  // palm frame
  std::vector<double> radii;
};

// Object points voxel-downsampled at `spacing` and expressed in the object
// (centroid) frame; gripper sphere centers posed by the palm pose relative to
// that frame, radii carried so the SDF query subtracts them.
CollisionQuerySet augment_object_cloud(const PointCloud& z_o, const GraspConfig& theta_g,
                                       const GripperGeometry& gripper, double spacing = 0.01);

// Bundled models. The planar arm is the two-link (lengths 1, 1) test chain;
// the default arm is a 7-joint desk-scale chain.
ArmModel planar_test_arm();
ArmModel default_arm();
GripperGeometry default_gripper();

// Plain-text arm description, one record per line:
//   base  tx ty tz qw qx qy qz
//   joint ax ay az tx ty tz qw qx qy qz lo hi
//   tool  tx ty tz qw qx qy qz
//   sphere cx cy cz r
void save_arm(const ArmModel& arm, const GripperGeometry& gripper, std::ostream& os);
void load_arm(std::istream& is, ArmModel& arm, GripperGeometry& gripper);

}  // namespace pnp
