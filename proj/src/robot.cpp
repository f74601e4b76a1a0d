#include "pnp/robot.hpp"

#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace pnp {

namespace {

// World pose of every joint frame (after its rotation) plus the tool.
void chain(const ArmModel& arm, const Eigen::VectorXd& q, std::vector<Pose3>* frames,
           Pose3* ee) {
  if (q.size() != arm.dof())
    throw ParameterError("fk: joint vector dimension mismatch");
  Pose3 T = arm.base;
  if (frames) frames->clear();
  for (int i = 0; i < arm.dof(); ++i) {
    T = T.compose(arm.joints[i].origin);
    if (frames) frames->push_back(T);  // rotation axis lives in this frame
    T = T.compose(Pose3(Vec3::Zero(), Quat(Eigen::AngleAxisd(q[i], arm.joints[i].axis))));
  }
  *ee = T.compose(arm.tool);
}

}  // namespace

Pose3 fk(const ArmModel& arm, const Eigen::VectorXd& q) {
  Pose3 ee;
  chain(arm, q, nullptr, &ee);
  return ee;
}

FkResult fk_jacobian(const ArmModel& arm, const Eigen::VectorXd& q) {
  std::vector<Pose3> frames;
  FkResult out;
  chain(arm, q, &frames, &out.pose);
  out.jacobian.resize(6, arm.dof());
  for (int i = 0; i < arm.dof(); ++i) {
    Vec3 z = frames[i].rotation() * arm.joints[i].axis;
    Vec3 p = frames[i].t;
    out.jacobian.col(i).head<3>() = z.cross(out.pose.t - p);
    out.jacobian.col(i).tail<3>() = z;
  }
  return out;
}

ResidualResult fk_residual(const ArmModel& arm, const Eigen::VectorXd& q, const Pose3& target) {
  FkResult f = fk_jacobian(arm, q);
  ResidualResult out;
  out.residual.head<3>() = f.pose.t - target.t;
  Vec3 phi = log_so3(f.pose.rotation() * target.rotation().transpose());
  out.residual.tail<3>() = phi;
  out.jacobian.resize(6, arm.dof());
  out.jacobian.topRows<3>() = f.jacobian.topRows<3>();
  // R_e <- exp(delta) R_e shifts phi by Jl^-1(phi) delta
  out.jacobian.bottomRows<3>() = inv_left_jacobian_so3(phi) * f.jacobian.bottomRows<3>();
  return out;
}

Eigen::VectorXd clamp_joints(const ArmModel& arm, const Eigen::VectorXd& q) {
  if (q.size() != arm.dof())
    throw ParameterError("clamp_joints: joint vector dimension mismatch");
  Eigen::VectorXd out = q;
  for (int i = 0; i < arm.dof(); ++i)
    out[i] = std::min(arm.joints[i].hi, std::max(arm.joints[i].lo, out[i]));
  return out;
}

IkResult ik_dls(const ArmModel& arm, const Pose3& target, const Eigen::VectorXd& q0,
                int max_iters, double damping) {
  IkResult out;
  out.q = clamp_joints(arm, q0);
  for (out.iterations = 0; out.iterations < max_iters; ++out.iterations) {
    ResidualResult r = fk_residual(arm, out.q, target);
    out.residual_norm = r.residual.norm();
    if (out.residual_norm < 1e-10) break;
    Eigen::MatrixXd JJt = r.jacobian * r.jacobian.transpose();
    JJt.diagonal().array() += damping * damping;
    Eigen::VectorXd dq = -r.jacobian.transpose() * JJt.ldlt().solve(r.residual);
    // trust-region style cap keeps the linearization honest
    double n = dq.norm();
    if (n > 0.5) dq *= 0.5 / n;
    out.q = clamp_joints(arm, out.q + dq);
  }
  out.residual_norm = fk_residual(arm, out.q, target).residual.norm();
  return out;
}

CollisionQuerySet augment_object_cloud(const PointCloud& z_o, const GraspConfig& theta_g,
                                       const GripperGeometry& gripper, double spacing) {
  if (z_o.empty()) throw EmptyInputError("augment_object_cloud: empty object cloud");
  if (spacing <= 0.0) throw ParameterError("augment_object_cloud: spacing must be > 0");

  Vec3 c = centroid(z_o);
  Pose3 obj_frame(c, Quat::Identity());
  Pose3 obj_inv = obj_frame.inverse();

  // voxel downsample: keep the first point seen per cell, in object frame
  CollisionQuerySet out;
  std::map<std::array<long, 3>, bool> seen;
  for (const auto& p : z_o.points) {
    Vec3 local = obj_inv.apply(p);
    std::array<long, 3> key{long(std::floor(local.x() / spacing)),
                            long(std::floor(local.y() / spacing)),
                            long(std::floor(local.z() / spacing))};
    if (seen.emplace(key, true).second) out.object_points.points.push_back(local);
  }

  Pose3 palm_in_obj = obj_inv.compose(theta_g.palm_pose);
  for (size_t i = 0; i < gripper.centers.size(); ++i) {
    out.robot_points.points.push_back(palm_in_obj.apply(gripper.centers[i]));
    out.robot_radii.push_back(gripper.radii[i]);
  }
  return out;
}

ArmModel planar_test_arm() {
  ArmModel arm;
  Joint j1;
  j1.axis = Vec3::UnitZ();
  j1.lo = -M_PI;
  j1.hi = M_PI;
  Joint j2 = j1;
  j2.origin = Pose3(Vec3(1, 0, 0), Quat::Identity());
  arm.joints = {j1, j2};
  arm.tool = Pose3(Vec3(1, 0, 0), Quat::Identity());
  return arm;
}

ArmModel default_arm() {
  ArmModel arm;
  const double link[7] = {0.30, 0.0, 0.35, 0.0, 0.31, 0.0, 0.08};
  for (int i = 0; i < 7; ++i) {
    Joint j;
    j.axis = (i % 2 == 0) ? Vec3::UnitZ() : Vec3::UnitY();
    j.origin = Pose3(Vec3(0, 0, link[i]), Quat::Identity());
    j.lo = (i % 2 == 0) ? -2.9 : -2.2;
    j.hi = -j.lo;
    arm.joints.push_back(j);
  }
  // palm x-axis (approach) points along the flange z-axis
  arm.tool = Pose3(Vec3(0, 0, 0.10), Quat(Eigen::AngleAxisd(M_PI_2, Vec3::UnitY())));
  return arm;
}

GripperGeometry default_gripper() {
  GripperGeometry g;
  g.centers = {Vec3(0.0, 0.0, 0.0),  Vec3(-0.05, 0.0, 0.0), Vec3(-0.10, 0.0, 0.0),
               Vec3(0.04, 0.05, 0.0), Vec3(0.04, -0.05, 0.0)};
  g.radii = {0.045, 0.05, 0.055, 0.02, 0.02};
  return g;
}

namespace {

void write_pose(std::ostream& os, const Pose3& p) {
  os << p.t.x() << ' ' << p.t.y() << ' ' << p.t.z() << ' ' << p.q.w() << ' ' << p.q.x() << ' '
     << p.q.y() << ' ' << p.q.z();
}

Pose3 read_pose(std::istream& is) {
  double tx, ty, tz, qw, qx, qy, qz;
  is >> tx >> ty >> tz >> qw >> qx >> qy >> qz;
  return Pose3(Vec3(tx, ty, tz), Quat(qw, qx, qy, qz));
}

}  // namespace

void save_arm(const ArmModel& arm, const GripperGeometry& gripper, std::ostream& os) {
  os.precision(17);
  os << "base ";
  write_pose(os, arm.base);
  os << '\n';
  for (const auto& j : arm.joints) {
    os << "joint " << j.axis.x() << ' ' << j.axis.y() << ' ' << j.axis.z() << ' ';
    write_pose(os, j.origin);
    os << ' ' << j.lo << ' ' << j.hi << '\n';
  }
  os << "tool ";
  write_pose(os, arm.tool);
  os << '\n';
  for (size_t i = 0; i < gripper.centers.size(); ++i)
    os << "sphere " << gripper.centers[i].x() << ' ' << gripper.centers[i].y() << ' '
       << gripper.centers[i].z() << ' ' << gripper.radii[i] << '\n';
}

void load_arm(std::istream& is, ArmModel& arm, GripperGeometry& gripper) {
  arm = ArmModel{};
  gripper = GripperGeometry{};
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "base") {
      arm.base = read_pose(ls);
    } else if (tag == "joint") {
      Joint j;
      ls >> j.axis.x() >> j.axis.y() >> j.axis.z();
      j.origin = read_pose(ls);
      ls >> j.lo >> j.hi;
      if (!(j.lo < j.hi)) throw ParameterError("load_arm: joint limits must satisfy lo < hi");
      arm.joints.push_back(j);
    } else if (tag == "tool") {
      arm.tool = read_pose(ls);
    } else if (tag == "sphere") {
      Vec3 c;
      double r;
      ls >> c.x() >> c.y() >> c.z() >> r;
      if (r <= 0.0) throw ParameterError("load_arm: sphere radius must be > 0");
      gripper.centers.push_back(c);
      gripper.radii.push_back(r);
    } else {
      throw ParameterError("load_arm: unknown record '" + tag + "'");
    }
    if (ls.fail()) throw ParameterError("load_arm: malformed record '" + tag + "'");
  }
}

}  // namespace pnp
