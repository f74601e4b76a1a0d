#pragma once

// Internal machinery of the joint grasp-and-place problem: variable layout,
// objective/constraint callbacks, restart plumbing. Included by the planner
// implementation and by its tests; not part of the public interface.

#include <map>

#include "pnp/planner.hpp"

namespace pnp {
namespace detail {

constexpr double kMinLikelihood = 1e-12;

inline PointCloud voxel_downsample(const PointCloud& c, double spacing) {
  PointCloud out;
  std::map<std::array<long, 3>, bool> seen;
  for (const auto& p : c.points) {
    std::array<long, 3> key{long(std::floor(p.x() / spacing)), long(std::floor(p.y() / spacing)),
                            long(std::floor(p.z() / spacing))};
    if (seen.emplace(key, true).second) out.points.push_back(p);
  }
  return out;
}

inline TruncatedSdf build_scene_sdf(const PointCloud& cloud, double spacing, double truncation) {
  if (cloud.empty()) {
    // empty obstacle set: a far-away stub grid; every query is out of band
    OccupancyGrid g;
    g.origin = Vec3(1e6, 1e6, 1e6);
    g.spacing = spacing;
    g.dims = {2, 1, 1};
    g.cells = {1, 0};
    return build_sdf(g, truncation);
  }
  int pad = int(std::ceil(truncation / spacing)) + 1;
  return build_sdf(voxelize(cloud, spacing, pad), truncation);
}

// Variable layout of the joint problem: [x_p | theta_g | q_grasp | q_place].
// Rotations are exponential-map increments about per-restart references.
struct Layout {
  bool planar = true;
  int n = 0;  // arm dof
  Mat3 Rp0 = Mat3::Identity();
  Mat3 Rg0 = Mat3::Identity();
  double rest_z = 0.0;
  bool has_qg = true;
  bool has_qp = true;
  bool has_xp = true;

  int dp() const { return has_xp ? (planar ? 3 : 6) : 0; }
  int i_th() const { return dp(); }
  int i_qg() const { return i_th() + 7; }
  int i_qp() const { return i_qg() + (has_qg ? n : 0); }
  int dim() const { return i_qp() + (has_qp ? n : 0); }

  PlacePose xp(const Eigen::VectorXd& v) const {
    if (!has_xp) return PlacePose::make_planar(Pose2(0, 0, 0), rest_z);
    if (planar) return PlacePose::make_planar(Pose2(v[0], v[1], v[2]), rest_z);
    Vec3 w = v.segment<3>(3);
    PlacePose p;
    p.planar = false;
    p.pose = Pose3(v.head<3>(), Quat(exp_so3(w) * Rp0));
    return p;
  }
  GraspConfig theta(const Eigen::VectorXd& v) const {
    int o = i_th();
    GraspConfig g;
    g.palm_pose = Pose3(v.segment<3>(o), Quat(exp_so3(Vec3(v.segment<3>(o + 3))) * Rg0));
    g.preshape = v[o + 6];
    return g;
  }
  Eigen::VectorXd qg(const Eigen::VectorXd& v) const { return v.segment(i_qg(), n); }
  Eigen::VectorXd qp(const Eigen::VectorXd& v) const { return v.segment(i_qp(), n); }

  // chain a world-frame rotation increment gradient to the parameter
  Eigen::VectorXd chain_xp_rot(const Eigen::VectorXd& v, const Vec3& g_delta) const {
    if (planar) return Eigen::VectorXd::Constant(1, g_delta.z());
    return left_jacobian_so3(v.segment<3>(3)).transpose() * g_delta;
  }
  Vec3 chain_th_rot(const Eigen::VectorXd& v, const Vec3& g_delta) const {
    return left_jacobian_so3(Vec3(v.segment<3>(i_th() + 3))).transpose() * g_delta;
  }
  // Jacobian (3 x dp_rot) of the world increment wrt the rotation parameters
  Eigen::MatrixXd J_delta_xp(const Eigen::VectorXd& v) const {
    if (planar) return Vec3::UnitZ();
    return left_jacobian_so3(Vec3(v.segment<3>(3)));
  }
  Mat3 J_delta_th(const Eigen::VectorXd& v) const {
    return left_jacobian_so3(Vec3(v.segment<3>(i_th() + 3)));
  }
};

inline CollisionQuerySet query_set_at(const PreparedScene& scene, const GripperGeometry& gripper,
                               const Pose3& palm_in_obj) {
  CollisionQuerySet qs;
  qs.object_points = scene.query_set.object_points;
  for (size_t i = 0; i < gripper.centers.size(); ++i) {
    qs.robot_points.points.push_back(palm_in_obj.apply(gripper.centers[i]));
    qs.robot_radii.push_back(gripper.radii[i]);
  }
  return qs;
}

inline Pose3 object_frame(const PreparedScene& scene) {
  return Pose3(scene.object.centroid, Quat::Identity());
}

// solver-facing placement cost: smooth surrogate for pack, hard otherwise
inline void solve_cost(const PlacePose& x_p, const ProblemSpec& spec, const PreparedScene& scene,
                double* value, Eigen::VectorXd* grad, double* hard_value) {
  if (spec.task.kind == CostKind::Pack) {
    PackEval pe = cost_pack(x_p, scene.query_set.object_points, scene.env_for_cost,
                            spec.task.pack_reference, spec.task.beta);
    *value = pe.value_soft;
    if (hard_value) *hard_value = pe.value;
    if (grad) *grad = pe.gradient;
    return;
  }
  CostContext ctx;
  ctx.object = scene.query_set.object_points;
  ctx.environment = scene.env_for_cost;
  ctx.object_extents = scene.object_extents;
  ctx.params = spec.task;
  CostEval e = placement_cost(x_p, ctx);
  *value = e.value;
  if (hard_value) *hard_value = e.value;
  if (grad) *grad = e.gradient;
}

// All solver callbacks for one restart of the joint problem (or a staged
// sub-problem with some blocks frozen).
struct JointProblem {
  const ProblemSpec* spec;
  const PreparedScene* scene;
  Layout lay;
  // frozen values used when a block is absent from the layout
  GraspConfig theta_fixed;
  PlacePose xp_fixed;
  bool grasp_terms = true;   // -ln F + grasp-side constraints
  bool place_terms = true;   // alpha H + place-side constraints
  double objective_weight = 1.0;  // 0: feasibility-only refinement
  bool freeze_theta = false;      // pin the theta block at theta_fixed
  double prox_weight = 0.0;       // >0: anchor the x_p block near prox_center
  Eigen::VectorXd prox_center;    // raw variable values for the anchor

  GraspConfig theta(const Eigen::VectorXd& v) const {
    return lay.has_qg || grasp_terms ? lay.theta(v) : theta_fixed;
  }
  GraspConfig theta_of(const Eigen::VectorXd& v) const {
    // theta block is present whenever lay contains it; otherwise frozen
    return (lay.dim() > lay.i_th() + 6) ? lay.theta(v) : theta_fixed;
  }

  double f_obj(const Eigen::VectorXd& v, Eigen::VectorXd* grad) const {
    GraspConfig th = theta_of(v);
    PlacePose xp = lay.has_xp ? lay.xp(v) : xp_fixed;
    double value = 0.0;
    if (grad) grad->setZero(lay.dim());

    if (place_terms) {
      double h;
      Eigen::VectorXd hg;
      solve_cost(xp, *spec, *scene, &h, grad ? &hg : nullptr, nullptr);
      value += spec->task.alpha * h;
      if (grad && lay.has_xp) {
        Eigen::VectorXd gx = spec->task.alpha * hg;
        if (lay.planar) {
          grad->segment<3>(0) += gx;
        } else {
          grad->segment<3>(0) += gx.head<3>();
          grad->segment<3>(3) += lay.chain_xp_rot(v, Vec3(gx.tail<3>()));
        }
      }
    }
    if (grasp_terms) {
      double f = std::max(spec->grasp_model->success(th, scene->object), kMinLikelihood);
      value += -std::log(f);
      if (grad) {
        GraspGrad gf = -spec->grasp_model->gradient(th, scene->object) / f;
        int o = lay.i_th();
        grad->segment<3>(o) += gf.head<3>();
        grad->segment<3>(o + 3) += lay.chain_th_rot(v, Vec3(gf.segment<3>(3)));
        (*grad)[o + 6] += gf[6];
      }
    }
    if (grad && objective_weight != 1.0) *grad *= objective_weight;
    value *= objective_weight;
    // proximal anchor: with the true objective off, this keeps feasibility
    // repair local instead of drifting along the constraint manifold
    if (prox_weight > 0.0 && lay.has_xp) {
      int nx = lay.planar ? 3 : 6;
      Eigen::VectorXd d = v.head(nx) - prox_center.head(nx);
      value += 0.5 * prox_weight * d.squaredNorm();
      if (grad) grad->head(nx) += prox_weight * d;
    }
    return value;
  }

  // rows: grasp fk (6, if has_qg), place fk (6, if has_qp)
  Eigen::VectorXd eq(const Eigen::VectorXd& v, Eigen::MatrixXd* J) const {
    int rows = (lay.has_qg ? 6 : 0) + (lay.has_qp ? 6 : 0);
    Eigen::VectorXd r(rows);
    if (J) J->setZero(rows, lay.dim());
    GraspConfig th = theta_of(v);
    bool th_in_layout = lay.dim() > lay.i_th() + 6;
    int row = 0;

    if (lay.has_qg) {
      ResidualResult rr = fk_residual(spec->arm, lay.qg(v), th.palm_pose);
      r.segment<6>(row) = rr.residual;
      if (J) {
        J->block(row, lay.i_qg(), 6, lay.n) = rr.jacobian;
        if (th_in_layout) {
          Vec3 phi = rr.residual.tail<3>();
          Mat3 JinvL = inv_left_jacobian_so3(-phi);
          J->block<3, 3>(row, lay.i_th()) = -Mat3::Identity();
          J->block<3, 3>(row + 3, lay.i_th() + 3) = -JinvL * lay.J_delta_th(v);
        }
      }
      row += 6;
    }
    if (lay.has_qp) {
      PlacePose xp = lay.has_xp ? lay.xp(v) : xp_fixed;
      Pose3 obj_inv = object_frame(*scene).inverse();
      Pose3 A = obj_inv.compose(th.palm_pose);
      Pose3 hand_place = xp.pose.compose(A);
      ResidualResult rr = fk_residual(spec->arm, lay.qp(v), hand_place);
      r.segment<6>(row) = rr.residual;
      if (J) {
        J->block(row, lay.i_qp(), 6, lay.n) = rr.jacobian;
        Vec3 phi = rr.residual.tail<3>();
        Mat3 JinvL = inv_left_jacobian_so3(-phi);
        Mat3 Rp = xp.pose.rotation();
        Vec3 Ra = Rp * A.t;
        if (lay.has_xp) {
          if (lay.planar) {
            J->block<2, 2>(row, 0) = -Eigen::Matrix2d::Identity();
            J->block<3, 1>(row, 2) = skew(Ra) * Vec3::UnitZ();
            J->block<3, 1>(row + 3, 2) = -JinvL * Vec3::UnitZ();
          } else {
            J->block<3, 3>(row, 0) = -Mat3::Identity();
            Eigen::MatrixXd Jd = lay.J_delta_xp(v);
            J->block<3, 3>(row, 3) = skew(Ra) * Jd;
            J->block<3, 3>(row + 3, 3) = -JinvL * Jd;
          }
        }
        if (th_in_layout) {
          J->block<3, 3>(row, lay.i_th()) = -Rp;
          J->block<3, 3>(row + 3, lay.i_th() + 3) = -JinvL * Rp * lay.J_delta_th(v);
        }
      }
      row += 6;
    }
    return r;
  }

  int grasp_rows() const { return std::max<int>(1, int(spec->gripper.centers.size())); }

  // rows: per-sphere grasp-scene clearance; place-scene object set; place
  // robot set. One row per gripper sphere keeps the constraint smooth where a
  // hard min over spheres would kink at ties.
  Eigen::VectorXd ineq(const Eigen::VectorXd& v, Eigen::MatrixXd* J) const {
    int rows = (grasp_terms ? grasp_rows() : 0) + (place_terms ? 2 : 0);
    Eigen::VectorXd r(rows);
    if (J) J->setZero(rows, lay.dim());
    GraspConfig th = theta_of(v);
    bool th_in_layout = lay.dim() > lay.i_th() + 6;
    double eps = spec->settings.margin;
    int row = 0;

    if (grasp_terms) {
      Mat3 Rg = th.palm_pose.rotation();
      if (spec->gripper.centers.empty()) {
        r[row++] = -1e3;  // no spheres: trivially clear
      } else {
        for (size_t i = 0; i < spec->gripper.centers.size(); ++i, ++row) {
          Vec3 w = th.palm_pose.apply(spec->gripper.centers[i]);
          SdfSample s = query(scene->grasp_sdf, w);
          r[row] = eps - (s.distance - spec->gripper.radii[i]);
          if (J && th_in_layout) {
            Vec3 Rc = Rg * spec->gripper.centers[i];
            J->block<1, 3>(row, lay.i_th()) = -s.gradient.transpose();
            Vec3 gd = -Rc.cross(s.gradient);  // wrt world rotation increment
            J->block<1, 3>(row, lay.i_th() + 3) =
                (lay.J_delta_th(v).transpose() * gd).transpose();
          }
        }
      }
    }
    if (place_terms) {
      PlacePose xp = lay.has_xp ? lay.xp(v) : xp_fixed;
      Pose3 obj_inv = object_frame(*scene).inverse();
      Pose3 palm_in_obj = obj_inv.compose(th.palm_pose);
      CollisionQuerySet qs = query_set_at(*scene, spec->gripper, palm_in_obj);
      auto [mo, mr] = collision_margins_split(scene->place_sdf, xp.pose, qs, eps);
      SetQueryResult sq = min_sdf_over_set(scene->place_sdf, xp.pose, qs);
      r[row] = mo.residual;
      r[row + 1] = mr.residual;
      if (J) {
        auto put_xp = [&](int rr, const Eigen::Matrix<double, 6, 1>& g6) {
          if (!lay.has_xp) return;
          if (lay.planar) {
            (*J)(rr, 0) = g6[0];
            (*J)(rr, 1) = g6[1];
            (*J)(rr, 2) = g6[5];
          } else {
            J->block<1, 3>(rr, 0) = g6.head<3>().transpose();
            J->block<1, 3>(rr, 3) =
                (lay.J_delta_xp(v).transpose() * g6.tail<3>()).transpose();
          }
        };
        put_xp(row, mo.grad_xp);
        put_xp(row + 1, mr.grad_xp);
        if (th_in_layout && !qs.robot_points.empty()) {
          Mat3 Rp = xp.pose.rotation();
          Vec3 gd = sq.robot_argmin_gradient;          // world SDF gradient
          Vec3 Rc = sq.robot_argmin_local - palm_in_obj.t;  // R_palm * center
          Vec3 gt = -(Rp.transpose() * gd);
          Vec3 gw = -Rc.cross(Rp.transpose() * gd);
          J->block<1, 3>(row + 1, lay.i_th()) = gt.transpose();
          J->block<1, 3>(row + 1, lay.i_th() + 3) =
              (lay.J_delta_th(v).transpose() * gw).transpose();
        }
      }
      row += 2;
    }
    return r;
  }

  BoxBounds bounds() const {
    const double inf = std::numeric_limits<double>::infinity();
    BoxBounds b;
    b.lo.setConstant(lay.dim(), -inf);
    b.hi.setConstant(lay.dim(), inf);
    if (lay.has_xp) {
      b.lo[0] = spec->surface.x_min;
      b.hi[0] = spec->surface.x_max;
      b.lo[1] = spec->surface.y_min;
      b.hi[1] = spec->surface.y_max;
      if (lay.planar) {
        b.lo[2] = -2 * M_PI;
        b.hi[2] = 2 * M_PI;
      } else {
        b.lo[2] = spec->surface.z;
        b.hi[2] = spec->surface.z + 0.8;
        for (int i = 3; i < 6; ++i) {
          b.lo[i] = -M_PI;
          b.hi[i] = M_PI;
        }
      }
    }
    if (lay.dim() > lay.i_th() + 6) {
      int o = lay.i_th();
      Vec3 c = scene->object.centroid;
      for (int i = 0; i < 3; ++i) {
        b.lo[o + i] = c[i] - 0.6;
        b.hi[o + i] = c[i] + 0.6;
      }
      for (int i = 3; i < 6; ++i) {
        b.lo[o + i] = -M_PI;
        b.hi[o + i] = M_PI;
      }
      b.lo[o + 6] = spec->surrogate.preshape_min;
      b.hi[o + 6] = spec->surrogate.preshape_max;
      if (freeze_theta) {
        // pin the drawn grasp: increment reference Rg0 is its rotation
        for (int i = 0; i < 3; ++i) b.lo[o + i] = b.hi[o + i] = theta_fixed.palm_pose.t[i];
        for (int i = 3; i < 6; ++i) b.lo[o + i] = b.hi[o + i] = 0.0;
        b.lo[o + 6] = b.hi[o + 6] = theta_fixed.preshape;
      }
    }
    auto joint_box = [&](int off, bool present) {
      if (!present) return;
      for (int i = 0; i < lay.n; ++i) {
        b.lo[off + i] = spec->arm.joints[i].lo;
        b.hi[off + i] = spec->arm.joints[i].hi;
      }
    };
    joint_box(lay.i_qg(), lay.has_qg);
    joint_box(lay.i_qp(), lay.has_qp);
    return b;
  }

  AlResult solve(const Eigen::VectorXd& x0) const {
    ObjectiveFn f = [this](const Eigen::VectorXd& v, Eigen::VectorXd* g) { return f_obj(v, g); };
    ConstraintFn ceq, cineq;
    if (lay.has_qg || lay.has_qp)
      ceq = [this](const Eigen::VectorXd& v, Eigen::MatrixXd* J) { return eq(v, J); };
    cineq = [this](const Eigen::VectorXd& v, Eigen::MatrixXd* J) { return ineq(v, J); };
    return augmented_lagrangian(f, ceq, cineq, x0, bounds(), spec->settings.solver);
  }
};

inline std::vector<Mat3> cube_orientations() {
  std::vector<Mat3> out;
  int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (auto& p : perms)
    for (int sx : {1, -1})
      for (int sy : {1, -1})
        for (int sz : {1, -1}) {
          Mat3 R = Mat3::Zero();
          R(0, p[0]) = sx;
          R(1, p[1]) = sy;
          R(2, p[2]) = sz;
          if (R.determinant() > 0.5) out.push_back(R);
        }
  return out;  // 24
}

inline Eigen::VectorXd mid_posture(const ArmModel& arm) {
  Eigen::VectorXd q(arm.dof());
  for (int i = 0; i < arm.dof(); ++i) q[i] = 0.5 * (arm.joints[i].lo + arm.joints[i].hi);
  return q;
}

// the 3 fixed seed postures of the kinematic feasibility filter
inline std::vector<Eigen::VectorXd> ik_seeds(const ArmModel& arm) {
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(arm.dof());
  Eigen::VectorXd mid = mid_posture(arm);
  Eigen::VectorXd bent(arm.dof());
  for (int i = 0; i < arm.dof(); ++i)
    bent[i] = arm.joints[i].lo + 0.35 * (arm.joints[i].hi - arm.joints[i].lo);
  return {zero, mid, bent};
}

inline bool ik_reachable(const ArmModel& arm, const Pose3& target, Eigen::VectorXd* q_out) {
  for (const auto& seed : ik_seeds(arm)) {
    IkResult r = ik_dls(arm, target, seed, 100);
    if (r.residual_norm <= 1e-3) {
      if (q_out) *q_out = r.q;
      return true;
    }
  }
  return false;
}

inline double candidate_cost(const PlacePose& pose, const ProblemSpec& spec,
                      const PreparedScene& scene) {
  double h, hard;
  solve_cost(pose, spec, scene, &h, nullptr, &hard);
  return hard;
}

}  // namespace detail
}  // namespace pnp
