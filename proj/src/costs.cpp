#include "pnp/costs.hpp"

#include <cmath>

namespace pnp {

PlacePose PlacePose::make_planar(const Pose2& p, double z) {
  PlacePose out;
  out.planar = true;
  out.pose = Pose3(Vec3(p.x, p.y, z), Quat(Eigen::AngleAxisd(p.theta, Vec3::UnitZ())));
  return out;
}

Pose2 PlacePose::as_planar() const {
  Mat3 R = pose.rotation();
  return Pose2(pose.t.x(), pose.t.y(), std::atan2(R(1, 0), R(0, 0)));
}

double likelihood_from_cost(double cost, double alpha) {
  if (alpha <= 0.0) throw ParameterError("likelihood_from_cost: alpha must be > 0");
  return std::exp(-alpha * cost);
}

CostEval cost_target(const PlacePose& x_p, const PlacePose& x_t) {
  if (x_p.planar != x_t.planar)
    throw ParameterError("cost_target: pose and target live in different spaces");
  CostEval out;
  if (x_p.planar) {
    Pose2 p = x_p.as_planar(), t = x_t.as_planar();
    Eigen::Vector3d d(p.x - t.x, p.y - t.y, wrap_angle(p.theta - t.theta));
    out.value = 0.5 * d.squaredNorm();
    out.gradient = d;
  } else {
    Vec3 dt = x_p.pose.t - x_t.pose.t;
    Mat3 Rp = x_p.pose.rotation();
    Vec3 phi = log_so3(Rp.transpose() * x_t.pose.rotation());
    out.value = 0.5 * dt.squaredNorm() + 0.5 * phi.squaredNorm();
    out.gradient.resize(6);
    out.gradient.head<3>() = dt;
    out.gradient.tail<3>() = -(Rp * phi);
  }
  return out;
}

CostEval cost_stack(const PlacePose& x_p, const Vec3& extents, const Vec3& stack_base,
                    double lambda_c, bool factored_abs) {
  if (extents.minCoeff() <= 0.0)
    throw DegenerateGeometryError("cost_stack: degenerate object extents");
  CostEval out;
  Mat3 R = x_p.pose.rotation();
  Mat3 Rhat = factored_abs ? abs_rotation_factored(x_p.pose) : R.cwiseAbs();
  Vec3 c(1, 0, 1);
  out.value = c.dot(Rhat * extents);

  Vec3 dt = x_p.pose.t - stack_base;
  out.value += 0.5 * lambda_c * dt.squaredNorm();

  out.gradient.resize(6);
  out.gradient.head<3>() = lambda_c * dt;
  // d|R|_ij under a world-frame increment: sign(R_ij) (skew(e_k) R)_ij
  for (int k = 0; k < 3; ++k) {
    Mat3 Ek = skew(Vec3::Unit(k));
    Mat3 dR = Ek * R;
    double g = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double sgn = (R(i, j) > 0) ? 1.0 : ((R(i, j) < 0) ? -1.0 : 0.0);
        g += c[i] * sgn * dR(i, j) * extents[j];
      }
    out.gradient[3 + k] = g;
  }
  return out;
}

CostEval cost_inline(const PlacePose& x_p, const Vec2& line_point, double line_angle) {
  CostEval out;
  Pose2 p = x_p.as_planar();
  Vec2 d = Vec2(p.x, p.y) - line_point;
  double c = std::cos(line_angle), s = std::sin(line_angle);
  // K = Rz Kx Rz^T penalizes the component across the line; the printed
  // transpose order fails the joint-rotation invariance, see tests.
  Eigen::Matrix2d K;
  K << c * c, c * s, c * s, s * s;
  out.value = d.dot(K * d);
  out.gradient = Eigen::Vector3d::Zero();
  out.gradient.head<2>() = 2.0 * K * d;
  return out;
}

namespace {

struct SoftBounds {
  double max_x, min_x, max_y, min_y;
  // softmax weights of the object points only, for the pose gradient
  std::vector<double> w_max_x, w_min_x, w_max_y, w_min_y;
};

// log-sum-exp extents over environment points plus transformed object points
SoftBounds soft_bounds(const std::vector<Vec2>& env, const std::vector<Vec2>& obj, double beta) {
  SoftBounds sb;
  auto lse = [&](bool maximum, int axis, double& result, std::vector<double>& w_obj) {
    double sign = maximum ? 1.0 : -1.0;
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& p : env) m = std::max(m, sign * p[axis]);
    for (const auto& p : obj) m = std::max(m, sign * p[axis]);
    double sum = 0.0;
    for (const auto& p : env) sum += std::exp(beta * (sign * p[axis] - m));
    w_obj.resize(obj.size());
    for (size_t i = 0; i < obj.size(); ++i) {
      w_obj[i] = std::exp(beta * (sign * obj[i][axis] - m));
      sum += w_obj[i];
    }
    // both soft-max and soft-min have derivative +softmax_weight wrt each input
    for (auto& w : w_obj) w /= sum;
    result = sign * (m + std::log(sum) / beta);
  };
  lse(true, 0, sb.max_x, sb.w_max_x);
  lse(false, 0, sb.min_x, sb.w_min_x);
  lse(true, 1, sb.max_y, sb.w_max_y);
  lse(false, 1, sb.min_y, sb.w_min_y);
  return sb;
}

}  // namespace

double pack_footprint_area(const PlacePose& x_p, const PointCloud& object,
                           const PointCloud& environment) {
  Pose2 p2 = x_p.as_planar();
  double max_x = -std::numeric_limits<double>::infinity(), min_x = -max_x;
  double max_y = max_x, min_y = min_x;
  auto feed = [&](const Vec2& v) {
    max_x = std::max(max_x, v.x());
    min_x = std::min(min_x, v.x());
    max_y = std::max(max_y, v.y());
    min_y = std::min(min_y, v.y());
  };
  for (const auto& p : environment.points) feed(Vec2(p.x(), p.y()));
  for (const auto& p : object.points) feed(p2.apply(Vec2(p.x(), p.y())));
  return (max_x - min_x) * (max_y - min_y);
}

PackEval cost_pack(const PlacePose& x_p, const PointCloud& object, const PointCloud& environment,
                   const Vec2& reference, double beta) {
  if (object.empty() || environment.empty())
    throw EmptyInputError("cost_pack: empty cloud");
  Pose2 p2 = x_p.as_planar();

  Box2 obox = bounding_box_2d(object);
  double L_O = obox.length, W_O = obox.width;
  double c = std::cos(p2.theta), s = std::sin(p2.theta);

  // second term: (1,1,0) T2(x_p) (L_O, W_O, 1)^T, translation taken
  // relative to the reference point
  double second = (c + s) * L_O + (c - s) * W_O + (p2.x - reference.x()) + (p2.y - reference.y());
  double d_second_dtheta = (-s + c) * L_O + (-s - c) * W_O;

  PackEval out;
  out.scene_area = pack_footprint_area(x_p, object, environment);
  out.value = out.scene_area + second;

  // soft extents for the gradient of the area term
  std::vector<Vec2> env2, obj2;
  env2.reserve(environment.size());
  for (const auto& p : environment.points) env2.emplace_back(p.x(), p.y());
  obj2.reserve(object.size());
  std::vector<Vec2> obj_local;
  for (const auto& p : object.points) {
    obj_local.emplace_back(p.x(), p.y());
    obj2.push_back(p2.apply(Vec2(p.x(), p.y())));
  }
  SoftBounds sb = soft_bounds(env2, obj2, beta);
  double Ls = sb.max_x - sb.min_x, Ws = sb.max_y - sb.min_y;
  out.value_soft = Ls * Ws + second;

  Eigen::Vector3d g = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < obj2.size(); ++i) {
    double dA_dx = (sb.w_max_x[i] - sb.w_min_x[i]) * Ws;
    double dA_dy = (sb.w_max_y[i] - sb.w_min_y[i]) * Ls;
    // du/dtheta = R'(theta) p_local
    Vec2 dp(-s * obj_local[i].x() - c * obj_local[i].y(),
            c * obj_local[i].x() - s * obj_local[i].y());
    g[0] += dA_dx;
    g[1] += dA_dy;
    g[2] += dA_dx * dp.x() + dA_dy * dp.y();
  }
  g[0] += 1.0;
  g[1] += 1.0;
  g[2] += d_second_dtheta;
  out.gradient = g;
  return out;
}

CostEval placement_cost(const PlacePose& x_p, const CostContext& ctx) {
  switch (ctx.params.kind) {
    case CostKind::Target:
      return cost_target(x_p, ctx.params.target);
    case CostKind::Stack:
      return cost_stack(x_p, ctx.object_extents, ctx.params.stack_base, ctx.params.lambda_c);
    case CostKind::Inline:
      return cost_inline(x_p, ctx.params.line_point, ctx.params.line_angle);
    case CostKind::Pack: {
      auto pe = cost_pack(x_p, ctx.object, ctx.environment, ctx.params.pack_reference,
                          ctx.params.beta);
      CostEval out;
      out.value = pe.value;
      out.gradient = pe.gradient;
      return out;
    }
  }
  throw ParameterError("placement_cost: unknown cost kind");
}

}  // namespace pnp
