#include "pnp/scene.hpp"

#include <fstream>
#include <random>

#include "json.hpp"

namespace pnp {

namespace {

using json = nlohmann::ordered_json;

json pose_to_json(const Pose3& p) {
  return json{{"t", {p.t.x(), p.t.y(), p.t.z()}},
              {"q", {p.q.w(), p.q.x(), p.q.y(), p.q.z()}}};
}

Pose3 pose_from_json(const json& j) {
  auto t = j.at("t");
  auto q = j.at("q");
  return Pose3(Vec3(t.at(0), t.at(1), t.at(2)),
               Quat(q.at(0), q.at(1), q.at(2), q.at(3)));
}

const char* shape_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::Box: return "box";
    case ShapeKind::Cylinder: return "cylinder";
    case ShapeKind::Points: return "points";
  }
  return "box";
}

ShapeKind shape_from(const std::string& s) {
  if (s == "box") return ShapeKind::Box;
  if (s == "cylinder") return ShapeKind::Cylinder;
  if (s == "points") return ShapeKind::Points;
  throw ParameterError("scene: unknown shape '" + s + "'");
}

const char* role_name(ObjectRole r) {
  switch (r) {
    case ObjectRole::GraspTarget: return "grasp_target";
    case ObjectRole::Clutter: return "clutter";
    case ObjectRole::GraspClutter: return "grasp_clutter";
    case ObjectRole::Sequential: return "sequential";
  }
  return "clutter";
}

ObjectRole role_from(const std::string& s) {
  if (s == "grasp_target") return ObjectRole::GraspTarget;
  if (s == "clutter") return ObjectRole::Clutter;
  if (s == "grasp_clutter") return ObjectRole::GraspClutter;
  if (s == "sequential") return ObjectRole::Sequential;
  throw ParameterError("scene: unknown role '" + s + "'");
}

const char* kind_name(CostKind k) {
  switch (k) {
    case CostKind::Target: return "target";
    case CostKind::Pack: return "pack";
    case CostKind::Stack: return "stack";
    case CostKind::Inline: return "inline";
  }
  return "target";
}

CostKind kind_from(const std::string& s) {
  if (s == "target") return CostKind::Target;
  if (s == "pack") return CostKind::Pack;
  if (s == "stack") return CostKind::Stack;
  if (s == "inline") return CostKind::Inline;
  throw ParameterError("scene: unknown task kind '" + s + "'");
}

}  // namespace

void save_scene(const SceneFile& scene, std::ostream& os) {
  json j;
  j["schema"] = "SCENE1";
  j["surface"] = {{"x_min", scene.surface.x_min}, {"x_max", scene.surface.x_max},
                  {"y_min", scene.surface.y_min}, {"y_max", scene.surface.y_max},
                  {"z", scene.surface.z}};
  const TaskParams& t = scene.task;
  j["task"] = {{"kind", kind_name(t.kind)},
               {"alpha", t.alpha},
               {"target_planar", t.target.planar},
               {"target_pose", pose_to_json(t.target.pose)},
               {"line_point", {t.line_point.x(), t.line_point.y()}},
               {"line_angle", t.line_angle},
               {"stack_base", {t.stack_base.x(), t.stack_base.y(), t.stack_base.z()}},
               {"lambda_c", t.lambda_c},
               {"beta", t.beta},
               {"pack_reference", {t.pack_reference.x(), t.pack_reference.y()}}};
  j["viewpoint"] = {scene.viewpoint.x(), scene.viewpoint.y(), scene.viewpoint.z()};
  j["objects"] = json::array();
  for (const SceneObject& o : scene.objects) {
    json jo;
    jo["name"] = o.name;
    jo["shape"] = shape_name(o.shape);
    jo["size"] = {o.size.x(), o.size.y(), o.size.z()};
    jo["pose"] = pose_to_json(o.pose);
    jo["role"] = role_name(o.role);
    if (o.shape == ShapeKind::Points) {
      json pts = json::array();
      for (const auto& p : o.points.points) pts.push_back({p.x(), p.y(), p.z()});
      jo["points"] = std::move(pts);
    }
    j["objects"].push_back(std::move(jo));
  }
  os << j.dump(2) << "\n";
}

SceneFile load_scene(std::istream& is) {
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("scene: parse failure: ") + e.what());
  }
  if (!j.contains("schema") || j["schema"] != "SCENE1")
    throw ParameterError("scene: missing or unknown schema tag");
  SceneFile s;
  try {
    const json& sf = j.at("surface");
    s.surface = {sf.at("x_min"), sf.at("x_max"), sf.at("y_min"), sf.at("y_max"), sf.at("z")};
    const json& jt = j.at("task");
    TaskParams& t = s.task;
    t.kind = kind_from(jt.at("kind"));
    t.alpha = jt.at("alpha");
    t.target.planar = jt.at("target_planar");
    t.target.pose = pose_from_json(jt.at("target_pose"));
    t.line_point = Vec2(jt.at("line_point").at(0), jt.at("line_point").at(1));
    t.line_angle = jt.at("line_angle");
    t.stack_base = Vec3(jt.at("stack_base").at(0), jt.at("stack_base").at(1),
                        jt.at("stack_base").at(2));
    t.lambda_c = jt.at("lambda_c");
    t.beta = jt.at("beta");
    t.pack_reference = Vec2(jt.at("pack_reference").at(0), jt.at("pack_reference").at(1));
    s.viewpoint = Vec3(j.at("viewpoint").at(0), j.at("viewpoint").at(1), j.at("viewpoint").at(2));
    for (const json& jo : j.at("objects")) {
      SceneObject o;
      o.name = jo.at("name");
      o.shape = shape_from(jo.at("shape"));
      o.size = Vec3(jo.at("size").at(0), jo.at("size").at(1), jo.at("size").at(2));
      o.pose = pose_from_json(jo.at("pose"));
      o.role = role_from(jo.at("role"));
      if (o.shape == ShapeKind::Points)
        for (const json& p : jo.at("points"))
          o.points.points.emplace_back(p.at(0), p.at(1), p.at(2));
      s.objects.push_back(std::move(o));
    }
  } catch (const json::exception& e) {
    throw ParameterError(std::string("scene: malformed field: ") + e.what());
  }
  return s;
}

SceneFile load_scene_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParameterError("scene: cannot open " + path);
  return load_scene(is);
}

void save_scene_file(const SceneFile& scene, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParameterError("scene: cannot write " + path);
  save_scene(scene, os);
}

namespace {

// local-frame samples with outward normals
void sample_shape(const SceneObject& obj, double step,
                  std::vector<std::pair<Vec3, Vec3>>& out) {
  if (obj.shape == ShapeKind::Points) {
    for (const auto& p : obj.points.points) out.emplace_back(p, Vec3::Zero());
    return;
  }
  if (obj.shape == ShapeKind::Box) {
    Vec3 half = 0.5 * obj.size;
    for (int axis = 0; axis < 3; ++axis)
      for (double sign : {1.0, -1.0}) {
        int a = (axis + 1) % 3, b = (axis + 2) % 3;
        Vec3 n = Vec3::Zero();
        n[axis] = sign;
        for (double u = -half[a]; u <= half[a] + 1e-9; u += step)
          for (double v = -half[b]; v <= half[b] + 1e-9; v += step) {
            Vec3 p = Vec3::Zero();
            p[axis] = sign * half[axis];
            p[a] = u;
            p[b] = v;
            out.emplace_back(p, n);
          }
      }
    return;
  }
  // cylinder: lateral wall plus caps
  double r = obj.size.x(), hh = 0.5 * obj.size.z();
  int na = std::max(8, int(std::ceil(2.0 * M_PI * r / step)));
  for (int i = 0; i < na; ++i) {
    double a = 2.0 * M_PI * i / na;
    Vec3 n(std::cos(a), std::sin(a), 0.0);
    for (double z = -hh; z <= hh + 1e-9; z += step) out.emplace_back(Vec3(r * n.x(), r * n.y(), z), n);
  }
  for (double sign : {1.0, -1.0})
    for (double x = -r; x <= r + 1e-9; x += step)
      for (double y = -r; y <= r + 1e-9; y += step)
        if (x * x + y * y <= r * r)
          out.emplace_back(Vec3(x, y, sign * hh), Vec3(0, 0, sign));
}

}  // namespace

PointCloud sample_object_full(const SceneObject& obj, double step) {
  std::vector<std::pair<Vec3, Vec3>> local;
  sample_shape(obj, step, local);
  PointCloud out;
  out.points.reserve(local.size());
  for (const auto& [p, n] : local) out.points.push_back(obj.pose.apply(p));
  return out;
}

PointCloud sample_object_partial(const SceneObject& obj, const Vec3& viewpoint, double step) {
  std::vector<std::pair<Vec3, Vec3>> local;
  sample_shape(obj, step, local);
  Mat3 R = obj.pose.rotation();
  PointCloud out;
  for (const auto& [p, n] : local) {
    Vec3 w = obj.pose.apply(p);
    // points-shape entries carry no normal and are always kept
    if (n.norm() > 0.0 && (R * n).dot(viewpoint - w) <= 0.0) continue;
    out.points.push_back(w);
  }
  return out;
}

SceneFile generate_scene(uint64_t seed, int clutter_count, CostKind task_kind) {
  if (clutter_count < 0 || clutter_count > 8)
    throw ParameterError("generate_scene: clutter_count must be in 0..8");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  SceneFile s;
  s.surface = {0.2, 0.7, 0.02, 0.45, 0.0};
  s.task.kind = task_kind;

  auto rnd = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

  // grasp target in its own region, narrow enough for the gripper opening
  SceneObject target;
  target.name = "target";
  if (u01(rng) < 0.5) {
    target.shape = ShapeKind::Box;
    target.size = Vec3(rnd(0.04, 0.08), rnd(0.04, 0.07), rnd(0.06, 0.12));
  } else {
    target.shape = ShapeKind::Cylinder;
    double r = rnd(0.02, 0.035);
    target.size = Vec3(r, r, rnd(0.06, 0.12));
  }
  target.pose = Pose3(Vec3(rnd(0.35, 0.55), rnd(-0.35, -0.15), 0.5 * target.size.z()),
                      Quat(Eigen::AngleAxisd(rnd(0.0, 2.0 * M_PI), Vec3::UnitZ())));
  target.role = ObjectRole::GraspTarget;
  s.objects.push_back(target);

  // clutter on the placement surface, non-overlapping footprints
  struct Disk {
    double x, y, r;
  };
  std::vector<Disk> placed;
  for (int c = 0; c < clutter_count; ++c) {
    SceneObject o;
    o.name = "clutter" + std::to_string(c);
    if (u01(rng) < 0.5) {
      o.shape = ShapeKind::Box;
      o.size = Vec3(rnd(0.04, 0.10), rnd(0.04, 0.10), rnd(0.04, 0.12));
    } else {
      o.shape = ShapeKind::Cylinder;
      double r = rnd(0.02, 0.05);
      o.size = Vec3(r, r, rnd(0.04, 0.12));
    }
    double rad = o.shape == ShapeKind::Box ? 0.5 * std::hypot(o.size.x(), o.size.y())
                                           : o.size.x();
    bool ok = false;
    for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
      double x = rnd(s.surface.x_min + rad, s.surface.x_max - rad);
      double y = rnd(s.surface.y_min + rad, s.surface.y_max - rad);
      ok = true;
      for (const Disk& d : placed)
        if (std::hypot(x - d.x, y - d.y) < rad + d.r + 0.01) {
          ok = false;
          break;
        }
      if (ok) {
        o.pose = Pose3(Vec3(x, y, 0.5 * o.size.z()),
                       Quat(Eigen::AngleAxisd(rnd(0.0, 2.0 * M_PI), Vec3::UnitZ())));
        placed.push_back({x, y, rad});
      }
    }
    if (!ok) break;  // rejection exhausted: reduced clutter count
    s.objects.push_back(std::move(o));
  }

  // free spot for target-style tasks, away from the clutter footprints
  double tx = 0.5 * (s.surface.x_min + s.surface.x_max);
  double ty = 0.5 * (s.surface.y_min + s.surface.y_max);
  double trad = target.shape == ShapeKind::Box
                    ? 0.5 * std::hypot(target.size.x(), target.size.y())
                    : target.size.x();
  for (int attempt = 0; attempt < 200; ++attempt) {
    double x = rnd(s.surface.x_min + trad, s.surface.x_max - trad);
    double y = rnd(s.surface.y_min + trad, s.surface.y_max - trad);
    bool free = true;
    for (const Disk& d : placed)
      if (std::hypot(x - d.x, y - d.y) < trad + d.r + 0.02) {
        free = false;
        break;
      }
    if (free) {
      tx = x;
      ty = y;
      break;
    }
  }

  switch (task_kind) {
    case CostKind::Target:
      s.task.alpha = 20.0;
      s.task.target =
          PlacePose::make_planar(Pose2(tx, ty, rnd(0.0, 2.0 * M_PI)), s.surface.z);
      break;
    case CostKind::Pack:
      s.task.alpha = 10.0;
      s.task.pack_reference = Vec2(s.surface.x_min, s.surface.y_min);
      break;
    case CostKind::Inline:
      s.task.alpha = 50.0;
      // penalized direction x: objects line up along y through the rect center
      s.task.line_point = Vec2(tx, ty);
      s.task.line_angle = 0.0;
      break;
    case CostKind::Stack:
      s.task.alpha = 10.0;
      s.task.stack_base = Vec3(tx, ty, s.surface.z + 0.10);
      break;
  }
  return s;
}

ProblemSpec scene_to_spec(const SceneFile& scene) {
  const SceneObject* target = nullptr;
  for (const SceneObject& o : scene.objects)
    if (o.role == ObjectRole::GraspTarget) {
      target = &o;
      break;
    }
  if (!target) throw ParameterError("scene_to_spec: no grasp target");

  ProblemSpec spec;
  spec.task = scene.task;
  spec.grasp_object = sample_object_partial(*target, scene.viewpoint);
  if (spec.grasp_object.empty())
    throw ParameterError("scene_to_spec: grasp target cloud is empty");
  for (const SceneObject& o : scene.objects) {
    if (o.role == ObjectRole::GraspClutter)
      for (const auto& p : sample_object_partial(o, scene.viewpoint).points)
        spec.grasp_clutter.points.push_back(p);
    if (o.role == ObjectRole::Clutter)
      for (const auto& p : sample_object_partial(o, scene.viewpoint).points)
        spec.place_env.points.push_back(p);
  }

  // Spatial tasks move z freely, so the table must be a real obstacle; planar
  // tasks pin z to the resting height and skip the cost of the extra points.
  // Sampled denser than the SDF voxel size and several voxels deep, otherwise
  // the voxelized slab has free gaps the margin check tunnels through.
  if (!planar_task(scene.task)) {
    const double step = 0.0075;
    for (double x = scene.surface.x_min; x <= scene.surface.x_max + 1e-9; x += step)
      for (double y = scene.surface.y_min; y <= scene.surface.y_max + 1e-9; y += step)
        for (int layer = 0; layer <= 4; ++layer)
          spec.place_env.points.push_back(Vec3(x, y, scene.surface.z - step * layer));
  }

  // shrink the placement box so the object footprint stays on the surface
  double reach;
  if (target->shape == ShapeKind::Box)
    reach = 0.5 * std::hypot(target->size.x(), target->size.y());
  else if (target->shape == ShapeKind::Cylinder)
    reach = target->size.x();
  else {
    Vec3 c = centroid(target->points);
    reach = 0.0;
    for (const auto& p : target->points.points)
      reach = std::max(reach, std::hypot(p.x() - c.x(), p.y() - c.y()));
  }
  spec.surface = scene.surface;
  spec.surface.x_min += reach;
  spec.surface.x_max -= reach;
  spec.surface.y_min += reach;
  spec.surface.y_max -= reach;
  if (spec.surface.degenerate())
    throw ParameterError("scene_to_spec: object too large for the placement surface");

  spec.grasp_model = std::make_shared<SurrogateGraspModel>();
  spec.arm = default_arm();
  spec.gripper = default_gripper();
  return spec;
}

}  // namespace pnp
