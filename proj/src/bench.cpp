#include "pnp/bench.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "joint_problem.hpp"

namespace pnp {

namespace {

// Residuals this close to zero count as satisfied; matches the solver's
// convergence tolerance with slack for the final multiplier update.
constexpr double kResidualTol = 2e-4;
constexpr double kGeomTol = 2e-3;      // footprint / support checks, m
constexpr double kGraspFloor = 0.2;    // minimum usable grasp success probability

// Locale-independent shortest-ish formatting; CSV output must be byte stable.
std::string fmt(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
  return std::string(buf, res.ptr);
}

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIters: return "max_iters";
    default: return "infeasible";
  }
}

double task_likelihood(const Solution& sol, const SceneFile& scene, const PreparedScene& prepared) {
  if (scene.task.kind != CostKind::Pack)
    return likelihood_from_cost(sol.place_cost, scene.task.alpha);
  // Pack reports absolute bounding-box extents; score the growth of the scene
  // footprint area over the environment-alone baseline instead.
  double base = 0.0;
  if (!prepared.env_for_cost.empty()) {
    Box2 bb = bounding_box_2d(prepared.env_for_cost);
    base = bb.length * bb.width;
  }
  double placed = pack_footprint_area(sol.x_p, prepared.query_set.object_points,
                                      prepared.env_for_cost);
  return likelihood_from_cost(std::max(0.0, placed - base), scene.task.alpha);
}

// Stacked object: bottom near the table counts as table support; otherwise the
// centroid must sit over the footprint of the environment points just below it.
bool supported(const PointCloud& world_obj, const SceneFile& scene, const PointCloud& env) {
  double bottom = std::numeric_limits<double>::infinity();
  for (const auto& p : world_obj.points) bottom = std::min(bottom, p.z());
  if (bottom <= scene.surface.z + 0.015) return true;

  PointCloud supporter;
  for (const auto& p : env.points)
    if (p.z() >= bottom - 0.03 && p.z() <= bottom + 0.01) supporter.points.push_back(p);
  if (supporter.empty()) return false;
  Box2 bb = bounding_box_2d(supporter);
  Vec3 com = centroid(world_obj);
  return std::abs(com.x() - bb.center.x()) <= 0.5 * bb.length + 0.01 &&
         std::abs(com.y() - bb.center.y()) <= 0.5 * bb.width + 0.01;
}

}  // namespace

const char* failure_reason_name(FailureReason r) {
  switch (r) {
    case FailureReason::None: return "none";
    case FailureReason::SolverInfeasible: return "solver_infeasible";
    case FailureReason::GraspScore: return "grasp_score";
    case FailureReason::GraspCollision: return "grasp_collision";
    case FailureReason::PlaceCollision: return "place_collision";
    case FailureReason::OffSurface: return "off_surface";
    default: return "unsupported";
  }
}

EvalReport evaluate(const Solution& sol, const SceneFile& scene, const ProblemSpec& spec,
                    const PreparedScene& prepared) {
  EvalReport rep;
  rep.solve_time = sol.wall_time;
  if (sol.status == SolveStatus::Infeasible) {
    rep.reason = FailureReason::SolverInfeasible;
    return rep;
  }

  const ConstraintReport& r = sol.residuals;
  FailureReason why = FailureReason::None;

  rep.grasp_success = true;
  if (sol.grasp_score < kGraspFloor) {
    rep.grasp_success = false;
    why = FailureReason::GraspScore;
  } else if (r.collide_grasp > kResidualTol || r.fk_grasp > kResidualTol) {
    rep.grasp_success = false;
    why = FailureReason::GraspCollision;
  }

  rep.place_success = true;
  if (r.collide_place_object > kResidualTol || r.collide_place_robot > kResidualTol ||
      r.fk_place > kResidualTol || r.box_violation > kResidualTol) {
    rep.place_success = false;
    if (why == FailureReason::None) why = FailureReason::PlaceCollision;
  }

  PointCloud world = transform_points(sol.x_p.pose, prepared.query_set.object_points);
  if (rep.place_success) {
    for (const auto& p : world.points)
      if (p.x() < scene.surface.x_min - kGeomTol || p.x() > scene.surface.x_max + kGeomTol ||
          p.y() < scene.surface.y_min - kGeomTol || p.y() > scene.surface.y_max + kGeomTol ||
          p.z() < scene.surface.z - kGeomTol) {
        rep.place_success = false;
        if (why == FailureReason::None) why = FailureReason::OffSurface;
        break;
      }
  }
  if (rep.place_success && !planar_task(scene.task) &&
      !supported(world, scene, prepared.env_for_cost)) {
    rep.place_success = false;
    if (why == FailureReason::None) why = FailureReason::Unsupported;
  }

  rep.reason = why;
  if (rep.grasp_success && rep.place_success)
    rep.likelihood = task_likelihood(sol, scene, prepared);
  (void)spec;
  return rep;
}

EvalReport evaluate(const Solution& sol, const SceneFile& scene) {
  ProblemSpec spec = scene_to_spec(scene);
  return evaluate(sol, scene, spec, prepare_scene(spec));
}

std::string run_benchmark(const BenchConfig& cfg) {
  if (cfg.scenes.empty()) throw ParameterError("run_benchmark: no scenes");
  if (cfg.seeds.empty()) throw ParameterError("run_benchmark: no seeds");
  if (cfg.methods.empty()) throw ParameterError("run_benchmark: no methods");
  for (const auto& m : cfg.methods)
    if (m != "joint" && m != "sequential" && m != "sampling")
      throw ParameterError("run_benchmark: unknown method " + m);
  if (!cfg.scene_names.empty() && cfg.scene_names.size() != cfg.scenes.size())
    throw ParameterError("run_benchmark: scene_names size mismatch");
  if (cfg.n_samples <= 0) throw ParameterError("run_benchmark: n_samples must be > 0");

  struct Agg {
    int n = 0;
    int successes = 0;
    double sum_like = 0.0;
    double sum_t = 0.0;
    double sum_t2 = 0.0;
  };
  std::vector<Agg> agg(cfg.methods.size());

  std::ostringstream os;
  os << "scene,method,seed,status,grasp_success,place_success,likelihood,objective,"
        "grasp_score,place_cost,max_violation";
  if (cfg.include_timing) os << ",solve_time";
  os << "\n";

  for (size_t si = 0; si < cfg.scenes.size(); ++si) {
    const SceneFile& scene = cfg.scenes[si];
    std::string name = cfg.scene_names.empty() ? "scene" + std::to_string(si) : cfg.scene_names[si];
    ProblemSpec spec = scene_to_spec(scene);
    spec.settings = cfg.settings;
    PreparedScene prepared = prepare_scene(spec);  // shared across methods and seeds

    for (uint64_t seed : cfg.seeds) {
      for (size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        const std::string& m = cfg.methods[mi];
        Solution sol;
        bool init_failed = false;
        try {
          if (m == "joint")
            sol = joint_solve(spec, prepared, seed);
          else if (m == "sequential")
            sol = sequential_solve(spec, prepared, seed);
          else
            sol = sampling_solve(spec, prepared, cfg.n_samples, seed);
        } catch (const InfeasibleInitError&) {
          init_failed = true;
        }
        EvalReport rep = init_failed ? EvalReport{} : evaluate(sol, scene, spec, prepared);
        if (init_failed) rep.reason = FailureReason::SolverInfeasible;

        Agg& a = agg[mi];
        a.n += 1;
        a.successes += (rep.grasp_success && rep.place_success) ? 1 : 0;
        a.sum_like += rep.likelihood;
        a.sum_t += rep.solve_time;
        a.sum_t2 += rep.solve_time * rep.solve_time;

        os << name << ',' << m << ',' << seed << ',' << status_name(sol.status) << ','
           << (rep.grasp_success ? 1 : 0) << ',' << (rep.place_success ? 1 : 0) << ','
           << fmt(rep.likelihood) << ',' << fmt(sol.objective) << ',' << fmt(sol.grasp_score)
           << ',' << fmt(sol.place_cost) << ',' << fmt(sol.residuals.max_violation());
        if (cfg.include_timing) os << ',' << fmt(rep.solve_time);
        os << "\n";
      }
    }
  }

  for (size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    const Agg& a = agg[mi];
    os << "# aggregate method=" << cfg.methods[mi] << " n=" << a.n
       << " success_rate=" << fmt(a.n ? double(a.successes) / a.n : 0.0)
       << " mean_likelihood=" << fmt(a.n ? a.sum_like / a.n : 0.0);
    if (cfg.include_timing) {
      double mean = a.n ? a.sum_t / a.n : 0.0;
      double var = a.n ? std::max(0.0, a.sum_t2 / a.n - mean * mean) : 0.0;
      os << " mean_time=" << fmt(mean) << " std_time=" << fmt(std::sqrt(var));
    }
    os << "\n";
  }

  std::string csv = os.str();
  if (!cfg.output_path.empty()) {
    std::ofstream f(cfg.output_path, std::ios::binary);
    if (!f) throw ParameterError("run_benchmark: cannot open " + cfg.output_path);
    f << csv;
  }
  return csv;
}

namespace {

double min_dimension(const SceneObject& o) {
  if (o.shape == ShapeKind::Box) return o.size.minCoeff();
  if (o.shape == ShapeKind::Cylinder) return std::min(2.0 * o.size.x(), o.size.z());
  Box2 bb = bounding_box_2d(o.points);
  double zmin = std::numeric_limits<double>::infinity(), zmax = -zmin;
  for (const auto& p : o.points.points) {
    zmin = std::min(zmin, p.z());
    zmax = std::max(zmax, p.z());
  }
  return std::min({bb.length, bb.width, zmax - zmin});
}

}  // namespace

SequentialResult run_sequential_task(const BenchConfig& cfg, const SceneFile& scene) {
  std::vector<size_t> order;
  for (size_t i = 0; i < scene.objects.size(); ++i)
    if (scene.objects[i].role == ObjectRole::Sequential) order.push_back(i);
  if (order.size() < 2)
    throw ParameterError("run_sequential_task: need at least two sequential objects");
  uint64_t seed = cfg.seeds.empty() ? 0 : cfg.seeds.front();

  SequentialResult out;
  std::vector<SceneObject> placed;  // committed placements as point clouds
  bool have_master = false;
  double stack_top = scene.surface.z;

  for (size_t step = 0; step < order.size(); ++step) {
    // Per-step scene: current object is the grasp target, later sequential
    // objects are grasp-side clutter, committed ones are place-side clutter.
    SceneFile cur = scene;
    cur.objects.clear();
    for (size_t i = 0; i < scene.objects.size(); ++i) {
      SceneObject o = scene.objects[i];
      if (o.role == ObjectRole::Sequential) {
        auto it = std::find(order.begin(), order.end(), i);
        size_t pos = size_t(it - order.begin());
        if (pos < step) continue;  // already picked up
        o.role = pos == step ? ObjectRole::GraspTarget : ObjectRole::GraspClutter;
      }
      cur.objects.push_back(o);
    }
    for (const auto& p : placed) cur.objects.push_back(p);
    if (cur.task.kind == CostKind::Stack)
      cur.task.stack_base.z() = stack_top + 0.5 * min_dimension(scene.objects[order[step]]);

    ProblemSpec spec = scene_to_spec(cur);
    spec.settings = cfg.settings;
    PreparedScene prepared = prepare_scene(spec);
    if (have_master) prepared.place_sdf = out.final_sdf;

    Solution sol;
    EvalReport rep;
    try {
      sol = joint_solve(spec, prepared, seed + step);
      rep = evaluate(sol, cur, spec, prepared);
    } catch (const InfeasibleInitError&) {
      rep.reason = FailureReason::SolverInfeasible;
    }
    out.reports.push_back(rep);
    out.solutions.push_back(sol);
    if (!(rep.grasp_success && rep.place_success)) continue;  // object stays unplaced

    // Commit: express the full object surface in the solver's object frame
    // (centroid of the partial view) and drop it into the environment.
    PointCloud full = sample_object_full(scene.objects[order[step]]);
    Vec3 c = centroid(spec.grasp_object);
    PointCloud local;
    local.frame = "object";
    for (const auto& p : full.points) local.points.push_back(p - c);
    PointCloud world = transform_points(sol.x_p.pose, local);
    for (const auto& p : world.points) out.final_env.points.push_back(p);

    if (!have_master) {
      PointCloud base = spec.place_env;
      for (const auto& p : world.points) base.points.push_back(p);
      out.final_sdf =
          detail::build_scene_sdf(base, spec.settings.sdf_spacing, spec.settings.sdf_truncation);
      have_master = true;
    } else {
      out.final_sdf = update_sdf(out.final_sdf, local, sol.x_p.pose);
    }

    SceneObject rec;
    rec.name = scene.objects[order[step]].name + "_placed";
    rec.shape = ShapeKind::Points;
    rec.pose = sol.x_p.pose;
    rec.points = local;
    rec.role = ObjectRole::Clutter;
    placed.push_back(rec);
    for (const auto& p : world.points) stack_top = std::max(stack_top, p.z());
  }
  return out;
}

SceneFile make_inline_demo_scene() {
  SceneFile s;
  s.surface = {0.2, 0.7, 0.02, 0.45, 0.0};
  s.task.kind = CostKind::Inline;
  s.task.alpha = 50.0;
  s.task.line_point = Vec2(0.45, 0.20);  // penalized direction x: line runs along y
  s.task.line_angle = 0.0;
  const double r = 0.025, h = 0.09;
  const Vec2 spots[4] = {{0.38, -0.30}, {0.47, -0.30}, {0.38, -0.20}, {0.47, -0.20}};
  for (int i = 0; i < 4; ++i) {
    SceneObject o;
    o.name = "cyl" + std::to_string(i);
    o.shape = ShapeKind::Cylinder;
    o.size = Vec3(r, r, h);
    o.pose = Pose3(Vec3(spots[i].x(), spots[i].y(), 0.5 * h), Quat::Identity());
    o.role = ObjectRole::Sequential;
    s.objects.push_back(o);
  }
  return s;
}

SceneFile make_stack_demo_scene() {
  SceneFile s;
  s.surface = {0.2, 0.7, 0.02, 0.45, 0.0};
  s.task.kind = CostKind::Stack;
  s.task.alpha = 10.0;
  s.task.stack_base = Vec3(0.55, 0.30, 0.025);  // z is managed per placement
  const Vec3 sizes[3] = {{0.10, 0.07, 0.05}, {0.09, 0.065, 0.045}, {0.08, 0.06, 0.04}};
  const Vec2 spots[3] = {{0.38, -0.30}, {0.48, -0.30}, {0.38, -0.19}};
  for (int i = 0; i < 3; ++i) {
    SceneObject o;
    o.name = "box" + std::to_string(i);
    o.shape = ShapeKind::Box;
    o.size = sizes[i];
    // staged standing on the smallest face; laying it flat lowers the cost
    o.pose = Pose3(Vec3(spots[i].x(), spots[i].y(), 0.5 * sizes[i].x()),
                   Quat(Eigen::AngleAxisd(0.5 * M_PI, Vec3::UnitY())));
    o.role = ObjectRole::Sequential;
    s.objects.push_back(o);
  }
  return s;
}

SceneFile make_adversarial_scene(int variant) {
  if (variant < 0 || variant > 4)
    throw ParameterError("make_adversarial_scene: variant must be in 0..4");
  SceneFile s;
  s.surface = {0.2, 0.7, 0.02, 0.45, 0.0};

  // wider than the 0.104 m max opening in both horizontal spans, but thin
  SceneObject obj;
  obj.name = "plate";
  obj.shape = ShapeKind::Box;
  obj.size = Vec3(0.13 + 0.005 * variant, 0.16, 0.035);
  obj.pose = Pose3(Vec3(0.45, -0.25, 0.5 * obj.size.z()), Quat::Identity());
  obj.role = ObjectRole::GraspTarget;
  s.objects.push_back(obj);

  // walls tile the whole surface except one slot barely admitting the object
  Vec2 slot_c(0.42 + 0.015 * variant, 0.22 + 0.01 * variant);
  double hx = 0.5 * obj.size.x() + 0.032;  // slot half extents
  double hy = 0.5 * obj.size.y() + 0.032;
  const double wall_h = 0.12;
  struct Span {
    double x0, x1, y0, y1;
  };
  Span walls[4] = {
      {s.surface.x_min, slot_c.x() - hx, s.surface.y_min, s.surface.y_max},
      {slot_c.x() + hx, s.surface.x_max, s.surface.y_min, s.surface.y_max},
      {slot_c.x() - hx, slot_c.x() + hx, s.surface.y_min, slot_c.y() - hy},
      {slot_c.x() - hx, slot_c.x() + hx, slot_c.y() + hy, s.surface.y_max},
  };
  for (int i = 0; i < 4; ++i) {
    SceneObject w;
    w.name = "wall" + std::to_string(i);
    w.shape = ShapeKind::Box;
    w.size = Vec3(walls[i].x1 - walls[i].x0, walls[i].y1 - walls[i].y0, wall_h);
    w.pose = Pose3(Vec3(0.5 * (walls[i].x0 + walls[i].x1), 0.5 * (walls[i].y0 + walls[i].y1),
                        0.5 * wall_h),
                   Quat::Identity());
    w.role = ObjectRole::Clutter;
    s.objects.push_back(w);
  }

  s.task.kind = CostKind::Target;
  s.task.alpha = 20.0;
  s.task.target = PlacePose::make_planar(Pose2(slot_c.x(), slot_c.y(), 0.0), s.surface.z);
  return s;
}

}  // namespace pnp
