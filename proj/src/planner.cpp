#include "pnp/planner.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include "joint_problem.hpp"

namespace pnp {

bool planar_task(const TaskParams& task) {
  switch (task.kind) {
    case CostKind::Pack:
    case CostKind::Inline:
      return true;
    case CostKind::Stack:
      return false;
    case CostKind::Target:
      return task.target.planar;
  }
  return true;
}

double ConstraintReport::max_violation() const {
  double v = std::max(fk_grasp, fk_place);
  v = std::max(v, collide_grasp);
  v = std::max(v, collide_place_object);
  v = std::max(v, collide_place_robot);
  v = std::max(v, box_violation);
  return v;
}

using namespace detail;

PreparedScene prepare_scene(const ProblemSpec& spec) {
  if (spec.surface.degenerate()) throw ParameterError("prepare_scene: degenerate surface");
  if (spec.settings.margin < 0.0) throw ParameterError("prepare_scene: margin must be >= 0");
  PreparedScene s;
  s.object = summarize_object(spec.grasp_object);
  s.query_set = augment_object_cloud(spec.grasp_object, GraspConfig{}, GripperGeometry{},
                                     spec.settings.query_spacing);
  s.object_extents = 2.0 * s.object.aabb_half;

  double min_z = std::numeric_limits<double>::infinity();
  for (const auto& p : s.query_set.object_points.points) min_z = std::min(min_z, p.z());
  s.rest_z = spec.surface.z - min_z;

  PointCloud grasp_scene = spec.grasp_object;
  for (const auto& p : spec.grasp_clutter.points) grasp_scene.points.push_back(p);
  s.grasp_sdf = build_scene_sdf(grasp_scene, spec.settings.sdf_spacing,
                                spec.settings.sdf_truncation);
  s.place_sdf = build_scene_sdf(spec.place_env, spec.settings.sdf_spacing,
                                spec.settings.sdf_truncation);
  s.env_for_cost = spec.place_env.empty()
                       ? PointCloud{}
                       : voxel_downsample(spec.place_env, spec.settings.query_spacing);
  return s;
}

ObjectiveEval objective(const GraspConfig& theta_g, const PlacePose& x_p,
                        const ProblemSpec& spec, const PreparedScene& scene) {
  ObjectiveEval out;
  Eigen::VectorXd hg;
  solve_cost(x_p, spec, scene, &out.place_cost, &hg, nullptr);
  out.grad_xp = spec.task.alpha * hg;

  out.grasp_score = spec.grasp_model->success(theta_g, scene.object);
  double f = std::max(out.grasp_score, kMinLikelihood);
  out.grad_theta = -spec.grasp_model->gradient(theta_g, scene.object) / f;
  out.value = spec.task.alpha * out.place_cost - std::log(f);
  return out;
}

std::vector<PlaceCandidate> init_place_prior(const ProblemSpec& spec, const PreparedScene& scene,
                                             const GraspConfig& theta_g0) {
  const auto& st = spec.settings;
  Pose3 obj_inv = object_frame(scene).inverse();
  Pose3 palm_in_obj = obj_inv.compose(theta_g0.palm_pose);
  CollisionQuerySet qs = query_set_at(scene, spec.gripper, palm_in_obj);

  struct Raw {
    PlacePose pose;
    double cost;
  };
  std::vector<Raw> raw;

  if (planar_task(spec.task)) {
    double cell = st.prior_cell;
    int nx = std::max(1, int(std::floor((spec.surface.x_max - spec.surface.x_min) / cell)));
    int ny = std::max(1, int(std::floor((spec.surface.y_max - spec.surface.y_min) / cell)));

    // occupied footprint of the place scene above the surface
    std::vector<uint8_t> occ(size_t(nx) * ny, 0);
    double z_lo = spec.surface.z + 0.002;
    for (const auto& p : spec.place_env.points) {
      if (p.z() < z_lo) continue;
      int i = int(std::floor((p.x() - spec.surface.x_min) / cell));
      int j = int(std::floor((p.y() - spec.surface.y_min) / cell));
      if (i >= 0 && j >= 0 && i < nx && j < ny) occ[size_t(i) + size_t(nx) * j] = 1;
    }

    for (int yi = 0; yi < st.prior_yaw_samples; ++yi) {
      double yaw = 2.0 * M_PI * yi / st.prior_yaw_samples;
      double cy = std::cos(yaw), sy = std::sin(yaw);
      // footprint cell offsets of object + hand at this yaw
      std::vector<std::pair<int, int>> offsets;
      {
        std::map<std::pair<int, int>, bool> seen;
        auto feed = [&](const Vec3& p, double pad) {
          double px = cy * p.x() - sy * p.y();
          double py = sy * p.x() + cy * p.y();
          int r = std::max(0, int(std::ceil(pad / cell)) - 1);
          int oi = int(std::floor(px / cell + 0.5));
          int oj = int(std::floor(py / cell + 0.5));
          for (int a = -r; a <= r; ++a)
            for (int b = -r; b <= r; ++b)
              if (seen.emplace(std::make_pair(oi + a, oj + b), true).second)
                offsets.emplace_back(oi + a, oj + b);
        };
        for (const auto& p : qs.object_points.points) feed(p, 0.0);
        for (size_t i = 0; i < qs.robot_points.size(); ++i)
          feed(qs.robot_points.points[i], qs.robot_radii[i]);
      }
      for (int ci = 0; ci < nx; ++ci)
        for (int cj = 0; cj < ny; ++cj) {
          bool ok = true;
          for (const auto& [oi, oj] : offsets) {
            int i = ci + oi, j = cj + oj;
            if (i < 0 || j < 0 || i >= nx || j >= ny || occ[size_t(i) + size_t(nx) * j]) {
              ok = false;
              break;
            }
          }
          if (!ok) continue;
          double x = spec.surface.x_min + (ci + 0.5) * cell;
          double y = spec.surface.y_min + (cj + 0.5) * cell;
          PlacePose pose = PlacePose::make_planar(Pose2(x, y, yaw), scene.rest_z);
          raw.push_back({pose, candidate_cost(pose, spec, scene)});
        }
    }
  } else {
    for (const Mat3& R : cube_orientations()) {
      PlacePose pose = PlacePose::make_spatial(Pose3(spec.task.stack_base, Quat(R)));
      auto [mo, mr] = collision_margins_split(scene.place_sdf, pose.pose, qs, st.margin);
      if (mo.residual > 0.0 || mr.residual > 0.0) continue;
      raw.push_back({pose, candidate_cost(pose, spec, scene)});
    }
  }

  if (raw.empty())
    throw InfeasibleInitError("init_place_prior: no collision-free placement candidate");

  std::stable_sort(raw.begin(), raw.end(),
                   [](const Raw& a, const Raw& b) { return a.cost < b.cost; });

  auto as_candidate = [&](const Raw& rw) {
    PlaceCandidate c;
    c.pose = rw.pose;
    c.score = likelihood_from_cost(std::min(700.0 / std::max(spec.task.alpha, 1e-9), rw.cost),
                                   spec.task.alpha);
    return c;
  };

  int budget = st.ik_filter_budget;
  if (budget > 0) {
    // scan in cost order until `budget` reachable candidates are found; the
    // scan itself is capped so degenerate scenes stay cheap
    std::vector<PlaceCandidate> passing;
    int cap = 16 * budget;
    for (size_t i = 0; i < raw.size() && int(i) < cap && int(passing.size()) < budget; ++i) {
      PlaceCandidate c = as_candidate(raw[i]);
      Pose3 hand = c.pose.pose.compose(palm_in_obj);
      Eigen::VectorXd q;
      if (!ik_reachable(spec.arm, hand, &q)) continue;
      c.q_seed = q;
      passing.push_back(std::move(c));
    }
    if (!passing.empty()) return passing;
    // nothing reachable within the scan cap: best-effort unchecked list
  }
  std::vector<PlaceCandidate> out;
  out.reserve(raw.size());
  for (const Raw& rw : raw) out.push_back(as_candidate(rw));
  return out;
}

namespace {

Solution assemble_solution(const ProblemSpec& spec, const PreparedScene& scene,
                           const JointProblem& prob, const AlResult& al, int restart_index) {
  Solution s;
  s.x_p = prob.lay.has_xp ? prob.lay.xp(al.x) : prob.xp_fixed;
  s.theta_g = prob.theta_of(al.x);
  s.q_grasp = prob.lay.has_qg ? prob.lay.qg(al.x) : Eigen::VectorXd();
  s.q_place = prob.lay.has_qp ? prob.lay.qp(al.x) : Eigen::VectorXd();
  s.outer_iterations = al.outer_iterations;
  s.inner_iterations = al.inner_iterations;
  s.restart_index = restart_index;

  ObjectiveEval oe = objective(s.theta_g, s.x_p, spec, scene);
  s.objective = oe.value;
  s.grasp_score = oe.grasp_score;
  double soft, hard;
  solve_cost(s.x_p, spec, scene, &soft, nullptr, &hard);
  s.place_cost = hard;
  s.residuals = check_constraints(s, spec, scene);
  bool feasible = s.residuals.max_violation() <= spec.settings.solver.constraint_tol;
  s.status = feasible ? SolveStatus::Converged
                      : (al.converged ? SolveStatus::Infeasible : SolveStatus::MaxIters);
  return s;
}

bool better(const Solution& a, const Solution& b) {
  bool fa = a.status == SolveStatus::Converged, fb = b.status == SolveStatus::Converged;
  if (fa != fb) return fa;
  if (!fa) return a.residuals.max_violation() < b.residuals.max_violation();
  if (a.objective != b.objective) return a.objective < b.objective;
  double ca = std::max({a.residuals.collide_grasp, a.residuals.collide_place_object,
                        a.residuals.collide_place_robot});
  double cb = std::max({b.residuals.collide_grasp, b.residuals.collide_place_object,
                        b.residuals.collide_place_robot});
  if (ca != cb) return ca < cb;
  return a.restart_index < b.restart_index;
}

Eigen::VectorXd pack_start(const JointProblem& prob, const GraspConfig& g,
                           const PlaceCandidate* cand, const ProblemSpec& spec) {
  const Layout& lay = prob.lay;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(lay.dim());
  if (lay.has_xp && cand) {
    if (lay.planar) {
      Pose2 p = cand->pose.as_planar();
      v[0] = p.x;
      v[1] = p.y;
      v[2] = p.theta;
    } else {
      v.head<3>() = cand->pose.pose.t;
      // rotation reference Rp0 equals the candidate rotation; increment 0
    }
  }
  if (lay.dim() > lay.i_th() + 6) {
    int o = lay.i_th();
    v.segment<3>(o) = g.palm_pose.t;
    // rotation reference Rg0 equals the sample rotation; increment 0
    v[o + 6] = g.preshape;
  }
  if (lay.has_qg) {
    IkResult ik = ik_dls(spec.arm, g.palm_pose, mid_posture(spec.arm), 100);
    v.segment(lay.i_qg(), lay.n) = ik.q;
  }
  if (lay.has_qp && cand && cand->q_seed.size() == lay.n) {
    // the candidate's q_seed was solved for the grasp used during candidate
    // generation; re-solve for this pair's palm pose, warm-started from it
    Pose3 palm_in_obj = object_frame(*prob.scene).inverse().compose(g.palm_pose);
    Pose3 hand = cand->pose.pose.compose(palm_in_obj);
    v.segment(lay.i_qp(), lay.n) = ik_dls(spec.arm, hand, cand->q_seed, 100).q;
  } else if (lay.has_qp) {
    // unfiltered candidate (no reachable seed): a neutral posture beats
    // chasing what may be an unreachable pose into a joint-limit corner
    v.segment(lay.i_qp(), lay.n) = mid_posture(spec.arm);
  }
  return v;
}

}  // namespace

Solution joint_solve(const ProblemSpec& spec, uint64_t seed) {
  return joint_solve(spec, prepare_scene(spec), seed);
}

Solution joint_solve(const ProblemSpec& spec, const PreparedScene& scene, uint64_t seed) {
  auto t0 = std::chrono::steady_clock::now();
  GraspPrior prior = default_prior(scene.object, spec.surrogate);
  std::vector<GraspConfig> grasps =
      sample_prior(prior, scene.object, spec.settings.restarts_grasp, seed);

  Solution best;
  bool have = false;
  int restart = 0;
  for (const GraspConfig& g : grasps) {
    std::vector<PlaceCandidate> cands;
    try {
      cands = init_place_prior(spec, scene, g);
    } catch (const InfeasibleInitError&) {
      ++restart;
      continue;
    }
    int np = std::min<int>(spec.settings.restarts_place, int(cands.size()));
    for (int ci = 0; ci < np; ++ci, ++restart) {
      JointProblem prob;
      prob.spec = &spec;
      prob.scene = &scene;
      prob.lay.planar = planar_task(spec.task);
      prob.lay.n = spec.arm.dof();
      prob.lay.rest_z = scene.rest_z;
      prob.lay.Rg0 = g.palm_pose.rotation();
      prob.lay.Rp0 = cands[ci].pose.pose.rotation();

      AlResult al = prob.solve(pack_start(prob, g, &cands[ci], spec));
      Solution s = assemble_solution(spec, scene, prob, al, restart);
      if (!have || better(s, best)) {
        best = s;
        have = true;
      }
    }
  }
  if (!have) best.status = SolveStatus::Infeasible;
  best.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return best;
}

Solution sequential_solve(const ProblemSpec& spec, uint64_t seed) {
  return sequential_solve(spec, prepare_scene(spec), seed);
}

Solution sequential_solve(const ProblemSpec& spec, const PreparedScene& scene, uint64_t seed) {
  auto t0 = std::chrono::steady_clock::now();
  GraspPrior prior = default_prior(scene.object, spec.surrogate);
  std::vector<GraspConfig> grasps =
      sample_prior(prior, scene.object, spec.settings.restarts_grasp, seed);

  // stage 1: best grasps ignoring placement. The surrogate saturates, so the
  // stage-1 argmax is often a plateau; keep every converged restart and let
  // stage 2 branch-and-bound over them in score order.
  std::vector<Solution> stage1s;
  Solution stage1;
  bool have1 = false;
  int restart = 0;
  for (const GraspConfig& g : grasps) {
    JointProblem prob;
    prob.spec = &spec;
    prob.scene = &scene;
    prob.place_terms = false;
    prob.lay.planar = planar_task(spec.task);
    prob.lay.n = spec.arm.dof();
    prob.lay.rest_z = scene.rest_z;
    prob.lay.has_xp = false;
    prob.lay.has_qp = false;
    prob.lay.Rg0 = g.palm_pose.rotation();
    prob.xp_fixed = PlacePose::make_planar(Pose2(0, 0, 0), scene.rest_z);

    AlResult al = prob.solve(pack_start(prob, g, nullptr, spec));
    Solution s;
    s.theta_g = prob.lay.theta(al.x);
    s.q_grasp = prob.lay.qg(al.x);
    s.grasp_score = spec.grasp_model->success(s.theta_g, scene.object);
    s.restart_index = restart++;
    s.inner_iterations = al.inner_iterations;
    s.outer_iterations = al.outer_iterations;
    // feasibility: grasp-side constraints only
    ResidualResult rr = fk_residual(spec.arm, s.q_grasp, s.theta_g.palm_pose);
    Eigen::VectorXd iq = prob.ineq(al.x, nullptr);
    double viol = std::max(rr.residual.norm(), iq.maxCoeff());
    s.residuals.fk_grasp = rr.residual.norm();
    s.residuals.collide_grasp = iq.maxCoeff();  // stage 1 rows are all grasp-side
    s.status = viol <= spec.settings.solver.constraint_tol ? SolveStatus::Converged
                                                           : SolveStatus::Infeasible;
    if (s.status == SolveStatus::Converged) stage1s.push_back(s);
    bool better1 = !have1 ||
                   (s.status == SolveStatus::Converged &&
                    (stage1.status != SolveStatus::Converged ||
                     s.grasp_score > stage1.grasp_score));
    if (better1) {
      stage1 = s;
      have1 = true;
    }
  }
  if (!have1 || stage1.status != SolveStatus::Converged) {
    stage1.status = SolveStatus::Infeasible;
    stage1.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return stage1;
  }
  std::stable_sort(stage1s.begin(), stage1s.end(), [](const Solution& a, const Solution& b) {
    return a.grasp_score > b.grasp_score;
  });

  // stage 2: placement with the grasp frozen. Grasps are tried in score
  // order; placement cost is nonnegative, so -log F bounds the objective a
  // grasp can reach and lower-scoring restarts run only while that bound can
  // still beat the incumbent. This never trades grasp score for placement;
  // it only breaks stage-1 ties (the plateau) by placement feasibility.
  Solution best;
  bool have = false;
  // no placement can push the objective below -log of the best grasp score,
  // so attaining that bound ends the whole search
  double global_bound =
      -std::log(std::max(stage1s.front().grasp_score, kMinLikelihood));
  auto optimal = [&] {
    return have && best.status == SolveStatus::Converged &&
           best.objective <= global_bound + 1e-9;
  };
  for (const Solution& s1 : stage1s) {
    if (optimal()) break;
    double bound = -std::log(std::max(s1.grasp_score, kMinLikelihood));
    if (have && best.status == SolveStatus::Converged && bound >= best.objective - 1e-9) break;
    GraspConfig g_fixed = s1.theta_g;
    // half the planner's filter budget per grasp: the scan cost repeats for
    // every stage-1 restart, and rescues past the first few candidates come
    // from switching grasps, not from scanning deeper
    ProblemSpec narrowed = spec;
    narrowed.settings.ik_filter_budget = std::min(spec.settings.ik_filter_budget, 16);
    std::vector<PlaceCandidate> cands;
    try {
      cands = init_place_prior(narrowed, scene, g_fixed);
    } catch (const InfeasibleInitError&) {
      continue;
    }

    // the frozen grasp gets a wider candidate sweep than the joint solver's
    // per-grasp budget: placement-only solves are cheap and stage 2 has no
    // other way to recover when the grasp blocks the best placements. Scan in
    // cost order; past the base budget keep going only while nothing converged.
    int np_base = std::min<int>(spec.settings.restarts_place, int(cands.size()));
    int np_max = std::min<int>(std::max(narrowed.settings.ik_filter_budget, np_base),
                               int(cands.size()));
    for (int ci = 0; ci < np_max; ++ci) {
      if (optimal()) break;
      if (ci >= np_base && have && best.status == SolveStatus::Converged) break;
      JointProblem prob;
      prob.spec = &spec;
      prob.scene = &scene;
      prob.grasp_terms = false;
      prob.lay.planar = planar_task(spec.task);
      prob.lay.n = spec.arm.dof();
      prob.lay.rest_z = scene.rest_z;
      prob.lay.has_qg = false;
      prob.lay.Rp0 = cands[ci].pose.pose.rotation();
      prob.theta_fixed = g_fixed;
      // theta block frozen: layout without it needs explicit handling, so keep
      // the block but pin it with tight bounds
      prob.lay.Rg0 = g_fixed.palm_pose.rotation();

      Eigen::VectorXd x0 = pack_start(prob, g_fixed, &cands[ci], spec);
      BoxBounds b = prob.bounds();
      int o = prob.lay.i_th();
      for (int i = 0; i < 7; ++i) {
        b.lo[o + i] = x0[o + i];
        b.hi[o + i] = x0[o + i];
      }
      ObjectiveFn f = [&prob](const Eigen::VectorXd& v, Eigen::VectorXd* g) {
        return prob.f_obj(v, g);
      };
      ConstraintFn ceq = [&prob](const Eigen::VectorXd& v, Eigen::MatrixXd* J) {
        return prob.eq(v, J);
      };
      ConstraintFn cineq = [&prob](const Eigen::VectorXd& v, Eigen::MatrixXd* J) {
        return prob.ineq(v, J);
      };
      AlResult al = augmented_lagrangian(f, ceq, cineq, x0, b, spec.settings.solver);

      Solution s;
      s.x_p = prob.lay.xp(al.x);
      s.theta_g = g_fixed;
      s.q_grasp = s1.q_grasp;
      s.q_place = prob.lay.qp(al.x);
      s.restart_index = ci;
      s.inner_iterations = s1.inner_iterations + al.inner_iterations;
      s.outer_iterations = s1.outer_iterations + al.outer_iterations;
      ObjectiveEval oe = objective(s.theta_g, s.x_p, spec, scene);
      s.objective = oe.value;
      s.grasp_score = oe.grasp_score;
      double soft, hard;
      solve_cost(s.x_p, spec, scene, &soft, nullptr, &hard);
      s.place_cost = hard;
      s.residuals = check_constraints(s, spec, scene);
      s.status = s.residuals.max_violation() <= spec.settings.solver.constraint_tol
                     ? SolveStatus::Converged
                     : SolveStatus::Infeasible;
      if (!have || better(s, best)) {
        best = s;
        have = true;
      }
    }
  }
  if (!have) {
    best = stage1;
    best.status = SolveStatus::Infeasible;
    best.objective =
        spec.task.alpha * 1e6 - std::log(std::max(best.grasp_score, kMinLikelihood));
  }
  best.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return best;
}

Solution sampling_solve(const ProblemSpec& spec, int n_samples, uint64_t seed) {
  return sampling_solve(spec, prepare_scene(spec), n_samples, seed);
}

Solution sampling_solve(const ProblemSpec& spec, const PreparedScene& scene, int n_samples,
                        uint64_t seed) {
  if (n_samples < 1) throw ParameterError("sampling_solve: n_samples must be >= 1");
  auto t0 = std::chrono::steady_clock::now();
  GraspPrior prior = default_prior(scene.object, spec.surrogate);
  std::vector<GraspConfig> grasps = sample_prior(prior, scene.object, n_samples, seed);

  std::vector<PlaceCandidate> cands;
  try {
    GraspConfig mode;
    mode.palm_pose =
        object_frame(scene).compose(prior.components.front().mean_pose);
    mode.preshape = prior.components.front().mean_preshape;
    // the baseline draws uniformly from the whole collision-free candidate
    // set; the kinematic filter is an optimizer-restart device and would
    // leak solver knowledge into the sampler
    ProblemSpec unfiltered = spec;
    unfiltered.settings.ik_filter_budget = 0;
    cands = init_place_prior(unfiltered, scene, mode);
  } catch (const InfeasibleInitError&) {
    Solution s;
    s.status = SolveStatus::Infeasible;
    s.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
  }

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_int_distribution<size_t> pick(0, cands.size() - 1);

  SolverSettings refine = spec.settings.solver;
  refine.max_outer_iters = 8;
  refine.max_inner_iters = spec.settings.refine_iters;
  refine.mu0 = 100.0;
  ProblemSpec tweaked = spec;  // shallow settings copy for the small budget
  tweaked.settings.solver = refine;

  Solution best;
  bool have = false;
  for (int i = 0; i < n_samples; ++i) {
    const GraspConfig& g = grasps[i];
    PlaceCandidate c = cands[pick(rng)];
    if (c.q_seed.size() != spec.arm.dof()) {
      // unfiltered draws carry no posture; seed the repair with a best-effort
      // IK solve toward this pair's hand-at-placement pose
      Pose3 palm_in_obj = object_frame(scene).inverse().compose(g.palm_pose);
      c.q_seed = ik_dls(spec.arm, c.pose.pose.compose(palm_in_obj),
                        mid_posture(spec.arm), 100).q;
    }

    JointProblem prob;
    prob.spec = &spec;
    prob.scene = &scene;
    prob.lay.planar = planar_task(spec.task);
    prob.lay.n = spec.arm.dof();
    prob.lay.rest_z = scene.rest_z;
    prob.lay.Rg0 = g.palm_pose.rotation();
    prob.lay.Rp0 = c.pose.pose.rotation();

    prob.spec = &tweaked;
    // refinement repairs feasibility only; the drawn grasp stays pinned so
    // the pair's quality is what the sampler produced
    prob.objective_weight = 0.0;
    prob.freeze_theta = true;
    prob.theta_fixed = g;
    Eigen::VectorXd start = pack_start(prob, g, &c, spec);
    prob.prox_weight = 1.0;
    prob.prox_center = start;
    AlResult al = prob.solve(start);
    prob.objective_weight = 1.0;
    prob.freeze_theta = false;
    prob.spec = &spec;
    Solution s = assemble_solution(spec, scene, prob, al, i);
    // sampling feasibility: looser fk tolerance, it only refines briefly
    if (!have || better(s, best)) {
      best = s;
      have = true;
    }
  }
  if (!have) best.status = SolveStatus::Infeasible;
  best.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return best;
}

ConstraintReport check_constraints(const Solution& sol, const ProblemSpec& spec,
                                   const PreparedScene& scene) {
  ConstraintReport r;
  double eps = spec.settings.margin;

  if (sol.q_grasp.size() == spec.arm.dof())
    r.fk_grasp = fk_residual(spec.arm, sol.q_grasp, sol.theta_g.palm_pose).residual.norm();
  Pose3 obj_inv = object_frame(scene).inverse();
  Pose3 palm_in_obj = obj_inv.compose(sol.theta_g.palm_pose);
  if (sol.q_place.size() == spec.arm.dof()) {
    Pose3 hand_place = sol.x_p.pose.compose(palm_in_obj);
    r.fk_place = fk_residual(spec.arm, sol.q_place, hand_place).residual.norm();
  }

  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < spec.gripper.centers.size(); ++i) {
    Vec3 w = sol.theta_g.palm_pose.apply(spec.gripper.centers[i]);
    best = std::min(best, query(scene.grasp_sdf, w).distance - spec.gripper.radii[i]);
  }
  r.collide_grasp = spec.gripper.centers.empty() ? -1e3 : eps - best;

  CollisionQuerySet qs = query_set_at(scene, spec.gripper, palm_in_obj);
  auto [mo, mr] = collision_margins_split(scene.place_sdf, sol.x_p.pose, qs, eps);
  r.collide_place_object = mo.residual;
  r.collide_place_robot = qs.robot_points.empty() ? -1e3 : mr.residual;

  double box = 0.0;
  Pose2 p2 = sol.x_p.as_planar();
  box = std::max(box, spec.surface.x_min - p2.x);
  box = std::max(box, p2.x - spec.surface.x_max);
  box = std::max(box, spec.surface.y_min - p2.y);
  box = std::max(box, p2.y - spec.surface.y_max);
  if (!sol.x_p.planar) box = std::max(box, spec.surface.z - sol.x_p.pose.t.z());
  for (const auto* q : {&sol.q_grasp, &sol.q_place}) {
    if (q->size() != spec.arm.dof()) continue;
    for (int i = 0; i < spec.arm.dof(); ++i) {
      box = std::max(box, spec.arm.joints[i].lo - (*q)[i]);
      box = std::max(box, (*q)[i] - spec.arm.joints[i].hi);
    }
  }
  r.box_violation = std::max(box, 0.0);
  return r;
}

}  // namespace pnp
