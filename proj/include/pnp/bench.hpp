#pragma once

#include "pnp/scene.hpp"
#include "pnp/sdf.hpp"

namespace pnp {

enum class FailureReason {
  None,
  SolverInfeasible,
  GraspScore,
  GraspCollision,
  PlaceCollision,
  OffSurface,
  Unsupported,
};

const char* failure_reason_name(FailureReason r);

struct EvalReport {
  bool grasp_success = false;
  bool place_success = false;
  double likelihood = 0.0;  // task likelihood G; 0 whenever either flag is false
  FailureReason reason = FailureReason::None;
  double solve_time = 0.0;  // seconds, informational
};

struct BenchConfig {
  std::vector<SceneFile> scenes;
  std::vector<std::string> scene_names;          // optional; defaults to scene<i>
  std::vector<std::string> methods = {"joint", "sequential", "sampling"};
  std::vector<uint64_t> seeds = {0};
  int n_samples = 450;                           // sampling baseline budget
  PlannerSettings settings;                      // applied to every instance
  bool include_timing = false;                   // timing columns break byte determinism
  std::string output_path;                       // empty: no file written
};

// Desk-scale execution proxies; no physics. Failed solves score likelihood 0.
EvalReport evaluate(const Solution& sol, const SceneFile& scene);
EvalReport evaluate(const Solution& sol, const SceneFile& scene, const ProblemSpec& spec,
                    const PreparedScene& prepared);

// One CSV data row per (scene, method, seed) plus aggregate footer lines.
// Returns the CSV text; also writes cfg.output_path when set.
std::string run_benchmark(const BenchConfig& cfg);

struct SequentialResult {
  std::vector<EvalReport> reports;    // one per sequential object, in order
  std::vector<Solution> solutions;
  PointCloud final_env;               // environment cloud after all placements
  TruncatedSdf final_sdf;             // incrementally updated via update_sdf
};

// Plan and "place" the scene's sequential-role objects one at a time; the
// environment cloud and SDF are updated between placements.
SequentialResult run_sequential_task(const BenchConfig& cfg, const SceneFile& scene);

// Canonical multi-object demos: four cylinders onto a line, three boxes into
// a stack (staged on their narrow faces so reorienting pays off).
SceneFile make_inline_demo_scene();
SceneFile make_stack_demo_scene();

// Grasp-placement coupling trap, variants 0..4: a flat object wider than the
// gripper opening (side grasps score higher than top grasps) must go into the
// only free slot, whose surrounding walls block the side-grasp hand. Solving
// the grasp in isolation picks the side grasp and cannot place.
SceneFile make_adversarial_scene(int variant);

}  // namespace pnp
