// Command line front end: solve a single instance, run the benchmark sweep,
// drive the multi-object demos, or build and dump a placement-scene SDF.
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "pnp/bench.hpp"

using namespace pnp;

namespace {

SceneFile load_or_generate(const std::string& path, uint64_t seed, int clutter,
                           const std::string& task) {
  if (!path.empty()) return load_scene_file(path);
  CostKind kind;
  if (task == "target")
    kind = CostKind::Target;
  else if (task == "pack")
    kind = CostKind::Pack;
  else if (task == "stack")
    kind = CostKind::Stack;
  else if (task == "inline")
    kind = CostKind::Inline;
  else
    throw ParameterError("unknown task kind: " + task);
  return generate_scene(seed, clutter, kind);
}

void apply_overrides(ProblemSpec& spec, double alpha, double voxel, double margin,
                     const std::string& arm_path, const std::string& model_path) {
  if (alpha > 0.0) spec.task.alpha = alpha;
  if (voxel > 0.0) spec.settings.sdf_spacing = voxel;
  if (margin >= 0.0) spec.settings.margin = margin;
  if (!arm_path.empty()) {
    std::ifstream f(arm_path);
    if (!f) throw ParameterError("cannot open arm file: " + arm_path);
    load_arm(f, spec.arm, spec.gripper);
  }
  if (!model_path.empty()) {
    std::ifstream f(model_path, std::ios::binary);
    if (!f) throw ParameterError("cannot open grasp model: " + model_path);
    spec.grasp_model = load_tabulated_model(f);
  }
}

void print_solution(const Solution& sol, const EvalReport& rep) {
  const char* status = sol.status == SolveStatus::Converged    ? "converged"
                       : sol.status == SolveStatus::MaxIters   ? "max_iters"
                                                               : "infeasible";
  std::cout << "status: " << status << "\n"
            << "objective: " << sol.objective << "\n"
            << "grasp_score: " << sol.grasp_score << "\n"
            << "place_cost: " << sol.place_cost << "\n"
            << "max_violation: " << sol.residuals.max_violation() << "\n"
            << "placement: (" << sol.x_p.pose.t.x() << ", " << sol.x_p.pose.t.y() << ", "
            << sol.x_p.pose.t.z() << ")\n"
            << "grasp_success: " << rep.grasp_success << "\n"
            << "place_success: " << rep.place_success << "\n"
            << "likelihood: " << rep.likelihood << "\n"
            << "failure_reason: " << failure_reason_name(rep.reason) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint grasp and placement planning toolkit"};
  app.require_subcommand(1);

  // shared options, registered per subcommand where they apply
  std::string scene_path, output, method = "joint", task = "target";
  std::string arm_path, model_path;
  uint64_t seed = 0;
  int clutter = 4, samples = 450;
  double alpha = -1.0, voxel = -1.0, margin = -1.0;

  auto* solve = app.add_subcommand("solve", "plan one pick-and-place instance");
  solve->add_option("--scene", scene_path, "SCENE1 file; omit to generate one");
  solve->add_option("--seed", seed, "scene generator and solver seed");
  solve->add_option("--clutter", clutter, "generated clutter count")->check(CLI::Range(0, 8));
  solve->add_option("--task", task, "generated task: target|pack|stack|inline");
  solve->add_option("--method", method, "joint|sequential|sampling");
  solve->add_option("--samples", samples, "sampling baseline budget");
  solve->add_option("--alpha", alpha, "override cost sharpness");
  solve->add_option("--voxel", voxel, "override SDF voxel size, m");
  solve->add_option("--margin", margin, "override collision margin, m");
  solve->add_option("--arm", arm_path, "arm description file");
  solve->add_option("--model", model_path, "tabulated grasp model file");

  auto* bench = app.add_subcommand("bench", "CSV benchmark over generated scenes");
  int n_scenes = 5;
  uint64_t first_seed = 0;
  int n_seeds = 1;
  bool timing = false;
  std::vector<std::string> methods = {"joint", "sequential", "sampling"};
  bench->add_option("--scenes", n_scenes, "number of generated scenes")->check(CLI::PositiveNumber);
  bench->add_option("--seed", first_seed, "first scene generator seed");
  bench->add_option("--solver-seeds", n_seeds, "solver seeds per scene")->check(CLI::PositiveNumber);
  bench->add_option("--clutter", clutter, "clutter count per scene")->check(CLI::Range(0, 8));
  bench->add_option("--task", task, "task kind for generated scenes");
  bench->add_option("--methods", methods, "subset of joint|sequential|sampling");
  bench->add_option("--samples", samples, "sampling baseline budget");
  bench->add_option("--alpha", alpha, "override cost sharpness");
  bench->add_option("--voxel", voxel, "override SDF voxel size, m");
  bench->add_option("--margin", margin, "override collision margin, m");
  bench->add_flag("--timing", timing, "append wall-time columns (not byte stable)");
  bench->add_option("--output,-o", output, "write the CSV here as well");

  auto* demo = app.add_subcommand("demo", "multi-object inline / stacking demo");
  std::string kind = "inline";
  std::string save_scene_path;
  demo->add_option("--kind", kind, "inline|stack");
  demo->add_option("--scene", scene_path, "SCENE1 file with sequential objects");
  demo->add_option("--save-scene", save_scene_path, "write the demo scene file");
  demo->add_option("--seed", seed, "solver seed");

  auto* sdf = app.add_subcommand("sdf", "build or inspect a placement-scene SDF");
  std::string tsdf_in;
  double truncation = 0.08;
  sdf->add_option("--scene", scene_path, "SCENE1 file; omit to generate one");
  sdf->add_option("--seed", seed, "scene generator seed");
  sdf->add_option("--clutter", clutter, "generated clutter count")->check(CLI::Range(0, 8));
  sdf->add_option("--voxel", voxel, "SDF voxel size, m");
  sdf->add_option("--truncation", truncation, "truncation band, m")->check(CLI::PositiveNumber);
  sdf->add_option("--input", tsdf_in, "inspect an existing TSDF1 dump instead");
  sdf->add_option("--output,-o", output, "write the TSDF1 dump here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) {
      SceneFile scene = load_or_generate(scene_path, seed, clutter, task);
      ProblemSpec spec = scene_to_spec(scene);
      apply_overrides(spec, alpha, voxel, margin, arm_path, model_path);
      PreparedScene prepared = prepare_scene(spec);
      Solution sol;
      if (method == "joint")
        sol = joint_solve(spec, prepared, seed);
      else if (method == "sequential")
        sol = sequential_solve(spec, prepared, seed);
      else if (method == "sampling")
        sol = sampling_solve(spec, prepared, samples, seed);
      else
        throw ParameterError("unknown method: " + method);
      print_solution(sol, evaluate(sol, scene, spec, prepared));
    } else if (*bench) {
      BenchConfig cfg;
      for (int i = 0; i < n_scenes; ++i) {
        SceneFile s = load_or_generate("", first_seed + i, clutter, task);
        cfg.scene_names.push_back("gen" + std::to_string(first_seed + i));
        cfg.scenes.push_back(std::move(s));
      }
      cfg.seeds.clear();
      for (int i = 0; i < n_seeds; ++i) cfg.seeds.push_back(i);
      cfg.methods = methods;
      cfg.n_samples = samples;
      cfg.include_timing = timing;
      cfg.output_path = output;
      if (alpha > 0.0)
        for (auto& s : cfg.scenes) s.task.alpha = alpha;
      if (voxel > 0.0) cfg.settings.sdf_spacing = voxel;
      if (margin >= 0.0) cfg.settings.margin = margin;
      std::cout << run_benchmark(cfg);
    } else if (*demo) {
      SceneFile scene;
      if (!scene_path.empty())
        scene = load_scene_file(scene_path);
      else if (kind == "inline")
        scene = make_inline_demo_scene();
      else if (kind == "stack")
        scene = make_stack_demo_scene();
      else
        throw ParameterError("unknown demo kind: " + kind);
      if (!save_scene_path.empty()) save_scene_file(scene, save_scene_path);
      BenchConfig cfg;
      cfg.seeds = {seed};
      SequentialResult r = run_sequential_task(cfg, scene);
      for (size_t i = 0; i < r.reports.size(); ++i) {
        const EvalReport& rep = r.reports[i];
        const Solution& sol = r.solutions[i];
        std::cout << "object " << i << ": "
                  << (rep.grasp_success && rep.place_success ? "placed" : "failed") << " at ("
                  << sol.x_p.pose.t.x() << ", " << sol.x_p.pose.t.y() << ", "
                  << sol.x_p.pose.t.z() << ") likelihood " << rep.likelihood << " reason "
                  << failure_reason_name(rep.reason) << "\n";
      }
    } else if (*sdf) {
      if (!tsdf_in.empty()) {
        std::ifstream f(tsdf_in, std::ios::binary);
        if (!f) throw ParameterError("cannot open " + tsdf_in);
        TruncatedSdf s = load_tsdf(f);
        std::cout << "dims: " << s.dims[0] << " x " << s.dims[1] << " x " << s.dims[2] << "\n"
                  << "spacing: " << s.spacing << "\n"
                  << "truncation: " << s.truncation << "\n"
                  << "origin: (" << s.origin.x() << ", " << s.origin.y() << ", " << s.origin.z()
                  << ")\n";
        return 0;
      }
      SceneFile scene = load_or_generate(scene_path, seed, clutter, task);
      ProblemSpec spec = scene_to_spec(scene);
      if (voxel > 0.0) spec.settings.sdf_spacing = voxel;
      spec.settings.sdf_truncation = truncation;
      PreparedScene prepared = prepare_scene(spec);
      if (output.empty()) throw ParameterError("sdf: --output is required");
      std::ofstream f(output, std::ios::binary);
      if (!f) throw ParameterError("cannot open " + output);
      dump_tsdf(prepared.place_sdf, f);
      std::cout << "wrote " << output << " (" << prepared.place_sdf.dims[0] << " x "
                << prepared.place_sdf.dims[1] << " x " << prepared.place_sdf.dims[2]
                << " cells)\n";
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
