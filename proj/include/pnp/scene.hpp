#pragma once

#include <iosfwd>
#include <string>

#include "pnp/planner.hpp"

namespace pnp {

enum class ShapeKind { Box, Cylinder, Points };

enum class ObjectRole { GraspTarget, Clutter, GraspClutter, Sequential };

struct SceneObject {
  std::string name;
  ShapeKind shape = ShapeKind::Box;
  // box: full extents (L, W, H); cylinder: (radius, radius, height)
  Vec3 size = Vec3::Zero();
  Pose3 pose;              // world; origin at the shape's volumetric center
  PointCloud points;       // shape == Points only, local frame
  ObjectRole role = ObjectRole::Clutter;
};

// On-disk scene description. Schema tag SCENE1, JSON.
struct SceneFile {
  SurfaceRect surface;
  TaskParams task;
  Vec3 viewpoint = Vec3(0.45, -1.2, 0.9);  // virtual camera for partial views
  std::vector<SceneObject> objects;
};

SceneFile load_scene(std::istream& is);
void save_scene(const SceneFile& scene, std::ostream& os);
SceneFile load_scene_file(const std::string& path);
void save_scene_file(const SceneFile& scene, const std::string& path);

// Surface samples of one object at `step` spacing, world frame. The partial
// variant drops points whose outward normal faces away from the viewpoint.
PointCloud sample_object_full(const SceneObject& obj, double step = 0.005);
PointCloud sample_object_partial(const SceneObject& obj, const Vec3& viewpoint,
                                 double step = 0.005);

// Random tabletop scene: one grasp target plus `clutter_count` boxes/cylinders
// rejection-sampled onto the placement surface without footprint overlap.
// Deterministic per seed. If rejection exhausts its budget the clutter count
// is reduced; the achieved count is len(objects) - 1.
SceneFile generate_scene(uint64_t seed, int clutter_count, CostKind task_kind);

// Solver inputs from a scene: sampled clouds, task, default arm and gripper.
// The solver's placement box is the surface rect shrunk by the grasp target's
// horizontal reach so object footprints stay on the surface.
ProblemSpec scene_to_spec(const SceneFile& scene);

}  // namespace pnp
