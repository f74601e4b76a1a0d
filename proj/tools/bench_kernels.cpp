// Timing comparison of the parallel SDF kernels against their serial
// reference implementations. Outputs must match exactly; exits nonzero on
// any divergence.
#include <chrono>
#include <cstdio>
#include <random>

#include "pnp/scene.hpp"

using namespace pnp;
using Clock = std::chrono::steady_clock;

namespace {

double seconds(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

}  // namespace

int main() {
  SceneFile scene = generate_scene(0, 7, CostKind::Target);
  PointCloud cloud;
  for (const auto& o : scene.objects)
    for (const auto& p : sample_object_partial(o, scene.viewpoint).points)
      cloud.points.push_back(p);
  OccupancyGrid occ = voxelize(cloud, 0.005, 17);
  printf("scene cloud: %zu points, grid %d x %d x %d\n", cloud.size(), occ.dims[0], occ.dims[1],
         occ.dims[2]);

  auto t0 = Clock::now();
  TruncatedSdf par = build_sdf(occ, 0.08);
  auto t1 = Clock::now();
  TruncatedSdf ser = build_sdf_serial(occ, 0.08);
  auto t2 = Clock::now();
  printf("build_sdf:        parallel %.3fs  serial %.3fs  speedup %.2fx\n", seconds(t0, t1),
         seconds(t1, t2), seconds(t1, t2) / seconds(t0, t1));
  if (par.distance != ser.distance || par.gradient != ser.gradient) {
    printf("MISMATCH: parallel and serial SDF builds differ\n");
    return 1;
  }

  // batched point queries through the set kernel
  CollisionQuerySet qs;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int i = 0; i < 20000; ++i)
    qs.object_points.points.push_back(Vec3(0.45 + u(rng), u(rng), 0.1 + 0.3 * u(rng)));
  Pose3 pose(Vec3(0.0, 0.05, 0.0), Quat::Identity());

  SetQueryResult rp, rs;
  auto t3 = Clock::now();
  for (int rep = 0; rep < 50; ++rep) rp = min_sdf_over_set(par, pose, qs);
  auto t4 = Clock::now();
  for (int rep = 0; rep < 50; ++rep) rs = min_sdf_over_set_serial(par, pose, qs);
  auto t5 = Clock::now();
  printf("min_sdf_over_set: parallel %.3fs  serial %.3fs  speedup %.2fx (50 reps, %zu points)\n",
         seconds(t3, t4), seconds(t4, t5), seconds(t4, t5) / seconds(t3, t4),
         qs.object_points.size());
  if (rp.min_distance != rs.min_distance || rp.argmin_local != rs.argmin_local) {
    printf("MISMATCH: parallel and serial set queries differ\n");
    return 1;
  }
  printf("kernels agree\n");
  return 0;
}
