#include "pnp/sdf.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

namespace pnp {

namespace {

struct Seed {
  int i, j, k;
};

constexpr long long kNoSeed = std::numeric_limits<long long>::max();

bool is_free(const OccupancyGrid& g, int i, int j, int k) {
  if (!g.in_bounds(i, j, k)) return true;  // out-of-grid counts as free space
  return !g.occupied(i, j, k);
}

bool is_surface(const OccupancyGrid& g, int i, int j, int k) {
  if (!g.occupied(i, j, k)) return false;
  return is_free(g, i - 1, j, k) || is_free(g, i + 1, j, k) || is_free(g, i, j - 1, k) ||
         is_free(g, i, j + 1, k) || is_free(g, i, j, k - 1) || is_free(g, i, j, k + 1);
}

std::vector<Seed> surface_seeds(const OccupancyGrid& g) {
  std::vector<Seed> seeds;
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i)
        if (is_surface(g, i, j, k)) seeds.push_back({i, j, k});
  return seeds;
}

// Spatial binning of seeds so the per-cell kernel only scans a local window.
struct SeedBins {
  int bucket = 1;                     // bucket edge in cells
  std::array<int, 3> nb{1, 1, 1};     // bucket counts
  std::vector<std::vector<Seed>> bins;

  SeedBins(const std::vector<Seed>& seeds, const std::array<int, 3>& dims, int radius_cells) {
    bucket = std::max(1, radius_cells);
    for (int a = 0; a < 3; ++a) nb[a] = (dims[a] + bucket - 1) / bucket;
    bins.resize(static_cast<size_t>(nb[0]) * nb[1] * nb[2]);
    for (const auto& s : seeds) {
      size_t b = static_cast<size_t>(s.i / bucket) +
                 static_cast<size_t>(nb[0]) * (static_cast<size_t>(s.j / bucket) + static_cast<size_t>(nb[1]) * (s.k / bucket));
      bins[b].push_back(s);
    }
  }

  // Minimum integer squared distance from cell (i,j,k) to any seed, or
  // kNoSeed when no seed lies within radius_cells.
  long long min_d2(int i, int j, int k, int radius_cells) const {
    long long best = kNoSeed;
    long long r2 = static_cast<long long>(radius_cells) * radius_cells;
    int blo[3], bhi[3];
    int c[3] = {i, j, k};
    for (int a = 0; a < 3; ++a) {
      blo[a] = std::max(0, (c[a] - radius_cells) / bucket);
      bhi[a] = std::min(nb[a] - 1, (c[a] + radius_cells) / bucket);
    }
    for (int bk = blo[2]; bk <= bhi[2]; ++bk)
      for (int bj = blo[1]; bj <= bhi[1]; ++bj)
        for (int bi = blo[0]; bi <= bhi[0]; ++bi) {
          const auto& bin = bins[static_cast<size_t>(bi) + static_cast<size_t>(nb[0]) * (static_cast<size_t>(bj) + static_cast<size_t>(nb[1]) * bk)];
          for (const auto& s : bin) {
            long long di = s.i - i, dj = s.j - j, dk = s.k - k;
            long long d2 = di * di + dj * dj + dk * dk;
            if (d2 < best) best = d2;
          }
        }
    if (best > r2) return kNoSeed;
    return best;
  }
};

// Single-cell distance rule shared by the full build and the incremental
// update so both produce bit-identical values.
float cell_distance(const OccupancyGrid& occ, const SeedBins& bins, int radius_cells, double truncation,
                    int i, int j, int k) {
  bool occ_cell = occ.occupied(i, j, k);
  if (occ_cell && is_surface(occ, i, j, k)) return 0.0f;
  long long d2 = bins.min_d2(i, j, k, radius_cells);
  double d = (d2 == kNoSeed) ? truncation
                             : std::min(occ.spacing * std::sqrt(static_cast<double>(d2)), truncation);
  return static_cast<float>(occ_cell ? -d : d);
}

void check_buildable(const OccupancyGrid& occ) {
  bool any_occ = false, any_free = false;
  for (auto c : occ.cells) (c ? any_occ : any_free) = true;
  if (!any_occ) throw EmptyInputError("build_sdf: no occupied cell in scene");
  if (!any_free) throw DegenerateGeometryError("build_sdf: fully occupied grid");
}

TruncatedSdf make_shell(const OccupancyGrid& occ, double truncation) {
  if (truncation < 2.0 * occ.spacing)
    throw ParameterError("build_sdf: truncation must be >= 2 * spacing");
  TruncatedSdf s;
  s.origin = occ.origin;
  s.spacing = occ.spacing;
  s.dims = occ.dims;
  s.truncation = truncation;
  s.source_occupancy = occ;
  s.distance.assign(s.num_cells(), 0.0f);
  s.gradient.assign(s.num_cells() * 3, 0.0f);
  return s;
}

}  // namespace

TruncatedSdf build_sdf(const OccupancyGrid& occ, double truncation) {
  check_buildable(occ);
  TruncatedSdf s = make_shell(occ, truncation);
  auto seeds = surface_seeds(occ);
  int radius = static_cast<int>(std::ceil(truncation / occ.spacing));
  SeedBins bins(seeds, occ.dims, radius);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < occ.dims[2]; ++k)
    for (int j = 0; j < occ.dims[1]; ++j)
      for (int i = 0; i < occ.dims[0]; ++i)
        s.distance[s.index(i, j, k)] = cell_distance(occ, bins, radius, truncation, i, j, k);
  compute_gradients(s);
  return s;
}

TruncatedSdf build_sdf_serial(const OccupancyGrid& occ, double truncation) {
  check_buildable(occ);
  TruncatedSdf s = make_shell(occ, truncation);
  auto seeds = surface_seeds(occ);
  for (int k = 0; k < occ.dims[2]; ++k)
    for (int j = 0; j < occ.dims[1]; ++j)
      for (int i = 0; i < occ.dims[0]; ++i) {
        bool occ_cell = occ.occupied(i, j, k);
        if (occ_cell && is_surface(occ, i, j, k)) {
          s.distance[s.index(i, j, k)] = 0.0f;
          continue;
        }
        long long best = kNoSeed;
        for (const auto& sd : seeds) {
          long long di = sd.i - i, dj = sd.j - j, dk = sd.k - k;
          long long d2 = di * di + dj * dj + dk * dk;
          if (d2 < best) best = d2;
        }
        int radius = static_cast<int>(std::ceil(truncation / occ.spacing));
        if (best > static_cast<long long>(radius) * radius) best = kNoSeed;
        double d = (best == kNoSeed)
                       ? truncation
                       : std::min(occ.spacing * std::sqrt(static_cast<double>(best)), truncation);
        s.distance[s.index(i, j, k)] = static_cast<float>(occ_cell ? -d : d);
      }
  compute_gradients(s);
  return s;
}

void compute_gradients(TruncatedSdf& s) {
  const double inv2s = 1.0 / (2.0 * s.spacing);
  const double invs = 1.0 / s.spacing;
#pragma omp parallel for schedule(static)
  for (int k = 0; k < s.dims[2]; ++k)
    for (int j = 0; j < s.dims[1]; ++j)
      for (int i = 0; i < s.dims[0]; ++i) {
        int c[3] = {i, j, k};
        size_t idx = s.index(i, j, k);
        for (int a = 0; a < 3; ++a) {
          int lo[3] = {i, j, k}, hi[3] = {i, j, k};
          double scale = inv2s;
          if (c[a] == 0) {
            hi[a] += 1;
            scale = invs;
          } else if (c[a] == s.dims[a] - 1) {
            lo[a] -= 1;
            scale = invs;
          } else {
            lo[a] -= 1;
            hi[a] += 1;
          }
          double dv = static_cast<double>(s.distance[s.index(hi[0], hi[1], hi[2])]) -
                      static_cast<double>(s.distance[s.index(lo[0], lo[1], lo[2])]);
          s.gradient[3 * idx + a] = static_cast<float>(dv * scale);
        }
      }
}

SdfSample query(const TruncatedSdf& s, const Vec3& point) {
  SdfSample out;
  for (int a = 0; a < 3; ++a) {
    if (point[a] < s.origin[a] || point[a] > s.origin[a] + s.dims[a] * s.spacing) {
      out.distance = s.truncation;
      return out;  // outside the grid: unconstrained, zero gradient
    }
  }
  double u[3];
  int i0[3];
  double f[3];
  double scale[3];  // du/dpoint; 0 where the coordinate is clamped (flat)
  for (int a = 0; a < 3; ++a) {
    double raw = (point[a] - s.origin[a]) / s.spacing - 0.5;
    scale[a] = (raw > 0.0 && raw < s.dims[a] - 1) ? 1.0 / s.spacing : 0.0;
    u[a] = std::clamp(raw, 0.0, static_cast<double>(s.dims[a] - 1));
    i0[a] = std::min(static_cast<int>(std::floor(u[a])), s.dims[a] - 2);
    i0[a] = std::max(i0[a], 0);
    f[a] = u[a] - i0[a];
  }
  // gradient is the exact derivative of the interpolant, so it matches
  // finite differences of the returned distance
  double d = 0.0;
  Vec3 g = Vec3::Zero();
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        double wx = dx ? f[0] : 1.0 - f[0];
        double wy = dy ? f[1] : 1.0 - f[1];
        double wz = dz ? f[2] : 1.0 - f[2];
        double w = wx * wy * wz;
        double v = s.distance[s.index(i0[0] + dx, i0[1] + dy, i0[2] + dz)];
        d += w * v;
        g.x() += (dx ? 1.0 : -1.0) * wy * wz * scale[0] * v;
        g.y() += (dy ? 1.0 : -1.0) * wx * wz * scale[1] * v;
        g.z() += (dz ? 1.0 : -1.0) * wx * wy * scale[2] * v;
      }
  out.distance = d;
  out.gradient = g;
  return out;
}

namespace {

SetQueryResult min_over_set_impl(const TruncatedSdf& s, const Pose3& x_p, const CollisionQuerySet& q,
                                 bool parallel) {
  if (q.object_points.empty() && q.robot_points.empty())
    throw EmptyInputError("min_sdf_over_set: empty query set");
  const Mat3 R = x_p.rotation();
  const size_t no = q.object_points.size(), nr = q.robot_points.size();
  const auto n = static_cast<long>(no + nr);

  double best_obj = std::numeric_limits<double>::infinity();
  double best_rob = std::numeric_limits<double>::infinity();
  long best_obj_idx = -1, best_rob_idx = -1;

#pragma omp parallel if (parallel)
  {
    double lo = std::numeric_limits<double>::infinity(), lr = lo;
    long loi = -1, lri = -1;
#pragma omp for schedule(static) nowait
    for (long idx = 0; idx < n; ++idx) {
      bool robot = idx >= static_cast<long>(no);
      const Vec3& local = robot ? q.robot_points.points[idx - no] : q.object_points.points[idx];
      Vec3 w = R * local + x_p.t;
      double d = query(s, w).distance;
      if (robot) {
        d -= q.robot_radii[idx - no];
        if (d < lr || (d == lr && idx < lri)) {
          lr = d;
          lri = idx;
        }
      } else if (d < lo || (d == lo && idx < loi)) {
        lo = d;
        loi = idx;
      }
    }
#pragma omp critical
    {
      if (lo < best_obj || (lo == best_obj && loi < best_obj_idx)) {
        best_obj = lo;
        best_obj_idx = loi;
      }
      if (lr < best_rob || (lr == best_rob && lri < best_rob_idx)) {
        best_rob = lr;
        best_rob_idx = lri;
      }
    }
  }

  SetQueryResult out;
  out.min_object = no ? best_obj : s.truncation;
  out.min_robot = nr ? best_rob : s.truncation;
  auto fill = [&](long idx, Vec3& local_out, Vec3& grad_out) {
    bool robot = idx >= static_cast<long>(no);
    Vec3 local = robot ? q.robot_points.points[idx - no] : q.object_points.points[idx];
    Vec3 w = R * local + x_p.t;
    local_out = local;
    grad_out = query(s, w).gradient;
  };
  if (best_obj_idx >= 0) fill(best_obj_idx, out.object_argmin_local, out.object_argmin_gradient);
  if (best_rob_idx >= 0) fill(best_rob_idx, out.robot_argmin_local, out.robot_argmin_gradient);
  // Union min decomposes exactly over the two sets.
  if (nr == 0 || (no > 0 && out.min_object <= out.min_robot)) {
    out.min_distance = out.min_object;
    out.argmin_is_robot = false;
    out.argmin_local = out.object_argmin_local;
    out.argmin_gradient = out.object_argmin_gradient;
  } else {
    out.min_distance = out.min_robot;
    out.argmin_is_robot = true;
    out.argmin_local = out.robot_argmin_local;
    out.argmin_gradient = out.robot_argmin_gradient;
  }
  out.argmin_world = R * out.argmin_local + x_p.t;
  return out;
}

Eigen::Matrix<double, 6, 1> margin_gradient(const Pose3& x_p, const Vec3& local, const Vec3& grad) {
  // residual = eps - d(R p + t):  d/dt = -grad,  d/ddelta = -( (R p) x grad ).
  Eigen::Matrix<double, 6, 1> g;
  Vec3 a = x_p.rotation() * local;
  g.head<3>() = -grad;
  g.tail<3>() = -a.cross(grad);
  return g;
}

}  // namespace

SetQueryResult min_sdf_over_set(const TruncatedSdf& s, const Pose3& x_p, const CollisionQuerySet& q) {
  return min_over_set_impl(s, x_p, q, true);
}

SetQueryResult min_sdf_over_set_serial(const TruncatedSdf& s, const Pose3& x_p,
                                       const CollisionQuerySet& q) {
  return min_over_set_impl(s, x_p, q, false);
}

MarginResult collision_margin(const TruncatedSdf& s, const Pose3& x_p, const CollisionQuerySet& q,
                              double epsilon) {
  auto r = min_sdf_over_set(s, x_p, q);
  MarginResult m;
  m.residual = epsilon - r.min_distance;
  m.grad_xp = margin_gradient(x_p, r.argmin_local, r.argmin_gradient);
  return m;
}

std::pair<MarginResult, MarginResult> collision_margins_split(const TruncatedSdf& s, const Pose3& x_p,
                                                              const CollisionQuerySet& q,
                                                              double epsilon) {
  auto r = min_sdf_over_set(s, x_p, q);
  MarginResult mo, mr;
  mo.residual = epsilon - r.min_object;
  mr.residual = epsilon - r.min_robot;
  if (!q.object_points.empty())
    mo.grad_xp = margin_gradient(x_p, r.object_argmin_local, r.object_argmin_gradient);
  if (!q.robot_points.empty())
    mr.grad_xp = margin_gradient(x_p, r.robot_argmin_local, r.robot_argmin_gradient);
  return {mo, mr};
}

TruncatedSdf update_sdf(const TruncatedSdf& s, const PointCloud& placed_object, const Pose3& at) {
  if (placed_object.empty()) throw EmptyInputError("update_sdf: empty placed cloud");
  PointCloud world = transform_points(at, placed_object);

  OccupancyGrid fused = s.source_occupancy;
  std::array<int, 3> old_dims = fused.dims;
  Vec3 old_origin = fused.origin;
  bool changed = fuse_into_grid(fused, world);
  if (!changed) return s;  // idempotent

  bool grew = fused.dims != old_dims || (fused.origin - old_origin).norm() > 0;
  if (grew) return build_sdf(fused, s.truncation);

  // Occupancy flips are confined to the new cloud; only cells within the
  // truncation band of a changed or seed-status-changed cell can move.
  std::vector<std::array<int, 3>> flipped;
  for (int k = 0; k < fused.dims[2]; ++k)
    for (int j = 0; j < fused.dims[1]; ++j)
      for (int i = 0; i < fused.dims[0]; ++i)
        if (fused.occupied(i, j, k) != s.source_occupancy.occupied(i, j, k))
          flipped.push_back({i, j, k});

  TruncatedSdf out = s;
  out.source_occupancy = fused;

  int radius = static_cast<int>(std::ceil(s.truncation / s.spacing));
  auto seeds = surface_seeds(fused);
  SeedBins bins(seeds, fused.dims, radius);

  // Seed status can only change within one cell of a flip; values within the
  // band of those cells get recomputed with the same kernel as a full build.
  std::vector<uint8_t> affected(out.num_cells(), 0);
  int reach = radius + 1;
  for (const auto& c : flipped)
    for (int k = std::max(0, c[2] - reach); k <= std::min(fused.dims[2] - 1, c[2] + reach); ++k)
      for (int j = std::max(0, c[1] - reach); j <= std::min(fused.dims[1] - 1, c[1] + reach); ++j)
        for (int i = std::max(0, c[0] - reach); i <= std::min(fused.dims[0] - 1, c[0] + reach); ++i)
          affected[out.index(i, j, k)] = 1;

#pragma omp parallel for schedule(static)
  for (int k = 0; k < fused.dims[2]; ++k)
    for (int j = 0; j < fused.dims[1]; ++j)
      for (int i = 0; i < fused.dims[0]; ++i)
        if (affected[out.index(i, j, k)])
          out.distance[out.index(i, j, k)] = cell_distance(fused, bins, radius, s.truncation, i, j, k);

  // Gradient stencil reaches one cell beyond the recomputed distances; the
  // full-grid gradient pass reproduces the rebuild bit for bit.
  compute_gradients(out);
  return out;
}

void dump_tsdf(const TruncatedSdf& s, std::ostream& os) {
  os.write("TSDF1", 5);
  int32_t dims[3] = {s.dims[0], s.dims[1], s.dims[2]};
  os.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  double hdr[5] = {s.spacing, s.origin.x(), s.origin.y(), s.origin.z(), s.truncation};
  os.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  os.write(reinterpret_cast<const char*>(s.distance.data()),
           static_cast<std::streamsize>(s.distance.size() * sizeof(float)));
  os.write(reinterpret_cast<const char*>(s.gradient.data()),
           static_cast<std::streamsize>(s.gradient.size() * sizeof(float)));
}

TruncatedSdf load_tsdf(std::istream& is) {
  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, "TSDF1", 5) != 0)
    throw ParameterError("load_tsdf: bad magic");
  TruncatedSdf s;
  int32_t dims[3];
  is.read(reinterpret_cast<char*>(dims), sizeof(dims));
  double hdr[5];
  is.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
  if (!is || dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0)
    throw ParameterError("load_tsdf: bad header");
  s.dims = {dims[0], dims[1], dims[2]};
  s.spacing = hdr[0];
  s.origin = Vec3(hdr[1], hdr[2], hdr[3]);
  s.truncation = hdr[4];
  s.distance.resize(s.num_cells());
  s.gradient.resize(s.num_cells() * 3);
  is.read(reinterpret_cast<char*>(s.distance.data()),
          static_cast<std::streamsize>(s.distance.size() * sizeof(float)));
  is.read(reinterpret_cast<char*>(s.gradient.data()),
          static_cast<std::streamsize>(s.gradient.size() * sizeof(float)));
  if (!is) throw ParameterError("load_tsdf: truncated payload");
  return s;
}

}  // namespace pnp
