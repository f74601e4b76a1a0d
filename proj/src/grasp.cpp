#include "pnp/grasp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>

namespace pnp {

namespace {

double stable_sigmoid(double z) {
  z = std::clamp(z, -500.0, 500.0);  // keeps the output strictly inside (0,1)
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

ObjectSummary summarize_object(const PointCloud& z_o) {
  if (z_o.size() < 4) throw DegenerateGeometryError("summarize_object: need >= 4 points");
  ObjectSummary o;
  o.cloud = z_o;
  o.centroid = centroid(z_o);

  Mat3 cov = Mat3::Zero();
  Vec3 lo = z_o.points.front(), hi = lo;
  for (const auto& p : z_o.points) {
    Vec3 d = p - o.centroid;
    cov += d * d.transpose();
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  cov /= static_cast<double>(z_o.size());
  o.aabb_half = 0.5 * (hi - lo);

  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  Mat3 axes = eig.eigenvectors();

  // Extents are half-ranges of the projections, sorted descending with axes.
  std::array<std::pair<double, Vec3>, 3> ranked;
  for (int a = 0; a < 3; ++a) {
    Vec3 u = axes.col(a);
    double pmin = std::numeric_limits<double>::infinity(), pmax = -pmin;
    for (const auto& p : z_o.points) {
      double s = u.dot(p - o.centroid);
      pmin = std::min(pmin, s);
      pmax = std::max(pmax, s);
    }
    ranked[a] = {0.5 * (pmax - pmin), u};
  }
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& x, const auto& y) { return x.first > y.first; });
  for (int a = 0; a < 3; ++a) {
    o.extents[a] = ranked[a].first;
    o.axes.col(a) = ranked[a].second;
  }
  if (o.extents[2] < 1e-9 || o.extents[0] < 1e-9)
    throw DegenerateGeometryError("summarize_object: coplanar or collinear cloud");
  if (o.axes.determinant() < 0) o.axes.col(2) = -o.axes.col(2);
  return o;
}

double SurrogateGraspModel::logit(const GraspConfig& g, const ObjectSummary& o,
                                  GraspGrad* grad) const {
  const Mat3 R = g.palm_pose.rotation();
  const Vec3 a = R.col(0);  // approach axis
  const Vec3 y = R.col(1);  // closing axis
  const Vec3 pos = g.palm_pose.t;

  // Position term: palm should sit at standoff behind the centroid.
  Vec3 m = pos - (o.centroid - p_.standoff * a);
  double a_dist = -m.squaredNorm() / (p_.sigma_p * p_.sigma_p);

  // Alignment: approach axis vs direction to the centroid.
  Vec3 v = o.centroid - pos;
  double vn = std::max(v.norm(), 1e-9);
  Vec3 dir = v / vn;
  double a_align = a.dot(dir);

  // Width match: gripper opening vs the object's support width along the
  // closing axis (ellipsoidal support from the principal-axis summary).
  Vec3 s;
  for (int k = 0; k < 3; ++k) s[k] = y.dot(o.axes.col(k));
  double q = 0.0;
  for (int k = 0; k < 3; ++k) q += s[k] * s[k] * o.extents[k] * o.extents[k];
  double w_req = 2.0 * std::sqrt(std::max(q, 1e-12));
  double opening = p_.opening_c0 + p_.opening_c1 * g.preshape;
  double dw = opening - w_req;
  double a_width = -dw * dw / (p_.sigma_w * p_.sigma_w);

  double z = p_.w_dist * a_dist + p_.w_align * a_align + p_.w_width * a_width + p_.bias;

  if (grad) {
    GraspGrad dz = GraspGrad::Zero();
    double inv_sp2 = 1.0 / (p_.sigma_p * p_.sigma_p);
    // a_dist
    dz.head<3>() += p_.w_dist * (-2.0 * inv_sp2) * m;
    dz.segment<3>(3) += p_.w_dist * (-2.0 * p_.standoff * inv_sp2) * a.cross(m);
    // a_align; d(dir)/d(pos) = -(I - dir dir^T)/|v|
    Vec3 d_align_pos = -(a - dir * a.dot(dir)) / vn;
    dz.head<3>() += p_.w_align * d_align_pos;
    dz.segment<3>(3) += p_.w_align * a.cross(dir);
    // a_width
    double inv_sw2 = 1.0 / (p_.sigma_w * p_.sigma_w);
    dz[6] += p_.w_width * (-2.0 * dw * inv_sw2) * p_.opening_c1;
    Vec3 dwreq_dy = Vec3::Zero();
    for (int k = 0; k < 3; ++k) dwreq_dy += o.extents[k] * o.extents[k] * s[k] * o.axes.col(k);
    dwreq_dy *= 4.0 / w_req;
    dz.segment<3>(3) += p_.w_width * (2.0 * dw * inv_sw2) * y.cross(dwreq_dy);
    *grad = dz;
  }
  return z;
}

double SurrogateGraspModel::success(const GraspConfig& g, const ObjectSummary& o) const {
  return stable_sigmoid(logit(g, o, nullptr));
}

GraspGrad SurrogateGraspModel::gradient(const GraspConfig& g, const ObjectSummary& o) const {
  GraspGrad dz;
  double z = logit(g, o, &dz);
  double f = stable_sigmoid(z);
  return f * (1.0 - f) * dz;
}

double TabulatedGraspModel::interpolate(const std::array<double, kAxes>& u,
                                        std::array<double, kAxes>* dlogit) const {
  std::array<int, kAxes> i0;
  std::array<double, kAxes> f, step;
  for (int a = 0; a < kAxes; ++a) {
    step[a] = (counts[a] > 1) ? (hi[a] - lo[a]) / (counts[a] - 1) : 1.0;
    double x = std::clamp(u[a], lo[a], hi[a]);
    bool clamped = (u[a] <= lo[a]) || (u[a] >= hi[a]);
    double t = (counts[a] > 1) ? (x - lo[a]) / step[a] : 0.0;
    i0[a] = std::min(static_cast<int>(std::floor(t)), std::max(counts[a] - 2, 0));
    f[a] = (counts[a] > 1) ? t - i0[a] : 0.0;
    if (dlogit) (*dlogit)[a] = clamped ? 0.0 : 1.0;  // reused below as a mask
  }
  double value = 0.0;
  std::array<double, kAxes> grad{};
  for (int corner = 0; corner < (1 << kAxes); ++corner) {
    double w = 1.0;
    size_t idx = 0, stride = 1;
    for (int a = 0; a < kAxes; ++a) {
      int bit = (corner >> a) & 1;
      if (counts[a] == 1 && bit) {
        w = 0.0;
        break;
      }
      w *= bit ? f[a] : 1.0 - f[a];
      idx += stride * static_cast<size_t>(i0[a] + bit);
      stride *= static_cast<size_t>(counts[a]);
    }
    if (w == 0.0 && !dlogit) continue;
    double val = logits[idx];
    value += w * val;
    if (dlogit) {
      for (int a = 0; a < kAxes; ++a) {
        if (counts[a] == 1) continue;
        double dw = 1.0;
        for (int b = 0; b < kAxes; ++b) {
          int bit = (corner >> b) & 1;
          if (b == a)
            dw *= bit ? 1.0 : -1.0;
          else
            dw *= bit ? f[b] : 1.0 - f[b];
        }
        grad[a] += dw * val;
      }
    }
  }
  if (dlogit) {
    for (int a = 0; a < kAxes; ++a)
      (*dlogit)[a] = (counts[a] > 1) ? (*dlogit)[a] * grad[a] / step[a] : 0.0;
  }
  return value;
}

namespace {

std::array<double, TabulatedGraspModel::kAxes> grasp_coords(const GraspConfig& g,
                                                            const ObjectSummary& o) {
  Vec3 off = g.palm_pose.t - o.centroid;
  Vec3 a = g.palm_pose.rotation().col(0);
  double yaw = std::atan2(a.y(), a.x());
  double pitch = std::asin(std::clamp(a.z(), -1.0, 1.0));
  return {off.x(), off.y(), off.z(), yaw, pitch, g.preshape};
}

}  // namespace

double TabulatedGraspModel::success(const GraspConfig& g, const ObjectSummary& o) const {
  return stable_sigmoid(interpolate(grasp_coords(g, o)));
}

GraspGrad TabulatedGraspModel::gradient(const GraspConfig& g, const ObjectSummary& o) const {
  std::array<double, kAxes> du;
  auto u = grasp_coords(g, o);
  double z = interpolate(u, &du);
  double f = stable_sigmoid(z);
  double sf = f * (1.0 - f);

  GraspGrad out = GraspGrad::Zero();
  out.head<3>() = sf * Vec3(du[0], du[1], du[2]);
  // yaw/pitch of the approach axis back to a rotation increment
  Vec3 a = g.palm_pose.rotation().col(0);
  double hxy = std::max(a.x() * a.x() + a.y() * a.y(), 1e-9);
  Vec3 grad_a = Vec3(-a.y(), a.x(), 0.0) / hxy * du[3];
  double cz = std::sqrt(std::max(1.0 - a.z() * a.z(), 1e-9));
  grad_a += Vec3(0, 0, 1.0 / cz) * du[4];
  out.segment<3>(3) = sf * a.cross(grad_a);
  out[6] = sf * du[5];
  return out;
}

std::shared_ptr<TabulatedGraspModel> load_tabulated_model(std::istream& is) {
  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, "GMOD1", 5) != 0)
    throw ParameterError("load_tabulated_model: bad magic");
  auto m = std::make_shared<TabulatedGraspModel>();
  int32_t n[TabulatedGraspModel::kAxes];
  is.read(reinterpret_cast<char*>(n), sizeof(n));
  double range[2 * TabulatedGraspModel::kAxes];
  is.read(reinterpret_cast<char*>(range), sizeof(range));
  if (!is) throw ParameterError("load_tabulated_model: truncated header");
  size_t total = 1;
  for (int a = 0; a < TabulatedGraspModel::kAxes; ++a) {
    if (n[a] < 1) throw ParameterError("load_tabulated_model: bad sample count");
    m->counts[a] = n[a];
    m->lo[a] = range[2 * a];
    m->hi[a] = range[2 * a + 1];
    if (n[a] > 1 && !(m->hi[a] > m->lo[a]))
      throw ParameterError("load_tabulated_model: non-monotonic axis range");
    total *= static_cast<size_t>(n[a]);
  }
  m->logits.resize(total);
  is.read(reinterpret_cast<char*>(m->logits.data()),
          static_cast<std::streamsize>(total * sizeof(float)));
  if (!is) throw ParameterError("load_tabulated_model: truncated payload");
  return m;
}

void save_tabulated_model(const TabulatedGraspModel& m, std::ostream& os) {
  os.write("GMOD1", 5);
  int32_t n[TabulatedGraspModel::kAxes];
  double range[2 * TabulatedGraspModel::kAxes];
  for (int a = 0; a < TabulatedGraspModel::kAxes; ++a) {
    n[a] = m.counts[a];
    range[2 * a] = m.lo[a];
    range[2 * a + 1] = m.hi[a];
  }
  os.write(reinterpret_cast<const char*>(n), sizeof(n));
  os.write(reinterpret_cast<const char*>(range), sizeof(range));
  os.write(reinterpret_cast<const char*>(m.logits.data()),
           static_cast<std::streamsize>(m.logits.size() * sizeof(float)));
}

GraspPrior default_prior(const ObjectSummary& o, const SurrogateParams& p) {
  double h_z = o.aabb_half.z();
  double h_xy = std::max(o.aabb_half.x(), o.aabb_half.y());

  auto preshape_for = [&](double width) {
    double opening = width + 0.01;
    return std::clamp((opening - p.opening_c0) / p.opening_c1, p.preshape_min, p.preshape_max);
  };

  GraspPrior prior;

  // Top mode: approach straight down, close across the smaller horizontal span.
  GraspPriorComponent top;
  {
    Vec3 x = -Vec3::UnitZ();
    Vec3 y = (o.aabb_half.x() <= o.aabb_half.y()) ? Vec3::UnitX() : Vec3::UnitY();
    Mat3 R;
    R.col(0) = x;
    R.col(1) = y;
    R.col(2) = x.cross(y);
    top.mean_pose = Pose3::from_matrix(Vec3(0, 0, h_z + p.standoff), R);
    top.mean_preshape = preshape_for(2.0 * std::min(o.aabb_half.x(), o.aabb_half.y()));
  }

  // Side mode: approach along the smaller horizontal axis, close across height.
  GraspPriorComponent side;
  {
    Vec3 m = (o.aabb_half.x() <= o.aabb_half.y()) ? Vec3::UnitX() : Vec3::UnitY();
    double h_m = (o.aabb_half.x() <= o.aabb_half.y()) ? o.aabb_half.x() : o.aabb_half.y();
    Mat3 R;
    R.col(0) = m;
    R.col(1) = Vec3::UnitZ();
    R.col(2) = m.cross(Vec3::UnitZ());
    side.mean_pose = Pose3::from_matrix(-(h_m + p.standoff) * m, R);
    side.mean_preshape = preshape_for(2.0 * h_z);
  }

  double wt = h_xy, ws = h_z;
  double norm = wt + ws;
  top.weight = wt / norm;
  side.weight = ws / norm;
  GraspGrad sd;
  sd << 0.02, 0.02, 0.02, 0.15, 0.15, 0.15, 0.1;
  top.stddev = sd;
  side.stddev = sd;
  prior.components = {top, side};
  return prior;
}

std::vector<GraspConfig> sample_prior(const GraspPrior& prior, const ObjectSummary& o, int n,
                                      uint64_t seed) {
  if (n < 1) throw ParameterError("sample_prior: n must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Pose3 object_frame(o.centroid, Quat::Identity());
  std::vector<GraspConfig> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    double r = uni(rng);
    size_t ci = 0;
    double acc = 0.0;
    for (size_t c = 0; c < prior.components.size(); ++c) {
      acc += prior.components[c].weight;
      if (r <= acc || c + 1 == prior.components.size()) {
        ci = c;
        break;
      }
    }
    const auto& comp = prior.components[ci];
    GraspGrad eta;
    for (int k = 0; k < 7; ++k) eta[k] = gauss(rng) * comp.stddev[k];
    Pose3 local(comp.mean_pose.t + eta.head<3>(),
                Quat(exp_so3(eta.segment<3>(3)) * comp.mean_pose.rotation()));
    GraspConfig g;
    g.palm_pose = object_frame.compose(local);
    g.preshape = comp.mean_preshape + eta[6];
    out.push_back(g);
  }
  return out;
}

}  // namespace pnp
