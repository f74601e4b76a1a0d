#pragma once

#include <cstdint>
#include <memory>

#include "pnp/geom.hpp"

namespace pnp {

// Palm pose plus the one-dimensional finger-spread preshape.
struct GraspConfig {
  Pose3 palm_pose;
  double preshape = 0.0;
};

// Gradient layout shared by all grasp models and the planner:
// (palm translation xyz, world-frame rotation increment xyz, preshape).
using GraspGrad = Eigen::Matrix<double, 7, 1>;

struct ObjectSummary {
  Vec3 centroid = Vec3::Zero();
  Mat3 axes = Mat3::Identity();    // principal axes as columns, extents-descending
  Vec3 extents = Vec3::Zero();     // half-ranges of projections onto axes
  Vec3 aabb_half = Vec3::Zero();   // world axis-aligned half extents
  PointCloud cloud;
};

class GraspModel {
 public:
  virtual ~GraspModel() = default;
  virtual double success(const GraspConfig& g, const ObjectSummary& o) const = 0;
  virtual GraspGrad gradient(const GraspConfig& g, const ObjectSummary& o) const = 0;
};

struct SurrogateParams {
  double w_dist = 1.0;
  double w_align = 3.0;  // sigma(3) at the ideal configuration
  double w_width = 1.0;
  double bias = 0.0;
  double sigma_p = 0.05;     // m, position falloff
  double sigma_w = 0.02;     // m, width-mismatch falloff
  double standoff = 0.12;    // m, palm to centroid along the approach axis
  double opening_c0 = 0.02;  // opening = c0 + c1 * preshape
  double opening_c1 = 0.06;
  double preshape_min = 0.0;
  double preshape_max = 1.4;
};

// Analytic differentiable stand-in for a learned grasp classifier. Approach
// axis is the palm frame x-axis; fingers close along the palm y-axis.
class SurrogateGraspModel : public GraspModel {
 public:
  explicit SurrogateGraspModel(SurrogateParams p = {}) : p_(p) {}
  double success(const GraspConfig& g, const ObjectSummary& o) const override;
  GraspGrad gradient(const GraspConfig& g, const ObjectSummary& o) const override;
  const SurrogateParams& params() const { return p_; }

 private:
  double logit(const GraspConfig& g, const ObjectSummary& o, GraspGrad* grad) const;
  SurrogateParams p_;
};

// Success logits sampled on a regular 6D grid over (palm offset in the object
// frame, approach yaw, approach pitch, preshape); multilinear interpolation,
// clamped to the boundary outside the sampled ranges.
class TabulatedGraspModel : public GraspModel {
 public:
  static constexpr int kAxes = 6;
  std::array<int, kAxes> counts{};
  std::array<double, kAxes> lo{};
  std::array<double, kAxes> hi{};
  std::vector<float> logits;  // axis 0 fastest

  double success(const GraspConfig& g, const ObjectSummary& o) const override;
  GraspGrad gradient(const GraspConfig& g, const ObjectSummary& o) const override;

  double interpolate(const std::array<double, kAxes>& u,
                     std::array<double, kAxes>* dlogit = nullptr) const;
};

std::shared_ptr<TabulatedGraspModel> load_tabulated_model(std::istream& is);
void save_tabulated_model(const TabulatedGraspModel& m, std::ostream& os);

struct GraspPriorComponent {
  double weight = 0.5;
  Pose3 mean_pose;          // palm pose in the object (centroid) frame
  double mean_preshape = 0.5;
  GraspGrad stddev = GraspGrad::Zero();  // (pos 3, rot increment 3, preshape)
};

struct GraspPrior {
  std::vector<GraspPriorComponent> components;
};

ObjectSummary summarize_object(const PointCloud& z_o);
GraspPrior default_prior(const ObjectSummary& o, const SurrogateParams& p = {});
std::vector<GraspConfig> sample_prior(const GraspPrior& prior, const ObjectSummary& o, int n,
                                      uint64_t seed);

}  // namespace pnp
