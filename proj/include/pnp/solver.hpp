#pragma once

#include <functional>

#include "pnp/geom.hpp"

namespace pnp {

// Box bounds; entries may be +-infinity for unbounded coordinates.
struct BoxBounds {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  static BoxBounds unbounded(int n);
  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
};

struct SolverSettings {
  int lbfgs_memory = 10;
  double armijo_c = 1e-4;
  double grad_tol = 1e-6;       // projected-gradient norm
  int max_inner_iters = 200;
  int max_outer_iters = 15;
  double mu0 = 10.0;            // initial penalty
  double mu_growth = 5.0;       // applied when violation fails to shrink
  double violation_shrink = 4.0;
  double mu_max = 1e8;          // penalty cap; runaway stiffness stalls the inner
  double lambda_max = 1e8;      // multiplier magnitude cap
  double constraint_tol = 1e-4;
  std::function<void(const Eigen::VectorXd&)> on_iterate;  // test hook
};

// value and gradient; gradient may be null when only the value is needed
using ObjectiveFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;
// residual vector and optional Jacobian (rows: residuals, cols: variables)
using ConstraintFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, Eigen::MatrixXd*)>;

struct InnerResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double projected_grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

InnerResult projected_lbfgs(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                            const BoxBounds& bounds, const SolverSettings& s = {});

struct AlResult {
  Eigen::VectorXd x;
  double objective = 0.0;       // f alone, no penalty terms
  double max_violation = 0.0;   // max |eq| and max(0, ineq)
  Eigen::VectorXd eq_residual;
  Eigen::VectorXd ineq_residual;
  int outer_iterations = 0;
  int inner_iterations = 0;
  bool converged = false;
};

// Minimize f over the box subject to eq(x) = 0 and ineq(x) <= 0, either of
// which may be empty. Inequalities use the shifted max(0, lambda + mu g)^2
// penalty; multipliers follow the standard first-order update.
AlResult augmented_lagrangian(const ObjectiveFn& f, const ConstraintFn& eq,
                              const ConstraintFn& ineq, const Eigen::VectorXd& x0,
                              const BoxBounds& bounds, const SolverSettings& s = {});

}  // namespace pnp
