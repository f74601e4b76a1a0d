#include "pnp/solver.hpp"

#include <deque>
#include <limits>

namespace pnp {

BoxBounds BoxBounds::unbounded(int n) {
  BoxBounds b;
  b.lo = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  b.hi = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  return b;
}

Eigen::VectorXd BoxBounds::project(const Eigen::VectorXd& x) const {
  return x.cwiseMax(lo).cwiseMin(hi);
}

InnerResult projected_lbfgs(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                            const BoxBounds& bounds, const SolverSettings& s) {
  if (bounds.lo.size() != x0.size() || bounds.hi.size() != x0.size())
    throw ParameterError("projected_lbfgs: bounds dimension mismatch");

  InnerResult out;
  out.x = bounds.project(x0);
  Eigen::VectorXd g(x0.size());
  out.value = f(out.x, &g);

  std::deque<Eigen::VectorXd> S, Y;
  std::deque<double> rho;

  for (out.iterations = 0; out.iterations < s.max_inner_iters; ++out.iterations) {
    if (s.on_iterate) s.on_iterate(out.x);
    out.projected_grad_norm = (out.x - bounds.project(out.x - g)).norm();
    if (out.projected_grad_norm <= s.grad_tol) {
      out.converged = true;
      break;
    }

    // two-loop recursion
    Eigen::VectorXd d = -g;
    std::vector<double> alpha(S.size());
    for (int i = int(S.size()) - 1; i >= 0; --i) {
      alpha[i] = rho[i] * S[i].dot(d);
      d -= alpha[i] * Y[i];
    }
    if (!S.empty()) d *= S.back().dot(Y.back()) / Y.back().squaredNorm();
    for (size_t i = 0; i < S.size(); ++i) {
      double beta = rho[i] * Y[i].dot(d);
      d += (alpha[i] - beta) * S[i];
    }
    if (d.dot(g) >= 0.0) d = -g;  // curvature breakdown, fall back

    // Armijo backtracking along the projected arc
    double step = 1.0;
    Eigen::VectorXd x_new;
    double f_new = out.value;
    bool accepted = false;
    bool first_trial = true;
    auto line_search = [&]() {
      step = 1.0;
      first_trial = true;
      accepted = false;
      while (step > 1e-14) {
        x_new = bounds.project(out.x + step * d);
        Eigen::VectorXd dx = x_new - out.x;
        if (dx.norm() == 0.0) break;
        f_new = f(x_new, nullptr);
        if (f_new <= out.value + s.armijo_c * g.dot(dx)) {
          accepted = true;
          break;
        }
        step *= 0.5;
        first_trial = false;
      }
    };
    line_search();
    if (!accepted && !S.empty()) {
      // stale curvature can poison the direction; retry along steepest descent
      S.clear();
      Y.clear();
      rho.clear();
      d = -g;
      line_search();
    }
    // if the unit step was accepted outright the model may be underscaled;
    // expand while the Armijo decrease keeps improving
    if (accepted && first_trial) {
      for (int k = 0; k < 30; ++k) {
        double step2 = step * 2.0;
        Eigen::VectorXd x2 = bounds.project(out.x + step2 * d);
        Eigen::VectorXd dx2 = x2 - out.x;
        if ((x2 - x_new).norm() == 0.0) break;
        double f2 = f(x2, nullptr);
        if (f2 < f_new && f2 <= out.value + s.armijo_c * g.dot(dx2)) {
          step = step2;
          x_new = x2;
          f_new = f2;
        } else {
          break;
        }
      }
    }
    if (!accepted) {
      out.converged = out.projected_grad_norm <= 10 * s.grad_tol;
      break;
    }

    Eigen::VectorXd g_new(x0.size());
    f_new = f(x_new, &g_new);
    Eigen::VectorXd sk = x_new - out.x;
    Eigen::VectorXd yk = g_new - g;
    double sy = sk.dot(yk);
    if (sy > 1e-12 * sk.norm() * yk.norm()) {
      S.push_back(sk);
      Y.push_back(yk);
      rho.push_back(1.0 / sy);
      if (int(S.size()) > s.lbfgs_memory) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }
    out.x = x_new;
    out.value = f_new;
    g = g_new;
  }
  out.projected_grad_norm = (out.x - bounds.project(out.x - g)).norm();
  return out;
}

namespace {

double violation_of(const Eigen::VectorXd& eq, const Eigen::VectorXd& ineq) {
  double v = 0.0;
  for (int i = 0; i < eq.size(); ++i) v = std::max(v, std::abs(eq[i]));
  for (int i = 0; i < ineq.size(); ++i) v = std::max(v, ineq[i]);
  return v;
}

}  // namespace

AlResult augmented_lagrangian(const ObjectiveFn& f, const ConstraintFn& eq,
                              const ConstraintFn& ineq, const Eigen::VectorXd& x0,
                              const BoxBounds& bounds, const SolverSettings& s) {
  AlResult out;
  out.x = bounds.project(x0);

  Eigen::VectorXd lambda_eq, lambda_ineq;
  if (eq) lambda_eq = Eigen::VectorXd::Zero(eq(out.x, nullptr).size());
  if (ineq) lambda_ineq = Eigen::VectorXd::Zero(ineq(out.x, nullptr).size());
  double mu = s.mu0;
  double prev_violation = std::numeric_limits<double>::infinity();

  for (out.outer_iterations = 0; out.outer_iterations < s.max_outer_iters;
       ++out.outer_iterations) {
    auto al = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
      Eigen::VectorXd gf;
      double v = f(x, grad ? &gf : nullptr);
      if (grad) *grad = gf;
      if (eq) {
        Eigen::MatrixXd J;
        Eigen::VectorXd c = eq(x, grad ? &J : nullptr);
        v += lambda_eq.dot(c) + 0.5 * mu * c.squaredNorm();
        if (grad) *grad += J.transpose() * (lambda_eq + mu * c);
      }
      if (ineq) {
        Eigen::MatrixXd J;
        Eigen::VectorXd c = ineq(x, grad ? &J : nullptr);
        for (int i = 0; i < c.size(); ++i) {
          double t = std::max(0.0, lambda_ineq[i] + mu * c[i]);
          v += (t * t - lambda_ineq[i] * lambda_ineq[i]) / (2.0 * mu);
          if (grad && t > 0.0) *grad += t * J.row(i).transpose();
        }
      }
      return v;
    };

    InnerResult inner = projected_lbfgs(al, out.x, bounds, s);
    out.x = inner.x;
    out.inner_iterations += inner.iterations;

    out.eq_residual = eq ? eq(out.x, nullptr) : Eigen::VectorXd();
    out.ineq_residual = ineq ? ineq(out.x, nullptr) : Eigen::VectorXd();
    out.max_violation = violation_of(out.eq_residual, out.ineq_residual);
    out.objective = f(out.x, nullptr);

    if (out.max_violation <= s.constraint_tol && inner.converged) {
      out.converged = true;
      ++out.outer_iterations;
      break;
    }

    if (eq)
      lambda_eq = (lambda_eq + mu * out.eq_residual)
                      .cwiseMax(-s.lambda_max)
                      .cwiseMin(s.lambda_max);
    for (int i = 0; i < lambda_ineq.size(); ++i)
      lambda_ineq[i] =
          std::min(std::max(0.0, lambda_ineq[i] + mu * out.ineq_residual[i]), s.lambda_max);
    if (out.max_violation > prev_violation / s.violation_shrink)
      mu = std::min(mu * s.mu_growth, s.mu_max);
    prev_violation = out.max_violation;
  }
  return out;
}

}  // namespace pnp
