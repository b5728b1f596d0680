#include "fex/optim.hpp"

#include <cmath>
#include <string>

namespace fex {

namespace {

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

void OptimConfig::validate() const {
  auto require = [](bool ok, const char* field, const char* what) {
    if (!ok) throw std::invalid_argument(std::string(field) + ": " + what);
  };
  require(t1_iters >= 0, "t1_iters", "must be >= 0");
  require(t2_iters >= 0, "t2_iters", "must be >= 0");
  require(t3_iters >= 0, "t3_iters", "must be >= 0");
  require(lr_first > 0.0, "lr_first", "must be > 0");
  require(lr_finetune > 0.0, "lr_finetune", "must be > 0");
  require(lr_finetune < lr_first, "lr_finetune", "must be smaller than lr_first");
  require(grad_tol >= 0.0, "grad_tol", "must be >= 0");
  require(armijo_c > 0.0 && armijo_c < 1.0, "armijo_c", "must lie in (0, 1)");
  require(backtrack_factor > 0.0 && backtrack_factor < 1.0, "backtrack_factor", "must lie in (0, 1)");
}

OptimResult minimize_first_order(const Objective& loss, const Eigen::VectorXd& init, int iters, double lr) {
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;

  const Eigen::Index n = init.size();
  Eigen::VectorXd params = init;
  Eigen::VectorXd grad(n);
  double value = loss(params, &grad);
  if (!std::isfinite(value) || !all_finite(grad)) throw NonFiniteLoss("first-order stage: loss not finite at init");

  OptimResult best{params, value, 0, false, OptimStatus::MaxIterations};
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  double beta1_power = 1.0;
  double beta2_power = 1.0;

  for (int k = 1; k <= iters; ++k) {
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    beta1_power *= beta1;
    beta2_power *= beta2;
    const double step = lr * std::sqrt(1.0 - beta2_power) / (1.0 - beta1_power);
    params -= step * (m.array() / (v.array().sqrt() + eps)).matrix();

    value = loss(params, &grad);
    best.iterations_used = k;
    if (!std::isfinite(value) || !all_finite(grad)) break;
    if (value < best.final_loss) {
      best.final_params = params;
      best.final_loss = value;
    }
  }
  return best;
}

OptimResult minimize_bfgs(const Objective& loss, const Eigen::VectorXd& init, const BfgsOptions& options) {
  const Eigen::Index n = init.size();
  Eigen::VectorXd x = init;
  Eigen::VectorXd g(n);
  double fx = loss(x, &g);
  if (!std::isfinite(fx) || !all_finite(g)) throw NonFiniteLoss("BFGS stage: loss not finite at init");

  OptimResult result{x, fx, 0, false, OptimStatus::MaxIterations};
  if (g.norm() <= options.grad_tol) {
    result.converged = true;
    result.status = OptimStatus::Converged;
    return result;
  }

  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  Eigen::VectorXd x_new(n);
  Eigen::VectorXd g_new(n);

  for (int k = 1; k <= options.max_iters; ++k) {
    Eigen::VectorXd direction = -h_inv * g;
    double slope = g.dot(direction);
    if (!(slope < 0.0)) {
      // lost positive definiteness numerically; restart from steepest descent
      h_inv.setIdentity();
      direction = -g;
      slope = -g.squaredNorm();
    }

    double t = 1.0;
    double f_new = 0.0;
    bool accepted = false;
    for (int backtrack = 0; backtrack <= options.max_backtracks; ++backtrack) {
      x_new = x + t * direction;
      f_new = loss(x_new, &g_new);
      if (std::isfinite(f_new) && f_new <= fx + options.armijo_c * t * slope) {
        accepted = true;
        break;
      }
      t *= options.backtrack_factor;
    }
    if (!accepted) {
      result.status = OptimStatus::LineSearchFailure;
      result.iterations_used = k - 1;
      return result;
    }

    if (!all_finite(g_new)) {
      result.status = OptimStatus::LineSearchFailure;
      result.iterations_used = k - 1;
      return result;
    }
    const Eigen::VectorXd s = x_new - x;
    if (s.squaredNorm() == 0.0) {
      // the step vanished in floating point; no further progress is possible
      result.status = OptimStatus::LineSearchFailure;
      result.iterations_used = k - 1;
      return result;
    }
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    // relative test: the residual losses live on a dt^2 scale where an
    // absolute floor would reject every update
    if (sy > options.curvature_eps * s.norm() * y.norm()) {
      if (!scaled) {
        h_inv *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h_inv * y;
      // H+ = (I - rho s y')H(I - rho y s') + rho s s'
      h_inv += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }

    x = x_new;
    g = g_new;
    fx = f_new;
    result.final_params = x;
    result.final_loss = fx;
    result.iterations_used = k;
    if (g.norm() <= options.grad_tol) {
      result.converged = true;
      result.status = OptimStatus::Converged;
      return result;
    }
  }
  return result;
}

OptimResult two_stage_minimize(const Objective& loss, const Eigen::VectorXd& init, const OptimConfig& cfg) {
  const OptimResult first = minimize_first_order(loss, init, cfg.t1_iters, cfg.lr_first);
  BfgsOptions options;
  options.max_iters = cfg.t2_iters;
  options.grad_tol = cfg.grad_tol;
  options.armijo_c = cfg.armijo_c;
  options.backtrack_factor = cfg.backtrack_factor;
  OptimResult second = minimize_bfgs(loss, first.final_params, options);
  second.iterations_used += first.iterations_used;
  return second;
}

}  // namespace fex
