#pragma once

#include <Eigen/Core>
#include <functional>
#include <stdexcept>

namespace fex {

/// Loss and, when `grad` is non-null, its gradient at `params`.
using Objective = std::function<double(const Eigen::VectorXd& params, Eigen::VectorXd* grad)>;

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OptimConfig {
  int t1_iters = 150;
  int t2_iters = 30;
  int t3_iters = 100;
  double lr_first = 0.05;
  double lr_finetune = 0.005;
  double grad_tol = 1e-8;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

enum class OptimStatus { MaxIterations, Converged, LineSearchFailure };

struct OptimResult {
  Eigen::VectorXd final_params;
  double final_loss = 0.0;
  int iterations_used = 0;
  bool converged = false;
  OptimStatus status = OptimStatus::MaxIterations;
};

/// Adam with bias-corrected moments. Returns the best iterate seen, so the
/// reported loss never exceeds the loss at any evaluated point.
OptimResult minimize_first_order(const Objective& loss, const Eigen::VectorXd& init, int iters, double lr);

struct BfgsOptions {
  int max_iters = 30;
  double grad_tol = 1e-8;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  int max_backtracks = 50;
  /// Curvature pairs with s'y <= curvature_eps * |s| * |y| are skipped.
  double curvature_eps = 1e-10;
};

/// Dense inverse-Hessian BFGS with Armijo backtracking. The curvature update is
/// skipped when s'y is not safely positive relative to |s||y|. A line search that exhausts its backtracks ends
/// the run at the current iterate with status LineSearchFailure.
OptimResult minimize_bfgs(const Objective& loss, const Eigen::VectorXd& init, const BfgsOptions& options);

/// minimize_bfgs(minimize_first_order(init, t1_iters, lr_first), t2_iters).
OptimResult two_stage_minimize(const Objective& loss, const Eigen::VectorXd& init, const OptimConfig& cfg);

}  // namespace fex
