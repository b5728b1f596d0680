#pragma once

#include <limits>
#include <span>
#include <vector>

#include "fex/dataset.hpp"
#include "fex/expression.hpp"
#include "fex/optim.hpp"

namespace fex {

inline constexpr double kLossSentinel = std::numeric_limits<double>::infinity();

/// Euler one-step residuals for a single state component, pooled over every
/// consecutive pair of every trajectory:
///
///   L = 1/M_total * sum_s (x_i[s+1] - x_i[s] - dt * phi(x[s]))^2
///
/// The pairs are flattened once so repeated evaluations during a search only
/// touch contiguous memory. Summation order is fixed, so results are
/// bit-reproducible.
class ResidualProblem {
 public:
  ResidualProblem(const TrajectoryDataset& data, std::size_t component);

  std::size_t dim() const { return dim_; }
  std::size_t pairs() const { return increments_.size(); }
  double dt() const { return dt_; }
  std::size_t component() const { return component_; }

  /// +infinity when phi is non-finite on any sample.
  double loss(const CompiledExpression& expr, std::span<const double> params) const;
  /// Writes dL/dtheta into `grad` (resized to param_count) and returns L.
  double loss_and_gradient(const CompiledExpression& expr, std::span<const double> params,
                           std::vector<double>& grad) const;

  /// Objective over the parameter vector of `expr`'s structure.
  Objective objective(const CompiledExpression& expr) const;

 private:
  std::size_t dim_;
  std::size_t component_;
  double dt_;
  std::vector<double> inputs_;
  std::vector<double> increments_;
};

/// Component index is zero-based here.
double euler_residual_loss(const CompiledExpression& expr, const TrajectoryDataset& data, std::size_t component);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

LossAndGradient loss_and_gradient(const CompiledExpression& expr, const TrajectoryDataset& data,
                                  std::size_t component);

}  // namespace fex
