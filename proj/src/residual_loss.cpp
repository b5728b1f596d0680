#include "fex/residual_loss.hpp"

#include <cmath>

namespace fex {

ResidualProblem::ResidualProblem(const TrajectoryDataset& data, std::size_t component)
    : dim_(data.dim()), component_(component), dt_(data.dt) {
  data.validate();
  if (component >= dim_)
    throw std::invalid_argument("residual loss: component " + std::to_string(component) + " out of range for d=" +
                                std::to_string(dim_));
  inputs_.reserve(data.total_pairs() * dim_);
  increments_.reserve(data.total_pairs());
  for (const auto& trajectory : data.trajectories) {
    for (std::size_t s = 0; s < trajectory.steps(); ++s) {
      const auto row = trajectory.row(s);
      inputs_.insert(inputs_.end(), row.begin(), row.end());
      increments_.push_back(trajectory.at(s + 1, component) - trajectory.at(s, component));
    }
  }
}

double ResidualProblem::loss(const CompiledExpression& expr, std::span<const double> params) const {
  if (expr.input_dim() != dim_) throw std::invalid_argument("residual loss: expression input_dim mismatch");
  double sum = 0.0;
  const std::size_t n = increments_.size();
  for (std::size_t s = 0; s < n; ++s) {
    const double phi = expr.evaluate_with(params, {inputs_.data() + s * dim_, dim_});
    const double r = increments_[s] - dt_ * phi;
    sum += r * r;
  }
  const double value = sum / static_cast<double>(n);
  return std::isfinite(value) ? value : kLossSentinel;
}

double ResidualProblem::loss_and_gradient(const CompiledExpression& expr, std::span<const double> params,
                                          std::vector<double>& grad) const {
  if (expr.input_dim() != dim_) throw std::invalid_argument("residual loss: expression input_dim mismatch");
  grad.assign(expr.param_count(), 0.0);
  const std::size_t n = increments_.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> dphi(expr.param_count());
  double sum = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(dphi.begin(), dphi.end(), 0.0);
    const double phi = expr.accumulate_gradient(params, {inputs_.data() + s * dim_, dim_}, 1.0, dphi);
    const double r = increments_[s] - dt_ * phi;
    sum += r * r;
    const double weight = -2.0 * dt_ * inv_n * r;
    for (std::size_t k = 0; k < dphi.size(); ++k) grad[k] += weight * dphi[k];
  }
  const double value = sum * inv_n;
  if (!std::isfinite(value)) return kLossSentinel;
  return value;
}

Objective ResidualProblem::objective(const CompiledExpression& expr) const {
  return [this, &expr](const Eigen::VectorXd& params, Eigen::VectorXd* grad) {
    const std::span<const double> view(params.data(), static_cast<std::size_t>(params.size()));
    if (grad == nullptr) return loss(expr, view);
    std::vector<double> g;
    const double value = loss_and_gradient(expr, view, g);
    *grad = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
    return value;
  };
}

double euler_residual_loss(const CompiledExpression& expr, const TrajectoryDataset& data, std::size_t component) {
  return ResidualProblem(data, component).loss(expr, expr.params().values);
}

LossAndGradient loss_and_gradient(const CompiledExpression& expr, const TrajectoryDataset& data,
                                  std::size_t component) {
  LossAndGradient out;
  out.loss = ResidualProblem(data, component).loss_and_gradient(expr, expr.params().values, out.gradient);
  return out;
}

}  // namespace fex
