#include "fex/forecast.hpp"

#include <cmath>
#include <stdexcept>

namespace fex {

namespace {

void check_shapes(std::span<const Trajectory> predicted, std::span<const Trajectory> truth) {
  if (predicted.empty() || predicted.size() != truth.size())
    throw std::invalid_argument("per_step_mse: trajectory counts differ or are zero");
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (predicted[t].rows() != truth[0].rows() || truth[t].rows() != truth[0].rows())
      throw std::invalid_argument("per_step_mse: trajectory lengths differ");
    if (predicted[t].dim() != truth[0].dim() || truth[t].dim() != truth[0].dim())
      throw std::invalid_argument("per_step_mse: dimensions differ");
  }
  if (truth[0].rows() < 2) throw std::invalid_argument("per_step_mse: need at least one step");
}

// component < 0 pools every component
std::vector<double> step_errors(std::span<const Trajectory> predicted, std::span<const Trajectory> truth,
                                long component) {
  check_shapes(predicted, truth);
  const std::size_t steps = truth[0].steps();
  const std::size_t d = truth[0].dim();
  if (component >= static_cast<long>(d)) throw std::invalid_argument("per_step_mse: component out of range");
  const std::size_t first = component < 0 ? 0 : static_cast<std::size_t>(component);
  const std::size_t last = component < 0 ? d : first + 1;
  const double count = static_cast<double>(truth.size() * (last - first));

  std::vector<double> mse(steps, 0.0);
  for (std::size_t s = 1; s <= steps; ++s) {
    double sum = 0.0;
    for (std::size_t t = 0; t < truth.size(); ++t)
      for (std::size_t i = first; i < last; ++i) {
        const double e = predicted[t].at(s, i) - truth[t].at(s, i);
        sum += e * e;
      }
    mse[s - 1] = sum / count;
  }
  return mse;
}

std::vector<Trajectory> persistence_predictions(std::span<const Trajectory> truth) {
  std::vector<Trajectory> constant;
  for (const auto& trajectory : truth) {
    Trajectory repeated;
    for (std::size_t s = 0; s < trajectory.rows(); ++s) repeated.append_row(trajectory.row(0));
    constant.push_back(std::move(repeated));
  }
  return constant;
}

}  // namespace

std::string_view rollout_mode_name(RolloutMode mode) {
  return mode == RolloutMode::Autonomous ? "autonomous" : "teacher_forced";
}

RolloutMode parse_rollout_mode(std::string_view name) {
  if (name == "autonomous") return RolloutMode::Autonomous;
  if (name == "teacher_forced" || name == "teacher-forced") return RolloutMode::TeacherForced;
  throw std::invalid_argument("unknown rollout mode '" + std::string(name) + "'");
}

Rollout rollout(const SystemModel& model, std::span<const double> init, std::size_t steps, double dt,
                RolloutMode mode, const Trajectory* truth) {
  const std::size_t d = model.dim();
  if (init.size() != d) throw std::invalid_argument("rollout: initial state has the wrong dimension");
  if (mode == RolloutMode::TeacherForced) {
    if (truth == nullptr || truth->rows() < steps + 1 || truth->dim() != d)
      throw std::invalid_argument("rollout: teacher-forced mode needs ground truth covering every step");
  }

  Rollout out;
  out.states.append_row(init);
  std::vector<double> current(init.begin(), init.end());
  std::vector<double> rate(d);
  std::vector<double> next(d);
  for (std::size_t s = 1; s <= steps; ++s) {
    if (mode == RolloutMode::TeacherForced) {
      const auto row = truth->row(s - 1);
      current.assign(row.begin(), row.end());
    }
    model.evaluate_into(current, rate);
    bool finite = true;
    for (std::size_t i = 0; i < d; ++i) {
      next[i] = current[i] + dt * rate[i];
      finite = finite && std::isfinite(next[i]);
    }
    if (!finite) {
      out.ok = false;
      out.failed_step = s;
      break;
    }
    out.states.append_row(next);
    current = next;
  }
  return out;
}

std::vector<double> per_step_mse(std::span<const Trajectory> predicted, std::span<const Trajectory> truth) {
  return step_errors(predicted, truth, -1);
}

std::vector<double> per_step_component_mse(std::span<const Trajectory> predicted, std::span<const Trajectory> truth,
                                           std::size_t component) {
  return step_errors(predicted, truth, static_cast<long>(component));
}

std::vector<double> persistence_baseline(std::span<const Trajectory> truth) {
  if (truth.empty()) throw std::invalid_argument("persistence_baseline: no trajectories");
  const auto constant = persistence_predictions(truth);
  return per_step_mse(constant, truth);
}

std::vector<double> persistence_component_mse(std::span<const Trajectory> truth, std::size_t component) {
  if (truth.empty()) throw std::invalid_argument("persistence_baseline: no trajectories");
  const auto constant = persistence_predictions(truth);
  return per_step_component_mse(constant, truth, component);
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace fex
