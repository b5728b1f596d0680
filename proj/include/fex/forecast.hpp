#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fex/dataset.hpp"
#include "fex/search.hpp"

namespace fex {

enum class RolloutMode { TeacherForced, Autonomous };

std::string_view rollout_mode_name(RolloutMode mode);
RolloutMode parse_rollout_mode(std::string_view name);

struct Rollout {
  /// Row 0 is the initial state; row s is the prediction for step s.
  Trajectory states;
  bool ok = true;
  /// First step whose prediction was not finite (rollout truncated before it).
  std::optional<std::size_t> failed_step;
};

/// Explicit-Euler propagation. Autonomous mode feeds predictions forward;
/// teacher-forced mode steps from truth row s-1 and needs `truth` to cover
/// `steps` + 1 rows.
Rollout rollout(const SystemModel& model, std::span<const double> init, std::size_t steps, double dt,
                RolloutMode mode, const Trajectory* truth = nullptr);

/// Entry k-1 holds step k: the squared error pooled over trajectories and
/// components. Row 0 of each trajectory is the shared initial condition and
/// is not scored.
std::vector<double> per_step_mse(std::span<const Trajectory> predicted, std::span<const Trajectory> truth);

/// Same as per_step_mse restricted to one component.
std::vector<double> per_step_component_mse(std::span<const Trajectory> predicted, std::span<const Trajectory> truth,
                                           std::size_t component);

/// Per-step MSE of repeating row 0 of each truth trajectory.
std::vector<double> persistence_baseline(std::span<const Trajectory> truth);
std::vector<double> persistence_component_mse(std::span<const Trajectory> truth, std::size_t component);

double mean(std::span<const double> values);

}  // namespace fex
