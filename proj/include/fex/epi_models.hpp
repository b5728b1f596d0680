#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fex/dataset.hpp"

namespace fex {

enum class ModelKind { SIR, SEIR, SEIRD };

std::size_t model_dim(ModelKind kind);
std::vector<std::string> model_var_names(ModelKind kind);
std::string_view model_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

/// Compartmental rate constants. `nu_rate` is the immunity-acquisition rate
/// of the SEIR model.
struct EpiParams {
  double beta = 0.9;
  double gamma = 0.2;
  double mu = 0.3;
  double sigma = 0.6;
  double nu_rate = 0.2;
  double delta = 0.05;
  double n_pop = 1.0;

  /// Throws std::invalid_argument on a negative rate or non-positive population.
  void validate() const;

  /// Published synthetic-experiment values; sigma is 0.6 for SEIR and 0.5 for SEIRD.
  static EpiParams defaults_for(ModelKind kind);
};

/// dx/dt of the chosen model.
std::vector<double> vector_field(ModelKind kind, const EpiParams& params, std::span<const double> x);

struct GeneratorOptions {
  std::size_t n_traj = 200;
  std::size_t steps = 250;
  double dt = 0.2;
  /// Rescale the U(0,1) initial draws to sum to one.
  bool normalize_initial = true;
  std::uint64_t seed = 0;
};

/// Explicit-Euler trajectories from random initial states. Trajectory t uses
/// its own RNG stream derived from (seed, t), so results do not depend on
/// generation order.
TrajectoryDataset generate_trajectories(ModelKind kind, const EpiParams& params, const GeneratorOptions& options);

/// Whole-trajectory split after a seeded shuffle; the train part receives
/// round(fraction * n) trajectories, clamped so both sides are nonempty.
std::pair<TrajectoryDataset, TrajectoryDataset> train_test_split(const TrajectoryDataset& data, double train_fraction,
                                                                 std::uint64_t seed);

}  // namespace fex
