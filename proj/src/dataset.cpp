#include "fex/dataset.hpp"

#include <cmath>

namespace fex {

Trajectory::Trajectory(std::size_t dim, std::vector<double> values) : dim_(dim), values_(std::move(values)) {
  if (dim_ == 0) throw DataError("trajectory: dimension must be >= 1");
  if (values_.size() % dim_ != 0) throw DataError("trajectory: value count is not a multiple of the dimension");
}

void Trajectory::append_row(std::span<const double> row) {
  if (dim_ == 0) dim_ = row.size();
  if (row.size() != dim_) throw DataError("trajectory: row has the wrong dimension");
  values_.insert(values_.end(), row.begin(), row.end());
}

Trajectory Trajectory::slice(std::size_t first, std::size_t last) const {
  if (first > last || last > rows()) throw DataError("trajectory: slice out of range");
  return Trajectory(dim_, std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(first * dim_),
                                              values_.begin() + static_cast<std::ptrdiff_t>(last * dim_)));
}

std::size_t TrajectoryDataset::total_pairs() const {
  std::size_t pairs = 0;
  for (const auto& trajectory : trajectories) pairs += trajectory.steps();
  return pairs;
}

void TrajectoryDataset::validate() const {
  if (trajectories.empty()) throw DataError("dataset: no trajectories");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DataError("dataset: dt must be positive and finite");
  if (var_names.empty()) throw DataError("dataset: no variables");
  for (std::size_t t = 0; t < trajectories.size(); ++t) {
    const auto& trajectory = trajectories[t];
    if (trajectory.dim() != dim())
      throw DataError("dataset: trajectory " + std::to_string(t) + " has dimension " +
                      std::to_string(trajectory.dim()) + ", expected " + std::to_string(dim()));
    if (trajectory.steps() < 1)
      throw DataError("dataset: trajectory " + std::to_string(t) + " needs at least two rows");
    for (double v : trajectory.values())
      if (!std::isfinite(v)) throw DataError("dataset: trajectory " + std::to_string(t) + " has a non-finite value");
  }
}

std::vector<std::string> default_var_names(std::size_t dim) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < dim; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

}  // namespace fex
