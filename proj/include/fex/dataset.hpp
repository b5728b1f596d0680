#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fex {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major (M+1) x d block of states sampled every dt.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::size_t dim, std::vector<double> values);

  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
  /// Number of consecutive-row pairs, M.
  std::size_t steps() const { return rows() == 0 ? 0 : rows() - 1; }
  std::span<const double> row(std::size_t s) const { return {values_.data() + s * dim_, dim_}; }
  std::span<double> row(std::size_t s) { return {values_.data() + s * dim_, dim_}; }
  double at(std::size_t s, std::size_t i) const { return values_[s * dim_ + i]; }
  const std::vector<double>& values() const { return values_; }

  void append_row(std::span<const double> row);
  /// Rows [first, last).
  Trajectory slice(std::size_t first, std::size_t last) const;

  bool operator==(const Trajectory&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

enum class SplitTag { Train, Test, Full };

struct TrajectoryDataset {
  std::vector<Trajectory> trajectories;
  double dt = 1.0;
  std::vector<std::string> var_names;
  SplitTag split = SplitTag::Full;

  std::size_t dim() const { return var_names.size(); }
  /// Total number of consecutive pairs across all trajectories.
  std::size_t total_pairs() const;

  /// Throws DataError when shapes, dt, or values violate the dataset invariants.
  void validate() const;
};

std::vector<std::string> default_var_names(std::size_t dim);

}  // namespace fex
