#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fex/dataset.hpp"

namespace fex {

enum class CsvErrorKind { Io, EmptyFile, BadHeader, MissingColumn, NonNumericCell, RaggedRow, BadDate, TooFewRows };

/// Data-file error with the 1-based line and column where it was detected
/// (0 when not tied to a cell).
class CsvError : public DataError {
 public:
  CsvError(CsvErrorKind kind, const std::string& message, std::size_t line = 0, std::size_t column = 0);

  CsvErrorKind kind() const { return kind_; }
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  CsvErrorKind kind_;
  std::size_t line_;
  std::size_t column_;
};

struct CsvTable {
  TrajectoryDataset data;
  /// ISO-8601 dates for real-data files, one per row; empty otherwise.
  std::vector<std::string> dates;
};

/// Reads either layout:
///   trajectory_id,step,<var1>,...,<vard>   (one or more trajectories)
///   date,<var1>,...,<vard>                 (a single dated series)
/// When `expected_columns` is nonempty the dataset keeps exactly those
/// variables in that order. `dt` becomes the dataset step size.
CsvTable read_csv(std::istream& in, const std::vector<std::string>& expected_columns = {}, double dt = 1.0);
CsvTable load_csv(const std::filesystem::path& path, const std::vector<std::string>& expected_columns = {},
                  double dt = 1.0);

/// Trajectory layout with shortest round-trip number formatting.
void write_csv(std::ostream& out, const TrajectoryDataset& data);
void save_csv(const std::filesystem::path& path, const TrajectoryDataset& data);

/// Dated single-series layout; `dates` must match the row count.
void save_dated_csv(const std::filesystem::path& path, const TrajectoryDataset& data,
                    const std::vector<std::string>& dates);

std::string format_double(double value);

enum class NormalizationMode { None, ByConstant, ByMaxTotal };

std::string_view normalization_name(NormalizationMode mode);
NormalizationMode parse_normalization(std::string_view name);

struct ScaleRecord {
  NormalizationMode mode = NormalizationMode::None;
  /// Every stored value equals original / scale.
  double scale = 1.0;
};

/// `constant` is required for ByConstant and ignored otherwise. ByMaxTotal
/// divides by the largest row sum over all trajectories.
std::pair<TrajectoryDataset, ScaleRecord> normalize_series(const TrajectoryDataset& data, NormalizationMode mode,
                                                           std::optional<double> constant = std::nullopt);
TrajectoryDataset denormalize(const TrajectoryDataset& data, const ScaleRecord& record);

}  // namespace fex
