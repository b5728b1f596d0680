#include "fex/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace fex {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  for (auto& c : cells) {
    const auto begin = c.find_first_not_of(" \t");
    const auto end = c.find_last_not_of(" \t");
    c = begin == std::string::npos ? std::string() : c.substr(begin, end - begin + 1);
  }
  return cells;
}

std::optional<double> parse_double(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) return std::nullopt;
  return value;
}

bool is_iso_date(const std::string& cell) {
  if (cell.size() != 10 || cell[4] != '-' || cell[7] != '-') return false;
  for (std::size_t k : {0, 1, 2, 3, 5, 6, 8, 9})
    if (cell[k] < '0' || cell[k] > '9') return false;
  const int month = std::stoi(cell.substr(5, 2));
  const int day = std::stoi(cell.substr(8, 2));
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

}  // namespace

CsvError::CsvError(CsvErrorKind kind, const std::string& message, std::size_t line, std::size_t column)
    : DataError(line == 0 ? message
                          : message + " (line " + std::to_string(line) +
                                (column == 0 ? std::string() : ", column " + std::to_string(column)) + ")"),
      kind_(kind),
      line_(line),
      column_(column) {}

std::string format_double(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  return ec == std::errc() ? std::string(buffer, ptr) : std::string("nan");
}

CsvTable read_csv(std::istream& in, const std::vector<std::string>& expected_columns, double dt) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    header = split_line(line);
    break;
  }
  if (header.empty()) throw CsvError(CsvErrorKind::EmptyFile, "csv: file is empty");

  const bool trajectory_layout = header.size() >= 2 && header[0] == "trajectory_id" && header[1] == "step";
  const bool dated_layout = !header.empty() && header[0] == "date";
  if (!trajectory_layout && !dated_layout)
    throw CsvError(CsvErrorKind::BadHeader, "csv: header must start with 'trajectory_id,step' or 'date'", line_no);
  const std::size_t first_var = trajectory_layout ? 2 : 1;
  if (header.size() <= first_var) throw CsvError(CsvErrorKind::BadHeader, "csv: no variable columns", line_no);

  std::vector<std::string> names(header.begin() + static_cast<std::ptrdiff_t>(first_var), header.end());
  std::vector<std::size_t> picked;
  if (expected_columns.empty()) {
    for (std::size_t k = 0; k < names.size(); ++k) picked.push_back(first_var + k);
  } else {
    for (const auto& want : expected_columns) {
      auto it = std::find(names.begin(), names.end(), want);
      if (it == names.end()) throw CsvError(CsvErrorKind::MissingColumn, "csv: missing column '" + want + "'", 1);
      picked.push_back(first_var + static_cast<std::size_t>(it - names.begin()));
    }
    names = expected_columns;
  }

  CsvTable table;
  table.data.dt = dt;
  table.data.var_names = names;
  std::string current_id;
  std::optional<long> last_step;
  std::vector<double> row(picked.size());

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw CsvError(CsvErrorKind::RaggedRow,
                     "csv: expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()),
                     line_no);
    for (std::size_t k = 0; k < picked.size(); ++k) {
      const auto value = parse_double(cells[picked[k]]);
      if (!value)
        throw CsvError(CsvErrorKind::NonNumericCell, "csv: non-numeric cell '" + cells[picked[k]] + "'", line_no,
                       picked[k] + 1);
      row[k] = *value;
    }
    if (dated_layout) {
      if (!is_iso_date(cells[0]))
        throw CsvError(CsvErrorKind::BadDate, "csv: date '" + cells[0] + "' is not YYYY-MM-DD", line_no, 1);
      table.dates.push_back(cells[0]);
      if (table.data.trajectories.empty()) table.data.trajectories.emplace_back();
      table.data.trajectories.back().append_row(row);
      continue;
    }
    const auto step = parse_double(cells[1]);
    if (!step || *step != std::floor(*step) || *step < 0)
      throw CsvError(CsvErrorKind::NonNumericCell, "csv: step must be a non-negative integer", line_no, 2);
    if (table.data.trajectories.empty() || cells[0] != current_id) {
      current_id = cells[0];
      table.data.trajectories.emplace_back();
      last_step.reset();
    }
    const auto step_value = static_cast<long>(*step);
    if (last_step && step_value != *last_step + 1)
      throw CsvError(CsvErrorKind::RaggedRow, "csv: steps must increase by one within a trajectory", line_no, 2);
    last_step = step_value;
    table.data.trajectories.back().append_row(row);
  }

  if (table.data.trajectories.empty()) throw CsvError(CsvErrorKind::EmptyFile, "csv: no data rows");
  for (std::size_t t = 0; t < table.data.trajectories.size(); ++t)
    if (table.data.trajectories[t].rows() < 2)
      throw CsvError(CsvErrorKind::TooFewRows,
                     "csv: trajectory " + std::to_string(t) + " has fewer than two rows (needs M >= 1)");
  return table;
}

CsvTable load_csv(const std::filesystem::path& path, const std::vector<std::string>& expected_columns, double dt) {
  std::ifstream in(path);
  if (!in) throw CsvError(CsvErrorKind::Io, "csv: cannot open '" + path.string() + "'");
  return read_csv(in, expected_columns, dt);
}

void write_csv(std::ostream& out, const TrajectoryDataset& data) {
  out << "trajectory_id,step";
  for (const auto& name : data.var_names) out << ',' << name;
  out << '\n';
  for (std::size_t t = 0; t < data.trajectories.size(); ++t) {
    const auto& trajectory = data.trajectories[t];
    for (std::size_t s = 0; s < trajectory.rows(); ++s) {
      out << t << ',' << s;
      for (double v : trajectory.row(s)) out << ',' << format_double(v);
      out << '\n';
    }
  }
}

void save_csv(const std::filesystem::path& path, const TrajectoryDataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CsvError(CsvErrorKind::Io, "csv: cannot write '" + path.string() + "'");
  write_csv(out, data);
}

void save_dated_csv(const std::filesystem::path& path, const TrajectoryDataset& data,
                    const std::vector<std::string>& dates) {
  if (data.trajectories.size() != 1 || data.trajectories[0].rows() != dates.size())
    throw DataError("csv: dated layout needs one trajectory with one date per row");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CsvError(CsvErrorKind::Io, "csv: cannot write '" + path.string() + "'");
  out << "date";
  for (const auto& name : data.var_names) out << ',' << name;
  out << '\n';
  const auto& trajectory = data.trajectories[0];
  for (std::size_t s = 0; s < trajectory.rows(); ++s) {
    out << dates[s];
    for (double v : trajectory.row(s)) out << ',' << format_double(v);
    out << '\n';
  }
}

std::string_view normalization_name(NormalizationMode mode) {
  switch (mode) {
    case NormalizationMode::None: return "none";
    case NormalizationMode::ByConstant: return "by_constant";
    case NormalizationMode::ByMaxTotal: return "by_max_total";
  }
  return "?";
}

NormalizationMode parse_normalization(std::string_view name) {
  if (name == "none") return NormalizationMode::None;
  if (name == "by_constant") return NormalizationMode::ByConstant;
  if (name == "by_max_total") return NormalizationMode::ByMaxTotal;
  throw std::invalid_argument("unknown normalization mode '" + std::string(name) + "'");
}

std::pair<TrajectoryDataset, ScaleRecord> normalize_series(const TrajectoryDataset& data, NormalizationMode mode,
                                                           std::optional<double> constant) {
  ScaleRecord record{mode, 1.0};
  switch (mode) {
    case NormalizationMode::None: return {data, record};
    case NormalizationMode::ByConstant:
      if (!constant) throw std::invalid_argument("normalize_series: by_constant needs a constant");
      record.scale = *constant;
      break;
    case NormalizationMode::ByMaxTotal: {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& trajectory : data.trajectories)
        for (std::size_t s = 0; s < trajectory.rows(); ++s) {
          double total = 0.0;
          for (double v : trajectory.row(s)) total += v;
          best = std::max(best, total);
        }
      record.scale = best;
      break;
    }
  }
  if (!(record.scale > 0.0) || !std::isfinite(record.scale))
    throw DataError("normalize_series: scale must be positive, got " + format_double(record.scale));

  TrajectoryDataset out = data;
  for (auto& trajectory : out.trajectories) {
    std::vector<double> values = trajectory.values();
    for (double& v : values) v /= record.scale;
    trajectory = Trajectory(trajectory.dim(), std::move(values));
  }
  return {std::move(out), record};
}

TrajectoryDataset denormalize(const TrajectoryDataset& data, const ScaleRecord& record) {
  TrajectoryDataset out = data;
  for (auto& trajectory : out.trajectories) {
    std::vector<double> values = trajectory.values();
    for (double& v : values) v *= record.scale;
    trajectory = Trajectory(trajectory.dim(), std::move(values));
  }
  return out;
}

}  // namespace fex
