#pragma once

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fex/csv_io.hpp"
#include "fex/forecast.hpp"
#include "fex/run_config.hpp"
#include "fex/search.hpp"

namespace fex {

/// The run produced no usable expression or metric.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Any failure inside run_pipeline, tagged with the stage that raised it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::exception& cause, int exit_code);
  const std::string& stage() const { return stage_; }
  int exit_code() const { return exit_code_; }

 private:
  std::string stage_;
  int exit_code_;
};

struct PipelineOptions {
  ProgressCallback progress;
  /// Write results.json and the plot CSVs into cfg.output_dir.
  bool write_files = true;
};

/// generate/load -> normalize -> split -> per-component search -> assemble ->
/// rollout -> metrics. Returns the results document.
nlohmann::json run_pipeline(const RunConfig& cfg, const PipelineOptions& options = {});

/// Learned system rebuilt from a results document.
struct LearnedSystem {
  std::vector<ScoreRecord> records;
  std::vector<std::string> var_names;
  ScaleRecord scale;
  double dt = 1.0;

  SystemModel model() const;
};

nlohmann::json record_to_json(const ScoreRecord& record, const std::vector<std::string>& var_names, int precision);
ScoreRecord record_from_json(const nlohmann::json& entry, std::size_t component, std::size_t input_dim);
LearnedSystem load_learned_system(const nlohmann::json& results);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

/// Two-column "step_index,mse" CSV.
void write_mse_csv(const std::filesystem::path& path, const std::vector<double>& mse);
/// "step_index,<var1>,..." per-component MSE CSV.
void write_component_mse_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                             const std::vector<std::vector<double>>& columns);

/// Writes mse.csv, mse_components.csv (when available) and equations.txt
/// from a results document into `dir`.
void write_report(const nlohmann::json& results, const std::filesystem::path& dir);

}  // namespace fex
