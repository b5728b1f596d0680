#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fex/csv_io.hpp"
#include "fex/epi_models.hpp"
#include "fex/search.hpp"

namespace fex {

/// Invalid configuration. `path` names the offending field, e.g.
/// "search.optim.lr_first".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class RunMode { Synthetic, Real };

struct RunConfig {
  RunMode mode = RunMode::Synthetic;

  // synthetic mode
  ModelKind model = ModelKind::SIR;
  EpiParams epi = EpiParams::defaults_for(ModelKind::SIR);
  std::size_t n_trajectories = 200;
  std::size_t steps = 250;
  bool normalize_initial = true;
  double train_fraction = 0.5;

  // real mode
  std::filesystem::path input_csv;
  std::vector<std::string> columns;
  std::size_t train_days = 85;

  double dt = 0.2;
  NormalizationMode normalization = NormalizationMode::None;
  std::optional<double> normalization_constant;

  SearchConfig search;
  std::filesystem::path output_dir = "fex_out";
  std::uint64_t seed = 0;
  int precision = 4;
};

/// Strict parse: unknown keys, wrong types and out-of-range values raise
/// ConfigError before any work starts. Relative `input_csv` paths resolve
/// against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical JSON of every effective setting.
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace fex
