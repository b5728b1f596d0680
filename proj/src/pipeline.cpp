#include "fex/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "fex/epi_models.hpp"

namespace fex {

using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError& e) {
    throw StageError(name, e, kExitConfig);
  } catch (const DataError& e) {
    throw StageError(name, e, kExitData);
  } catch (const NumericalFailure& e) {
    throw StageError(name, e, kExitNumerical);
  } catch (const std::invalid_argument& e) {
    throw StageError(name, e, name == "load" || name == "normalize" || name == "split" ? kExitData : kExitConfig);
  } catch (const std::exception& e) {
    throw StageError(name, e, kExitNumerical);
  }
}

json finite_or_null(double value) { return std::isfinite(value) ? json(value) : json(nullptr); }

json vector_json(const std::vector<double>& values) {
  json out = json::array();
  for (double v : values) out.push_back(finite_or_null(v));
  return out;
}

double max_or_inf(const std::vector<double>& values) {
  double worst = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, v);
  }
  return worst;
}

// Autonomous rollouts; failed ones are padded with +inf so shapes stay intact.
std::vector<Trajectory> autonomous_rollouts(const SystemModel& model, const std::vector<Trajectory>& truth, double dt,
                                            std::size_t& failures) {
  std::vector<Trajectory> predicted;
  failures = 0;
  for (const auto& trajectory : truth) {
    Rollout r = rollout(model, trajectory.row(0), trajectory.steps(), dt, RolloutMode::Autonomous);
    if (!r.ok) {
      ++failures;
      const std::vector<double> bad(model.dim(), std::numeric_limits<double>::infinity());
      while (r.states.rows() < trajectory.rows()) r.states.append_row(bad);
    }
    predicted.push_back(std::move(r.states));
  }
  return predicted;
}

json component_mse_json(const std::vector<std::string>& names, std::span<const Trajectory> predicted,
                        std::span<const Trajectory> truth) {
  json out = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) out[names[i]] = vector_json(per_step_component_mse(predicted, truth, i));
  return out;
}

struct SearchOutcome {
  std::vector<SearchResult> results;
};

SearchOutcome search_all(const TrajectoryDataset& train, const RunConfig& cfg, const PipelineOptions& options) {
  SearchOutcome outcome;
  for (std::size_t i = 0; i < train.dim(); ++i) {
    outcome.results.push_back(search_component(train, i, cfg.search, options.progress));
    if (outcome.results.back().best.failed())
      throw NumericalFailure("component " + train.var_names[i] + ": every candidate sequence failed to evaluate");
  }
  return outcome;
}

void add_search_sections(json& doc, const SearchOutcome& outcome, const std::vector<std::string>& names,
                         int precision) {
  doc["components"] = json::array();
  doc["pool"] = json::array();
  doc["history"] = json::array();
  for (std::size_t i = 0; i < outcome.results.size(); ++i) {
    const auto& result = outcome.results[i];
    json component = record_to_json(result.best, names, precision);
    component["index"] = i;
    component["name"] = names[i];
    doc["components"].push_back(component);

    json entries = json::array();
    for (const auto& record : result.pool.entries()) entries.push_back(record_to_json(record, names, precision));
    doc["pool"].push_back({{"component", i}, {"name", names[i]}, {"entries", entries}});
    doc["history"].push_back({{"component", i},
                              {"name", names[i]},
                              {"batch_best", vector_json(result.history)},
                              {"sequences_scored", result.sequences_scored}});
  }
}

std::vector<ScoreRecord> best_records(const SearchOutcome& outcome) {
  std::vector<ScoreRecord> records;
  for (const auto& result : outcome.results) records.push_back(result.best);
  return records;
}

json run_synthetic(const RunConfig& cfg, const PipelineOptions& options, std::vector<Trajectory>& predictions,
                   TrajectoryDataset& test_out) {
  const TrajectoryDataset raw = stage("generate", [&] {
    GeneratorOptions gen;
    gen.n_traj = cfg.n_trajectories;
    gen.steps = cfg.steps;
    gen.dt = cfg.dt;
    gen.normalize_initial = cfg.normalize_initial;
    gen.seed = cfg.seed;
    return generate_trajectories(cfg.model, cfg.epi, gen);
  });
  const auto [data, scale] =
      stage("normalize", [&] { return normalize_series(raw, cfg.normalization, cfg.normalization_constant); });
  const auto [train, test] = stage("split", [&] { return train_test_split(data, cfg.train_fraction, cfg.seed); });

  const SearchOutcome outcome = stage("search", [&] { return search_all(train, cfg, options); });
  const SystemModel model = stage("assemble", [&] { return assemble_system(best_records(outcome), data.var_names); });

  json doc;
  doc["config_echo"] = to_json(cfg);
  doc["var_names"] = data.var_names;
  doc["dt"] = cfg.dt;
  doc["scale_record"] = {{"mode", std::string(normalization_name(scale.mode))}, {"scale", scale.scale}};
  add_search_sections(doc, outcome, data.var_names, cfg.precision);
  doc["equations"] = model.symbolic_lines(cfg.precision);

  stage("forecast", [&] {
    std::size_t failures = 0;
    predictions = autonomous_rollouts(model, test.trajectories, cfg.dt, failures);
    const auto mse = per_step_mse(predictions, test.trajectories);
    doc["metrics"] = {{"kind", "synthetic"},
                      {"train_trajectories", train.trajectories.size()},
                      {"test_trajectories", test.trajectories.size()},
                      {"autonomous_mse", vector_json(mse)},
                      {"autonomous_component_mse", component_mse_json(data.var_names, predictions, test.trajectories)},
                      {"max_autonomous_mse", finite_or_null(max_or_inf(mse))},
                      {"rollout_failures", failures}};
    return 0;
  });
  test_out = test;
  return doc;
}

json run_real(const RunConfig& cfg, const PipelineOptions& options, std::vector<Trajectory>& predictions,
              TrajectoryDataset& truth_out) {
  const CsvTable table = stage("load", [&] { return load_csv(cfg.input_csv, cfg.columns, cfg.dt); });
  const auto [data, scale] = stage("normalize", [&] {
    if (table.data.trajectories.size() != 1) throw DataError("real mode expects a single dated series");
    return normalize_series(table.data, cfg.normalization, cfg.normalization_constant);
  });
  const Trajectory& series = data.trajectories[0];
  const std::size_t train_rows = cfg.train_days;
  const TrajectoryDataset train = stage("split", [&] {
    if (series.rows() <= train_rows)
      throw DataError("real mode: series has " + std::to_string(series.rows()) + " rows, train_days is " +
                      std::to_string(train_rows));
    return TrajectoryDataset{{series.slice(0, train_rows)}, data.dt, data.var_names, SplitTag::Train};
  });
  // forecast window starts from the last training observation
  const Trajectory truth = series.slice(train_rows - 1, series.rows());

  const SearchOutcome outcome = stage("search", [&] { return search_all(train, cfg, options); });
  const SystemModel model = stage("assemble", [&] { return assemble_system(best_records(outcome), data.var_names); });

  json doc;
  doc["config_echo"] = to_json(cfg);
  doc["var_names"] = data.var_names;
  doc["dt"] = cfg.dt;
  doc["scale_record"] = {{"mode", std::string(normalization_name(scale.mode))}, {"scale", scale.scale}};
  add_search_sections(doc, outcome, data.var_names, cfg.precision);
  doc["equations"] = model.symbolic_lines(cfg.precision);
  if (!table.dates.empty()) {
    doc["dates"] = {{"first", table.dates.front()},
                    {"last_train", table.dates[train_rows - 1]},
                    {"last", table.dates.back()}};
  }

  stage("forecast", [&] {
    const Trajectory& fit_window = train.trajectories[0];
    const Rollout fitted = rollout(model, fit_window.row(0), fit_window.steps(), cfg.dt, RolloutMode::TeacherForced,
                                   &fit_window);
    json teacher = nullptr;
    if (fitted.ok) {
      const std::vector<Trajectory> fitted_set{fitted.states};
      teacher = vector_json(per_step_mse(fitted_set, train.trajectories));
    }

    std::size_t failures = 0;
    const std::vector<Trajectory> truth_set{truth};
    predictions = autonomous_rollouts(model, truth_set, cfg.dt, failures);
    const auto mse = per_step_mse(predictions, truth_set);
    const auto baseline = persistence_baseline(truth_set);

    json series_forecast = json::object();
    json series_persistence = json::object();
    json beats = json::object();
    std::size_t beating = 0;
    for (std::size_t i = 0; i < data.dim(); ++i) {
      const double model_err = mean(per_step_component_mse(predictions, truth_set, i));
      const double base_err = mean(persistence_component_mse(truth_set, i));
      const bool better = std::isfinite(model_err) && model_err < base_err;
      beating += better;
      series_forecast[data.var_names[i]] = finite_or_null(model_err);
      series_persistence[data.var_names[i]] = base_err;
      beats[data.var_names[i]] = better;
    }
    json persistence_components = json::object();
    for (std::size_t i = 0; i < data.dim(); ++i)
      persistence_components[data.var_names[i]] = vector_json(persistence_component_mse(truth_set, i));

    doc["metrics"] = {{"kind", "real"},
                      {"train_rows", train_rows},
                      {"forecast_steps", truth.steps()},
                      {"teacher_forced_mse", teacher},
                      {"autonomous_mse", vector_json(mse)},
                      {"autonomous_component_mse", component_mse_json(data.var_names, predictions, truth_set)},
                      {"persistence_mse", vector_json(baseline)},
                      {"persistence_component_mse", persistence_components},
                      {"series_forecast_mse", series_forecast},
                      {"series_persistence_mse", series_persistence},
                      {"beats_persistence", beats},
                      {"series_beating_persistence", beating},
                      {"rollout_failures", failures}};
    return 0;
  });
  truth_out = TrajectoryDataset{{truth}, data.dt, data.var_names, SplitTag::Test};
  return doc;
}

}  // namespace

StageError::StageError(std::string stage, const std::exception& cause, int exit_code)
    : std::runtime_error(stage + ": " + cause.what()), stage_(std::move(stage)), exit_code_(exit_code) {}

json run_pipeline(const RunConfig& cfg, const PipelineOptions& options) {
  stage("config", [&] {
    cfg.search.validate();
    return 0;
  });

  std::vector<Trajectory> predictions;
  TrajectoryDataset truth;
  json doc = cfg.mode == RunMode::Synthetic ? run_synthetic(cfg, options, predictions, truth)
                                            : run_real(cfg, options, predictions, truth);

  if (options.write_files) {
    stage("write", [&] {
      std::filesystem::create_directories(cfg.output_dir);
      write_json_file(cfg.output_dir / "results.json", doc);
      write_report(doc, cfg.output_dir);
      TrajectoryDataset predicted{predictions, truth.dt, truth.var_names, SplitTag::Test};
      bool finite = true;
      for (const auto& t : predictions)
        for (double v : t.values()) finite = finite && std::isfinite(v);
      if (finite) {
        const ScaleRecord scale{parse_normalization(doc["scale_record"]["mode"].get<std::string>()),
                                doc["scale_record"]["scale"].get<double>()};
        save_csv(cfg.output_dir / "forecast.csv", denormalize(predicted, scale));
        save_csv(cfg.output_dir / "forecast_truth.csv", denormalize(truth, scale));
      }
      return 0;
    });
  }
  return doc;
}

SystemModel LearnedSystem::model() const { return assemble_system(records, var_names); }

json record_to_json(const ScoreRecord& record, const std::vector<std::string>& var_names, int precision) {
  SymbolicOptions options;
  options.precision = precision;
  options.var_names = var_names;
  return {{"template", std::string(template_name(record.template_kind))},
          {"sequence", sequence_tags(record.sequence)},
          {"coefficients", record.params.values},
          {"score", record.score},
          {"loss", finite_or_null(record.loss)},
          {"symbolic", to_symbolic_string(record.expression(), options)}};
}

ScoreRecord record_from_json(const json& entry, std::size_t component, std::size_t input_dim) {
  ScoreRecord record;
  try {
    record.template_kind = parse_template_kind(entry.at("template").get<std::string>());
    const auto tags = entry.at("sequence").get<std::vector<std::string>>();
    record.sequence = parse_sequence(tags);
    record.params.values = entry.at("coefficients").get<std::vector<double>>();
    record.score = entry.at("score").get<double>();
    record.loss = entry.at("loss").is_null() ? kLossSentinel : entry.at("loss").get<double>();
  } catch (const json::exception& e) {
    throw DataError(std::string("results document: malformed component record: ") + e.what());
  }
  record.component = component;
  record.input_dim = input_dim;
  // constructing the expression validates the sequence and parameter count
  (void)record.expression();
  return record;
}

LearnedSystem load_learned_system(const json& results) {
  LearnedSystem system;
  try {
    system.var_names = results.at("var_names").get<std::vector<std::string>>();
    system.dt = results.at("dt").get<double>();
    const auto& scale = results.at("scale_record");
    system.scale.mode = parse_normalization(scale.at("mode").get<std::string>());
    system.scale.scale = scale.at("scale").get<double>();
    const auto& components = results.at("components");
    for (std::size_t i = 0; i < components.size(); ++i)
      system.records.push_back(record_from_json(components[i], i, system.var_names.size()));
  } catch (const json::exception& e) {
    throw DataError(std::string("results document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("results document: ") + e.what());
  }
  if (system.records.size() != system.var_names.size())
    throw DataError("results document: need one component per variable");
  return system;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << doc.dump(2) << '\n';
}

void write_mse_csv(const std::filesystem::path& path, const std::vector<double>& mse) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "step_index,mse\n";
  for (std::size_t k = 0; k < mse.size(); ++k) out << k + 1 << ',' << format_double(mse[k]) << '\n';
}

void write_component_mse_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                             const std::vector<std::vector<double>>& columns) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "step_index";
  for (const auto& name : names) out << ',' << name;
  out << '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (std::size_t k = 0; k < rows; ++k) {
    out << k + 1;
    for (const auto& column : columns) out << ',' << format_double(column[k]);
    out << '\n';
  }
}

void write_report(const json& results, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto numbers = [](const json& array) {
    std::vector<double> values;
    for (const auto& v : array) values.push_back(v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>());
    return values;
  };
  try {
    const auto& metrics = results.at("metrics");
    write_mse_csv(dir / "mse.csv", numbers(metrics.at("autonomous_mse")));
    const auto names = results.at("var_names").get<std::vector<std::string>>();
    if (metrics.contains("autonomous_component_mse")) {
      std::vector<std::vector<double>> columns;
      for (const auto& name : names) columns.push_back(numbers(metrics["autonomous_component_mse"].at(name)));
      write_component_mse_csv(dir / "mse_components.csv", names, columns);
    }
    if (metrics.contains("persistence_mse")) write_mse_csv(dir / "persistence_mse.csv", numbers(metrics["persistence_mse"]));

    const LearnedSystem system = load_learned_system(results);
    const int precision = results.at("config_echo").value("precision", 4);
    std::ofstream eq(dir / "equations.txt", std::ios::binary);
    if (!eq) throw DataError("cannot write equations.txt");
    for (const auto& line : system.model().symbolic_lines(precision)) eq << line << '\n';
  } catch (const json::exception& e) {
    throw DataError(std::string("results document: ") + e.what());
  }
}

}  // namespace fex
