// Command-line front end: generate, search, forecast, report.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "fex/csv_io.hpp"
#include "fex/epi_models.hpp"
#include "fex/forecast.hpp"
#include "fex/pipeline.hpp"
#include "fex/run_config.hpp"

namespace fs = std::filesystem;
using namespace fex;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct GenerateArgs {
  std::string model = "sir";
  std::size_t trajectories = 200;
  std::size_t steps = 250;
  double dt = 0.2;
  std::uint64_t seed = 0;
  bool no_normalize = false;
  std::string out = "trajectories.csv";
  std::optional<double> beta, gamma, mu, sigma, nu_rate, delta, n_pop;
};

struct SearchArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> epochs;
  std::optional<unsigned> threads;
  bool quiet = false;
};

struct ForecastArgs {
  std::string results;
  std::string data;
  std::string mode = "autonomous";
  std::optional<std::size_t> steps;
  std::size_t start = 0;
  std::string out = "forecast_out";
};

struct ReportArgs {
  std::string results;
  std::string out = "report_out";
};

int run_generate(const GenerateArgs& a) {
  ModelKind kind;
  try {
    kind = parse_model_kind(a.model);
  } catch (const std::invalid_argument& e) {
    throw fex::ConfigError("--model", e.what());
  }
  EpiParams params = EpiParams::defaults_for(kind);
  if (a.beta) params.beta = *a.beta;
  if (a.gamma) params.gamma = *a.gamma;
  if (a.mu) params.mu = *a.mu;
  if (a.sigma) params.sigma = *a.sigma;
  if (a.nu_rate) params.nu_rate = *a.nu_rate;
  if (a.delta) params.delta = *a.delta;
  if (a.n_pop) params.n_pop = *a.n_pop;
  try {
    params.validate();
  } catch (const std::invalid_argument& e) {
    throw fex::ConfigError("parameters", e.what());
  }
  if (a.trajectories < 1 || a.steps < 1 || !(a.dt > 0.0))
    throw fex::ConfigError("--trajectories/--steps/--dt", "must be positive");

  GeneratorOptions options;
  options.n_traj = a.trajectories;
  options.steps = a.steps;
  options.dt = a.dt;
  options.seed = a.seed;
  options.normalize_initial = !a.no_normalize;
  const auto data = generate_trajectories(kind, params, options);
  save_csv(a.out, data);
  std::cerr << "wrote " << data.trajectories.size() << " trajectories to " << a.out << '\n';
  return kExitOk;
}

int run_search(const SearchArgs& a) {
  RunConfig cfg = load_run_config(a.config);
  if (a.seed) {
    cfg.seed = *a.seed;
    cfg.search.seed = *a.seed;
  }
  if (a.out) cfg.output_dir = *a.out;
  if (a.epochs) {
    if (*a.epochs < 1) throw fex::ConfigError("--epochs", "must be >= 1");
    cfg.search.epochs = *a.epochs;
  }
  if (a.threads) cfg.search.threads = *a.threads;

  PipelineOptions options;
  if (!a.quiet) {
    options.progress = [](const EpochReport& r) {
      if ((r.epoch + 1) % 10 == 0)
        std::fprintf(stderr, "component %zu epoch %d  batch best %.6g  pool best %.6g\n", r.component, r.epoch + 1,
                     r.batch_best, r.pool_best);
    };
  }
  const json doc = run_pipeline(cfg, options);
  for (const auto& line : doc["equations"]) std::cout << line.get<std::string>() << '\n';
  const auto& metrics = doc["metrics"];
  if (metrics.contains("series_beating_persistence"))
    std::cout << "series beating persistence: " << metrics["series_beating_persistence"] << " of "
              << doc["var_names"].size() << '\n';
  if (metrics.contains("max_autonomous_mse"))
    std::cout << "max autonomous per-step MSE: " << metrics["max_autonomous_mse"] << '\n';
  std::cout << "results written to " << cfg.output_dir.string() << '\n';
  return kExitOk;
}

int run_forecast(const ForecastArgs& a) {
  RolloutMode mode;
  try {
    mode = parse_rollout_mode(a.mode);
  } catch (const std::invalid_argument& e) {
    throw fex::ConfigError("--mode", e.what());
  }
  const LearnedSystem system = load_learned_system(read_json_file(a.results));
  const SystemModel model = system.model();
  const CsvTable table = load_csv(a.data, system.var_names, system.dt);
  const TrajectoryDataset data = normalize_series(table.data, system.scale.mode, system.scale.scale).first;

  std::vector<Trajectory> predicted;
  std::vector<Trajectory> truth;
  bool all_ok = true;
  for (const auto& trajectory : data.trajectories) {
    if (a.start >= trajectory.rows()) throw DataError("--start is beyond the end of a trajectory");
    const std::size_t available = trajectory.rows() - 1 - a.start;
    const std::size_t steps = a.steps ? *a.steps : available;
    const Trajectory window = trajectory.slice(a.start, a.start + std::min(steps, available) + 1);
    if (mode == RolloutMode::TeacherForced && steps > available)
      throw DataError("teacher-forced forecast needs ground truth for every step");
    Rollout r = rollout(model, window.row(0), steps, system.dt, mode, &window);
    if (!r.ok) {
      all_ok = false;
      std::cerr << "rollout became non-finite at step " << *r.failed_step << '\n';
    }
    if (steps <= available && r.ok) truth.push_back(window);
    predicted.push_back(std::move(r.states));
  }

  fs::create_directories(a.out);
  TrajectoryDataset out{predicted, system.dt, system.var_names, SplitTag::Test};
  save_csv(fs::path(a.out) / "forecast.csv", denormalize(out, system.scale));
  if (!truth.empty() && truth.size() == predicted.size()) {
    const auto mse = per_step_mse(predicted, truth);
    write_mse_csv(fs::path(a.out) / "mse.csv", mse);
    std::cout << "mean per-step MSE (normalised units): " << mean(mse) << '\n';
  }
  std::cout << "forecast written to " << a.out << '\n';
  return all_ok ? kExitOk : kExitNumerical;
}

int run_report(const ReportArgs& a) {
  const json doc = read_json_file(a.results);
  write_report(doc, a.out);
  for (const auto& line : load_learned_system(doc).model().symbolic_lines(doc["config_echo"].value("precision", 4)))
    std::cout << line << '\n';
  std::cout << "report written to " << a.out << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-expression search for epidemic ODE systems"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Simulate compartmental trajectories to CSV");
  generate->add_option("--model", gen.model, "sir, seir or seird")->capture_default_str();
  generate->add_option("--trajectories", gen.trajectories, "Number of trajectories")->capture_default_str();
  generate->add_option("--steps", gen.steps, "Euler steps per trajectory")->capture_default_str();
  generate->add_option("--dt", gen.dt, "Step size")->capture_default_str();
  generate->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  generate->add_flag("--no-normalize", gen.no_normalize, "Keep raw U(0,1) initial states");
  generate->add_option("--out", gen.out, "Output CSV")->capture_default_str();
  generate->add_option("--beta", gen.beta);
  generate->add_option("--gamma", gen.gamma);
  generate->add_option("--mu", gen.mu);
  generate->add_option("--sigma", gen.sigma);
  generate->add_option("--nu-rate", gen.nu_rate);
  generate->add_option("--delta", gen.delta);
  generate->add_option("--n-pop", gen.n_pop);

  SearchArgs search;
  auto* search_cmd = app.add_subcommand("search", "Run the full search pipeline from a JSON config");
  search_cmd->add_option("--config", search.config, "RunConfig JSON")->required();
  search_cmd->add_option("--seed", search.seed, "Override the master seed");
  search_cmd->add_option("--out", search.out, "Override the output directory");
  search_cmd->add_option("--epochs", search.epochs, "Override search epochs");
  search_cmd->add_option("--threads", search.threads, "Scoring threads (0 = hardware)");
  search_cmd->add_flag("--quiet", search.quiet, "No progress output");

  ForecastArgs forecast;
  auto* forecast_cmd = app.add_subcommand("forecast", "Roll a learned system forward over a CSV");
  forecast_cmd->add_option("--results", forecast.results, "results.json from search")->required();
  forecast_cmd->add_option("--data", forecast.data, "Trajectory or dated CSV in original units")->required();
  forecast_cmd->add_option("--mode", forecast.mode, "autonomous or teacher_forced")->capture_default_str();
  forecast_cmd->add_option("--steps", forecast.steps, "Steps to predict (default: to the end of the data)");
  forecast_cmd->add_option("--start", forecast.start, "Row used as the initial state")->capture_default_str();
  forecast_cmd->add_option("--out", forecast.out, "Output directory")->capture_default_str();

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Write MSE CSVs and equations from a results document");
  report_cmd->add_option("--results", report.results, "results.json")->required();
  report_cmd->add_option("--out", report.out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (generate->parsed()) return run_generate(gen);
    if (search_cmd->parsed()) return run_search(search);
    if (forecast_cmd->parsed()) return run_forecast(forecast);
    return run_report(report);
  } catch (const StageError& e) {
    std::cerr << "error in stage " << e.what() << '\n';
    return e.exit_code();
  } catch (const fex::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
