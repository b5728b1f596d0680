#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fex/epi_models.hpp"
#include "fex/forecast.hpp"
#include "fex/pipeline.hpp"
#include "fex/residual_loss.hpp"
#include "fex/search.hpp"

namespace py = pybind11;
using namespace fex;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const Trajectory& t) {
  Array out({t.rows(), t.dim()});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

Trajectory from_array(const Array& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array of shape (rows, dim)");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto dim = static_cast<std::size_t>(a.shape(1));
  return Trajectory(dim, std::vector<double>(a.data(), a.data() + rows * dim));
}

TrajectoryDataset dataset_from(const std::vector<Array>& trajectories, double dt,
                               std::optional<std::vector<std::string>> names) {
  TrajectoryDataset data;
  data.dt = dt;
  for (const auto& a : trajectories) data.trajectories.push_back(from_array(a));
  if (data.trajectories.empty()) throw std::invalid_argument("need at least one trajectory");
  data.var_names = names ? *names : default_var_names(data.trajectories.front().dim());
  data.validate();
  return data;
}

CompiledExpression make_expression(const std::string& template_kind, const std::vector<std::string>& sequence,
                                   std::size_t dim, std::vector<double> params) {
  TreeTemplate tree = build_template(parse_template_kind(template_kind), dim);
  return CompiledExpression(std::move(tree), parse_sequence(sequence), ExpressionParams{std::move(params)});
}

EpiParams params_from(ModelKind kind, const py::dict& overrides) {
  EpiParams p = EpiParams::defaults_for(kind);
  for (const auto& item : overrides) {
    const auto key = item.first.cast<std::string>();
    const double v = item.second.cast<double>();
    if (key == "beta") p.beta = v;
    else if (key == "gamma") p.gamma = v;
    else if (key == "mu") p.mu = v;
    else if (key == "sigma") p.sigma = v;
    else if (key == "nu_rate") p.nu_rate = v;
    else if (key == "delta") p.delta = v;
    else if (key == "n_pop") p.n_pop = v;
    else throw std::invalid_argument("unknown epidemic parameter '" + key + "'");
  }
  p.validate();
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Finite-expression search for epidemic ODE systems";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<EvaluationFailure>(m, "EvaluationFailure", PyExc_ArithmeticError);

  m.def("param_count",
        [](const std::string& kind, const std::vector<std::string>& sequence, std::size_t dim) {
          return param_count(build_template(parse_template_kind(kind), dim), parse_sequence(sequence));
        },
        py::arg("template"), py::arg("sequence"), py::arg("dim"));

  m.def("evaluate",
        [](const std::string& kind, const std::vector<std::string>& sequence, std::vector<double> params,
           std::vector<double> x) {
          return evaluate(make_expression(kind, sequence, x.size(), std::move(params)), x);
        },
        py::arg("template"), py::arg("sequence"), py::arg("params"), py::arg("x"));

  m.def("param_gradient",
        [](const std::string& kind, const std::vector<std::string>& sequence, std::vector<double> params,
           std::vector<double> x) {
          return param_gradient(make_expression(kind, sequence, x.size(), std::move(params)), x);
        },
        py::arg("template"), py::arg("sequence"), py::arg("params"), py::arg("x"));

  m.def("symbolic",
        [](const std::string& kind, const std::vector<std::string>& sequence, std::vector<double> params,
           std::vector<std::string> var_names, int precision) {
          SymbolicOptions options;
          options.precision = precision;
          const std::size_t dim = var_names.size();
          options.var_names = std::move(var_names);
          return to_symbolic_string(make_expression(kind, sequence, dim, std::move(params)), options);
        },
        py::arg("template"), py::arg("sequence"), py::arg("params"), py::arg("var_names"), py::arg("precision") = 4);

  m.def("vector_field",
        [](const std::string& model, std::vector<double> x, const py::dict& params) {
          const ModelKind kind = parse_model_kind(model);
          return vector_field(kind, params_from(kind, params), x);
        },
        py::arg("model"), py::arg("x"), py::arg("params") = py::dict());

  m.def("generate_trajectories",
        [](const std::string& model, std::size_t n_traj, std::size_t steps, double dt, std::uint64_t seed,
           bool normalize_initial, const py::dict& params) {
          const ModelKind kind = parse_model_kind(model);
          GeneratorOptions options{n_traj, steps, dt, normalize_initial, seed};
          const auto data = generate_trajectories(kind, params_from(kind, params), options);
          py::list out;
          for (const auto& t : data.trajectories) out.append(to_array(t));
          return out;
        },
        py::arg("model") = "sir", py::arg("n_traj") = 200, py::arg("steps") = 250, py::arg("dt") = 0.2,
        py::arg("seed") = 0, py::arg("normalize_initial") = true, py::arg("params") = py::dict());

  m.def("euler_residual_loss",
        [](const std::string& kind, const std::vector<std::string>& sequence, std::vector<double> params,
           const std::vector<Array>& trajectories, double dt, std::size_t component) {
          const auto data = dataset_from(trajectories, dt, std::nullopt);
          return euler_residual_loss(make_expression(kind, sequence, data.dim(), std::move(params)), data, component);
        },
        py::arg("template"), py::arg("sequence"), py::arg("params"), py::arg("trajectories"), py::arg("dt"),
        py::arg("component"));

  m.def("score_from_loss", &score_from_loss, py::arg("loss"));
  m.def("quantile_threshold", &quantile_threshold, py::arg("scores"), py::arg("nu"));

  m.def("fit_sequence",
        [](const std::string& kind, const std::vector<std::string>& sequence, const std::vector<Array>& trajectories,
           double dt, std::size_t component, std::uint64_t seed) {
          const auto data = dataset_from(trajectories, dt, std::nullopt);
          Rng rng(seed);
          py::gil_scoped_release release;
          const auto record = score_sequence(parse_sequence(sequence), build_template(parse_template_kind(kind), data.dim()),
                                             data, component, OptimConfig{}, rng);
          py::gil_scoped_acquire acquire;
          py::dict out;
          out["params"] = record.params.values;
          out["loss"] = record.loss;
          out["score"] = record.score;
          return out;
        },
        py::arg("template"), py::arg("sequence"), py::arg("trajectories"), py::arg("dt"), py::arg("component"),
        py::arg("seed") = 0);

  m.def("run_pipeline",
        [](const std::string& config_json, const std::string& base_dir, bool write_files) {
          const RunConfig cfg = parse_run_config(nlohmann::json::parse(config_json), base_dir);
          PipelineOptions options;
          options.write_files = write_files;
          nlohmann::json doc;
          {
            py::gil_scoped_release release;
            doc = run_pipeline(cfg, options);
          }
          return doc.dump();
        },
        py::arg("config_json"), py::arg("base_dir") = "", py::arg("write_files") = false,
        "Runs the search pipeline and returns the results document as a JSON string.");

  m.def("rollout",
        [](const std::string& results_json, std::vector<double> init, std::size_t steps) {
          const LearnedSystem system = load_learned_system(nlohmann::json::parse(results_json));
          const Rollout r = rollout(system.model(), init, steps, system.dt, RolloutMode::Autonomous);
          return py::make_tuple(to_array(r.states), r.ok);
        },
        py::arg("results_json"), py::arg("init"), py::arg("steps"),
        "Autonomous rollout of the system stored in a results document (normalised units).");
}
