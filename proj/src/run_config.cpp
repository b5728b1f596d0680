#include "fex/run_config.hpp"

#include <fstream>
#include <set>

namespace fex {

using nlohmann::json;

namespace {

// Typed accessor over one JSON object that remembers its dotted path and
// rejects keys nobody asked about.
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string path, std::set<std::string> allowed)
      : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    for (const auto& item : object_.items())
      if (!allowed.count(item.key())) throw ConfigError(child(item.key()), "unknown key");
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return object_.contains(key); }
  const json& raw(const std::string& key) const { return object_.at(key); }

  std::string string(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    if (!raw(key).is_string()) throw ConfigError(child(key), "expected a string");
    return raw(key).get<std::string>();
  }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    if (!raw(key).is_number()) throw ConfigError(child(key), "expected a number");
    return raw(key).get<double>();
  }

  long long integer(const std::string& key, long long fallback) const {
    if (!has(key)) return fallback;
    const auto& value = raw(key);
    if (!value.is_number_integer()) throw ConfigError(child(key), "expected an integer");
    return value.get<long long>();
  }

  std::size_t count(const std::string& key, std::size_t fallback, std::size_t minimum) const {
    const long long value = integer(key, static_cast<long long>(fallback));
    if (value < static_cast<long long>(minimum))
      throw ConfigError(child(key), "must be >= " + std::to_string(minimum));
    return static_cast<std::size_t>(value);
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!raw(key).is_boolean()) throw ConfigError(child(key), "expected true or false");
    return raw(key).get<bool>();
  }

 private:
  const json& object_;
  std::string path_;
};

template <typename Fn>
auto rethrow_as_config(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

void parse_optim(const ObjectReader& parent, OptimConfig& optim) {
  if (!parent.has("optim")) return;
  const ObjectReader r(parent.raw("optim"), parent.child("optim"),
                       {"t1_iters", "t2_iters", "t3_iters", "lr_first", "lr_finetune", "grad_tol", "armijo_c",
                        "backtrack_factor"});
  optim.t1_iters = static_cast<int>(r.count("t1_iters", static_cast<std::size_t>(optim.t1_iters), 0));
  optim.t2_iters = static_cast<int>(r.count("t2_iters", static_cast<std::size_t>(optim.t2_iters), 0));
  optim.t3_iters = static_cast<int>(r.count("t3_iters", static_cast<std::size_t>(optim.t3_iters), 0));
  optim.lr_first = r.number("lr_first", optim.lr_first);
  optim.lr_finetune = r.number("lr_finetune", optim.lr_finetune);
  optim.grad_tol = r.number("grad_tol", optim.grad_tol);
  optim.armijo_c = r.number("armijo_c", optim.armijo_c);
  optim.backtrack_factor = r.number("backtrack_factor", optim.backtrack_factor);
  try {
    optim.validate();
  } catch (const std::invalid_argument& e) {
    const std::string message = e.what();
    const std::string field = message.substr(0, message.find(':'));
    throw ConfigError(r.child(field), message.substr(message.find(':') + 2));
  }
}

void parse_search(const ObjectReader& root, SearchConfig& search) {
  if (!root.has("search")) return;
  const ObjectReader r(root.raw("search"), "search",
                       {"epochs", "batch_size", "pool_capacity", "nu", "epsilon", "controller_lr", "template",
                        "component_templates", "threads", "optim"});
  search.epochs = static_cast<int>(r.count("epochs", static_cast<std::size_t>(search.epochs), 1));
  search.batch_size = r.count("batch_size", search.batch_size, 1);
  search.pool_capacity = r.count("pool_capacity", search.pool_capacity, 1);
  search.nu = r.number("nu", search.nu);
  if (!(search.nu > 0.0 && search.nu < 1.0)) throw ConfigError(r.child("nu"), "must lie in (0, 1)");
  search.epsilon = r.number("epsilon", search.epsilon);
  if (!(search.epsilon >= 0.0 && search.epsilon <= 1.0)) throw ConfigError(r.child("epsilon"), "must lie in [0, 1]");
  search.controller_lr = r.number("controller_lr", search.controller_lr);
  if (!(search.controller_lr >= 0.0)) throw ConfigError(r.child("controller_lr"), "must be >= 0");
  search.threads = static_cast<unsigned>(r.count("threads", search.threads, 0));
  if (r.has("template")) {
    const auto name = r.string("template", "type2");
    search.default_template = rethrow_as_config(r.child("template"), [&] { return parse_template_kind(name); });
  }
  if (r.has("component_templates")) {
    const auto& list = r.raw("component_templates");
    if (!list.is_array()) throw ConfigError(r.child("component_templates"), "expected an array of template names");
    search.component_templates.clear();
    for (std::size_t k = 0; k < list.size(); ++k) {
      const std::string path = r.child("component_templates") + "[" + std::to_string(k) + "]";
      if (!list[k].is_string()) throw ConfigError(path, "expected a string");
      search.component_templates.push_back(
          rethrow_as_config(path, [&] { return parse_template_kind(list[k].get<std::string>()); }));
    }
  }
  parse_optim(r, search.optim);
}

}  // namespace

ConfigError::ConfigError(std::string path, const std::string& message)
    : std::runtime_error(path + ": " + message), path_(std::move(path)) {}

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir) {
  const ObjectReader root(doc, "",
                          {"mode", "model", "epi_params", "n_trajectories", "steps", "dt", "normalize_initial",
                           "train_fraction", "input_csv", "columns", "train_days", "normalization", "search",
                           "output_dir", "seed", "precision"});
  RunConfig cfg;
  const std::string mode = root.string("mode", "synthetic");
  if (mode == "synthetic") {
    cfg.mode = RunMode::Synthetic;
  } else if (mode == "real") {
    cfg.mode = RunMode::Real;
  } else {
    throw ConfigError("mode", "expected 'synthetic' or 'real'");
  }
  const bool real = cfg.mode == RunMode::Real;

  cfg.seed = static_cast<std::uint64_t>(root.count("seed", 0, 0));
  cfg.dt = root.number("dt", real ? 1.0 : 0.2);
  if (!(cfg.dt > 0.0)) throw ConfigError("dt", "must be > 0");
  cfg.precision = static_cast<int>(root.count("precision", 4, 0));
  if (cfg.precision > 17) throw ConfigError("precision", "must be <= 17");
  cfg.output_dir = root.string("output_dir", "fex_out");

  if (real) {
    for (const char* key : {"model", "epi_params", "n_trajectories", "steps", "normalize_initial", "train_fraction"})
      if (root.has(key)) throw ConfigError(key, "only valid in synthetic mode");
    if (!root.has("input_csv")) throw ConfigError("input_csv", "required in real mode");
    cfg.input_csv = root.string("input_csv", "");
    if (cfg.input_csv.is_relative() && !base_dir.empty()) cfg.input_csv = base_dir / cfg.input_csv;
    if (root.has("columns")) {
      const auto& list = root.raw("columns");
      if (!list.is_array() || list.empty()) throw ConfigError("columns", "expected a nonempty array of names");
      for (std::size_t k = 0; k < list.size(); ++k) {
        if (!list[k].is_string()) throw ConfigError("columns[" + std::to_string(k) + "]", "expected a string");
        cfg.columns.push_back(list[k].get<std::string>());
      }
    }
    cfg.train_days = root.count("train_days", 85, 2);
    cfg.normalization = NormalizationMode::ByMaxTotal;
  } else {
    for (const char* key : {"input_csv", "columns", "train_days"})
      if (root.has(key)) throw ConfigError(key, "only valid in real mode");
    const std::string model = root.string("model", "sir");
    cfg.model = rethrow_as_config("model", [&] { return parse_model_kind(model); });
    cfg.epi = EpiParams::defaults_for(cfg.model);
    if (root.has("epi_params")) {
      const ObjectReader r(root.raw("epi_params"), "epi_params",
                           {"beta", "gamma", "mu", "sigma", "nu_rate", "delta", "n_pop"});
      cfg.epi.beta = r.number("beta", cfg.epi.beta);
      cfg.epi.gamma = r.number("gamma", cfg.epi.gamma);
      cfg.epi.mu = r.number("mu", cfg.epi.mu);
      cfg.epi.sigma = r.number("sigma", cfg.epi.sigma);
      cfg.epi.nu_rate = r.number("nu_rate", cfg.epi.nu_rate);
      cfg.epi.delta = r.number("delta", cfg.epi.delta);
      cfg.epi.n_pop = r.number("n_pop", cfg.epi.n_pop);
      rethrow_as_config("epi_params", [&] {
        cfg.epi.validate();
        return 0;
      });
    }
    cfg.n_trajectories = root.count("n_trajectories", 200, 2);
    cfg.steps = root.count("steps", 250, 1);
    cfg.normalize_initial = root.boolean("normalize_initial", true);
    cfg.train_fraction = root.number("train_fraction", 0.5);
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
      throw ConfigError("train_fraction", "must lie in (0, 1)");
    cfg.normalization = NormalizationMode::None;
  }

  if (root.has("normalization")) {
    const ObjectReader r(root.raw("normalization"), "normalization", {"mode", "constant"});
    const std::string name = r.string("mode", std::string(normalization_name(cfg.normalization)));
    cfg.normalization = rethrow_as_config("normalization.mode", [&] { return parse_normalization(name); });
    if (r.has("constant")) {
      const double c = r.number("constant", 1.0);
      if (!(c > 0.0)) throw ConfigError("normalization.constant", "must be > 0");
      cfg.normalization_constant = c;
    }
    if (cfg.normalization == NormalizationMode::ByConstant && !cfg.normalization_constant)
      throw ConfigError("normalization.constant", "required for by_constant");
  }

  parse_search(root, cfg.search);
  cfg.search.seed = cfg.seed;
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open '" + path.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  return parse_run_config(doc, path.parent_path());
}

json to_json(const RunConfig& cfg) {
  json out;
  const bool real = cfg.mode == RunMode::Real;
  out["mode"] = real ? "real" : "synthetic";
  out["seed"] = cfg.seed;
  out["dt"] = cfg.dt;
  out["precision"] = cfg.precision;
  out["output_dir"] = cfg.output_dir.generic_string();
  if (real) {
    out["input_csv"] = cfg.input_csv.generic_string();
    if (!cfg.columns.empty()) out["columns"] = cfg.columns;
    out["train_days"] = cfg.train_days;
  } else {
    out["model"] = std::string(model_name(cfg.model));
    out["epi_params"] = {{"beta", cfg.epi.beta},       {"gamma", cfg.epi.gamma},     {"mu", cfg.epi.mu},
                         {"sigma", cfg.epi.sigma},     {"nu_rate", cfg.epi.nu_rate}, {"delta", cfg.epi.delta},
                         {"n_pop", cfg.epi.n_pop}};
    out["n_trajectories"] = cfg.n_trajectories;
    out["steps"] = cfg.steps;
    out["normalize_initial"] = cfg.normalize_initial;
    out["train_fraction"] = cfg.train_fraction;
  }
  json normalization{{"mode", std::string(normalization_name(cfg.normalization))}};
  if (cfg.normalization_constant) normalization["constant"] = *cfg.normalization_constant;
  out["normalization"] = normalization;

  const auto& s = cfg.search;
  json templates = json::array();
  for (auto kind : s.component_templates) templates.push_back(std::string(template_name(kind)));
  out["search"] = {{"epochs", s.epochs},
                   {"batch_size", s.batch_size},
                   {"pool_capacity", s.pool_capacity},
                   {"nu", s.nu},
                   {"epsilon", s.epsilon},
                   {"controller_lr", s.controller_lr},
                   {"template", std::string(template_name(s.default_template))},
                   {"component_templates", templates},
                   {"threads", s.threads},
                   {"optim",
                    {{"t1_iters", s.optim.t1_iters},
                     {"t2_iters", s.optim.t2_iters},
                     {"t3_iters", s.optim.t3_iters},
                     {"lr_first", s.optim.lr_first},
                     {"lr_finetune", s.optim.lr_finetune},
                     {"grad_tol", s.optim.grad_tol},
                     {"armijo_c", s.optim.armijo_c},
                     {"backtrack_factor", s.optim.backtrack_factor}}}};
  return out;
}

}  // namespace fex
