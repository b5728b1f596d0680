#include "fex/epi_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace fex {

std::size_t model_dim(ModelKind kind) {
  switch (kind) {
    case ModelKind::SIR: return 3;
    case ModelKind::SEIR: return 4;
    case ModelKind::SEIRD: return 5;
  }
  return 0;
}

std::vector<std::string> model_var_names(ModelKind kind) {
  switch (kind) {
    case ModelKind::SIR: return {"S", "I", "R"};
    case ModelKind::SEIR: return {"S", "E", "I", "R"};
    case ModelKind::SEIRD: return {"S", "E", "I", "R", "D"};
  }
  return {};
}

std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::SIR: return "sir";
    case ModelKind::SEIR: return "seir";
    case ModelKind::SEIRD: return "seird";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "sir" || name == "SIR") return ModelKind::SIR;
  if (name == "seir" || name == "SEIR") return ModelKind::SEIR;
  if (name == "seird" || name == "SEIRD") return ModelKind::SEIRD;
  throw std::invalid_argument("unknown model kind '" + std::string(name) + "'");
}

void EpiParams::validate() const {
  const std::pair<const char*, double> rates[] = {{"beta", beta},   {"gamma", gamma},     {"mu", mu},
                                                  {"sigma", sigma}, {"nu_rate", nu_rate}, {"delta", delta}};
  for (const auto& [name, value] : rates)
    if (!(value >= 0.0) || !std::isfinite(value))
      throw std::invalid_argument(std::string("epi params: ") + name + " must be a finite rate >= 0");
  if (!(n_pop > 0.0) || !std::isfinite(n_pop)) throw std::invalid_argument("epi params: n_pop must be > 0");
}

EpiParams EpiParams::defaults_for(ModelKind kind) {
  EpiParams params;
  params.sigma = kind == ModelKind::SEIRD ? 0.5 : 0.6;
  return params;
}

std::vector<double> vector_field(ModelKind kind, const EpiParams& p, std::span<const double> x) {
  if (x.size() != model_dim(kind))
    throw std::invalid_argument("vector_field: state has " + std::to_string(x.size()) + " entries, " +
                                std::string(model_name(kind)) + " needs " + std::to_string(model_dim(kind)));
  const double n = p.n_pop;
  switch (kind) {
    case ModelKind::SIR: {
      const double s = x[0], i = x[1], r = x[2];
      const double infection = p.beta * s * i / n;
      return {p.mu * (n - s) - infection, infection - (p.mu + p.gamma) * i, p.gamma * i - p.mu * r};
    }
    case ModelKind::SEIR: {
      const double s = x[0], e = x[1], i = x[2], r = x[3];
      const double infection = p.beta * s * i / n;
      return {p.mu * (n - s) - infection - p.nu_rate * s, infection - (p.mu + p.sigma) * e,
              p.sigma * e - (p.mu + p.gamma) * i, p.gamma * i - p.mu * r + p.nu_rate * s};
    }
    case ModelKind::SEIRD: {
      const double s = x[0], e = x[1], i = x[2];
      const double infection = p.beta * s * i / n;
      return {-infection, infection - p.sigma * e, p.sigma * e - (p.gamma + p.delta) * i, p.gamma * i,
              p.delta * i};
    }
  }
  return {};
}

TrajectoryDataset generate_trajectories(ModelKind kind, const EpiParams& params, const GeneratorOptions& options) {
  params.validate();
  if (options.n_traj < 1) throw std::invalid_argument("generate_trajectories: n_traj must be >= 1");
  if (options.steps < 1) throw std::invalid_argument("generate_trajectories: steps must be >= 1");
  if (!(options.dt > 0.0)) throw std::invalid_argument("generate_trajectories: dt must be > 0");

  const std::size_t d = model_dim(kind);
  TrajectoryDataset data;
  data.dt = options.dt;
  data.var_names = model_var_names(kind);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t t = 0; t < options.n_traj; ++t) {
    std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                      static_cast<std::uint32_t>(t), 0x45504931u};
    std::mt19937_64 rng(seq);

    std::vector<double> state(d);
    for (double& v : state) v = unit(rng);
    if (options.normalize_initial) {
      const double total = std::accumulate(state.begin(), state.end(), 0.0);
      for (double& v : state) v /= total;
    }

    std::vector<double> values;
    values.reserve((options.steps + 1) * d);
    values.insert(values.end(), state.begin(), state.end());
    for (std::size_t s = 0; s < options.steps; ++s) {
      const auto rate = vector_field(kind, params, state);
      for (std::size_t i = 0; i < d; ++i) state[i] += options.dt * rate[i];
      values.insert(values.end(), state.begin(), state.end());
    }
    data.trajectories.emplace_back(d, std::move(values));
  }
  return data;
}

std::pair<TrajectoryDataset, TrajectoryDataset> train_test_split(const TrajectoryDataset& data, double train_fraction,
                                                                 std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train_test_split: fraction must lie in (0, 1)");
  const std::size_t n = data.trajectories.size();
  if (n < 2) throw DataError("train_test_split: need at least two trajectories");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0x5d1f7a3c9e2b4f61ull);
  // Fisher-Yates with explicit draws; std::shuffle is not portable across standard libraries
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }

  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  TrajectoryDataset train{{}, data.dt, data.var_names, SplitTag::Train};
  TrajectoryDataset test{{}, data.dt, data.var_names, SplitTag::Test};
  std::vector<std::size_t> train_ids(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_ids(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  // keep original relative order inside each side
  std::sort(train_ids.begin(), train_ids.end());
  std::sort(test_ids.begin(), test_ids.end());
  for (auto id : train_ids) train.trajectories.push_back(data.trajectories[id]);
  for (auto id : test_ids) test.trajectories.push_back(data.trajectories[id]);
  return {std::move(train), std::move(test)};
}

}  // namespace fex
