#include "fex/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

namespace fex {

namespace {

Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (auto key : keys) {
    words.push_back(static_cast<std::uint32_t>(key));
    words.push_back(static_cast<std::uint32_t>(key >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

ScoreRecord sentinel_record(const OperatorSequence& sequence, const TreeTemplate& tree, std::size_t component) {
  ScoreRecord record;
  record.sequence = sequence;
  record.template_kind = tree.kind();
  record.input_dim = tree.input_dim();
  record.component = component;
  record.score = 0.0;
  record.loss = kLossSentinel;
  record.params.values.assign(param_count(tree, sequence), 0.0);
  return record;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index writes only
// its own output slot, so the result does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> workers;
  for (unsigned w = 0; w < threads; ++w)
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
}

}  // namespace

TemplateKind SearchConfig::template_for(std::size_t component) const {
  if (component < component_templates.size()) return component_templates[component];
  return default_template;
}

void SearchConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(epochs >= 1, "epochs: must be >= 1");
  require(batch_size >= 1, "batch_size: must be >= 1");
  require(pool_capacity >= 1, "pool_capacity: must be >= 1");
  require(nu > 0.0 && nu < 1.0, "nu: must lie in (0, 1)");
  require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon: must lie in [0, 1]");
  require(controller_lr >= 0.0, "controller_lr: must be >= 0");
  optim.validate();
  operators.validate();
}

double score_from_loss(double loss) {
  if (!(loss < kLossSentinel) || std::isnan(loss)) return 0.0;
  return 1.0 / (1.0 + loss);
}

CompiledExpression ScoreRecord::expression() const {
  return CompiledExpression(build_template(template_kind, input_dim), sequence, params);
}

bool better_record(const ScoreRecord& a, const ScoreRecord& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.loss != b.loss) return a.loss < b.loss;
  return a.sequence < b.sequence;
}

CandidatePool::CandidatePool(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("candidate pool: capacity must be >= 1");
}

const ScoreRecord& CandidatePool::best() const {
  if (entries_.empty()) throw std::logic_error("candidate pool is empty");
  return entries_.front();
}

bool CandidatePool::insert(const ScoreRecord& record) {
  if (record.failed() || !std::isfinite(record.score)) return false;
  auto same = std::find_if(entries_.begin(), entries_.end(), [&](const ScoreRecord& entry) {
    return entry.sequence == record.sequence && entry.template_kind == record.template_kind;
  });
  if (same != entries_.end()) {
    if (!better_record(record, *same)) return false;
    *same = record;
  } else if (entries_.size() < capacity_) {
    entries_.push_back(record);
  } else {
    if (!better_record(record, entries_.back())) return false;
    entries_.back() = record;
  }
  resort();
  return true;
}

void CandidatePool::resort() { std::sort(entries_.begin(), entries_.end(), better_record); }

CandidatePool pool_insert(CandidatePool pool, const ScoreRecord& record) {
  pool.insert(record);
  return pool;
}

ScoreRecord score_sequence(const OperatorSequence& sequence, const TreeTemplate& tree, const ResidualProblem& problem,
                           const OptimConfig& optim, Rng& rng) {
  ScoreRecord record = sentinel_record(sequence, tree, problem.component());
  const CompiledExpression skeleton(tree, sequence);
  const auto loss = problem.objective(skeleton);

  std::uniform_real_distribution<double> init_dist(-1.0, 1.0);
  const auto n = static_cast<Eigen::Index>(skeleton.param_count());
  Eigen::VectorXd init(n);
  bool finite = false;
  for (int attempt = 0; attempt < 4 && !finite; ++attempt) {
    for (Eigen::Index k = 0; k < n; ++k) init[k] = init_dist(rng);
    finite = std::isfinite(loss(init, nullptr));
  }
  if (!finite) return record;

  try {
    const OptimResult fit = two_stage_minimize(loss, init, optim);
    if (!std::isfinite(fit.final_loss)) return record;
    record.loss = fit.final_loss;
    record.score = score_from_loss(fit.final_loss);
    record.params.values.assign(fit.final_params.data(), fit.final_params.data() + n);
  } catch (const NonFiniteLoss&) {
    return sentinel_record(sequence, tree, problem.component());
  }
  return record;
}

ScoreRecord score_sequence(const OperatorSequence& sequence, const TreeTemplate& tree, const TrajectoryDataset& data,
                           std::size_t component, const OptimConfig& optim, Rng& rng) {
  const ResidualProblem problem(data, component);
  return score_sequence(sequence, tree, problem, optim, rng);
}

SearchResult search_component(const TrajectoryDataset& train, std::size_t component, const SearchConfig& cfg,
                              const ProgressCallback& progress) {
  cfg.validate();
  const ResidualProblem problem(train, component);
  const TreeTemplate tree = build_template(cfg.template_for(component), train.dim());
  ControllerPolicy policy = ControllerPolicy::uniform(tree, cfg.operators, cfg.epsilon, cfg.controller_lr);
  Rng sampler = stream(cfg.seed, {component, 0x53414d50ull});

  SearchResult result;
  result.pool = CandidatePool(cfg.pool_capacity);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    SampleBatch batch = sample_sequences(policy, cfg.batch_size, sampler);

    // score each distinct sequence once, in first-occurrence order
    std::map<OperatorSequence, std::size_t> first_seen;
    std::vector<std::size_t> unique;
    std::vector<std::size_t> slot_of(batch.sequences.size());
    for (std::size_t b = 0; b < batch.sequences.size(); ++b) {
      auto [it, inserted] = first_seen.try_emplace(batch.sequences[b], unique.size());
      if (inserted) unique.push_back(b);
      slot_of[b] = it->second;
    }

    std::vector<ScoreRecord> scored(unique.size());
    parallel_for(unique.size(), cfg.threads, [&](std::size_t u) {
      const std::size_t b = unique[u];
      Rng rng = stream(cfg.seed, {component, static_cast<std::uint64_t>(epoch), b, 0x53434f52ull});
      scored[u] = score_sequence(batch.sequences[b], tree, problem, cfg.optim, rng);
    });
    result.sequences_scored += scored.size();

    double batch_best = 0.0;
    batch.scores.resize(batch.sequences.size());
    for (std::size_t b = 0; b < batch.sequences.size(); ++b) {
      batch.scores[b] = scored[slot_of[b]].score;
      batch_best = std::max(batch_best, batch.scores[b]);
    }
    for (const auto& record : scored) result.pool.insert(record);
    policy_update(policy, batch, cfg.nu);
    result.history.push_back(batch_best);

    if (progress) {
      const double pool_best = result.pool.empty() ? 0.0 : result.pool.best().score;
      progress(EpochReport{component, epoch, batch_best, pool_best});
    }
  }

  // candidate refinement with the smaller learning rate
  auto& entries = result.pool.mutable_entries();
  parallel_for(entries.size(), cfg.threads, [&](std::size_t k) {
    ScoreRecord& record = entries[k];
    const CompiledExpression skeleton(tree, record.sequence);
    const auto loss = problem.objective(skeleton);
    const Eigen::Map<const Eigen::VectorXd> start(record.params.values.data(),
                                                  static_cast<Eigen::Index>(record.params.values.size()));
    try {
      const OptimResult tuned = minimize_first_order(loss, start, cfg.optim.t3_iters, cfg.optim.lr_finetune);
      if (tuned.final_loss < record.loss) {
        record.loss = tuned.final_loss;
        record.score = score_from_loss(tuned.final_loss);
        record.params.values.assign(tuned.final_params.data(), tuned.final_params.data() + tuned.final_params.size());
      }
    } catch (const NonFiniteLoss&) {
      // keep the searched parameters
    }
  });
  result.pool.resort();

  if (result.pool.empty()) {
    // every sampled sequence failed; report the first one as a sentinel
    result.best = sentinel_record(sample_sequences(policy, 1, sampler).sequences.front(), tree, component);
  } else {
    result.best = result.pool.best();
  }
  return result;
}

SystemModel::SystemModel(std::vector<CompiledExpression> components, std::vector<std::string> var_names)
    : components_(std::move(components)), var_names_(std::move(var_names)) {
  if (components_.empty()) throw std::invalid_argument("system model: no components");
  if (var_names_.empty()) var_names_ = default_var_names(components_.size());
  if (var_names_.size() != components_.size())
    throw std::invalid_argument("system model: need one variable name per component");
  for (const auto& expr : components_)
    if (expr.input_dim() != components_.size())
      throw std::invalid_argument("system model: every component must take the full state as input");
}

std::vector<double> SystemModel::evaluate(std::span<const double> x) const {
  std::vector<double> out(components_.size());
  evaluate_into(x, out);
  return out;
}

void SystemModel::evaluate_into(std::span<const double> x, std::span<double> out) const {
  if (x.size() != dim() || out.size() != dim()) throw std::invalid_argument("system model: dimension mismatch");
  for (std::size_t i = 0; i < components_.size(); ++i)
    out[i] = components_[i].evaluate_with(components_[i].params().values, x);
}

std::vector<std::string> SystemModel::symbolic_lines(int precision) const {
  std::vector<std::string> lines;
  SymbolicOptions options;
  options.precision = precision;
  options.var_names = var_names_;
  for (std::size_t i = 0; i < components_.size(); ++i)
    lines.push_back("d" + var_names_[i] + "/dt = " + to_symbolic_string(components_[i], options));
  return lines;
}

SystemModel assemble_system(const std::vector<ScoreRecord>& records, std::vector<std::string> var_names) {
  const std::size_t d = records.size();
  if (d == 0) throw std::invalid_argument("assemble_system: no component records");
  std::vector<const ScoreRecord*> by_component(d, nullptr);
  for (const auto& record : records) {
    if (record.component >= d) throw std::invalid_argument("assemble_system: component index out of range");
    if (by_component[record.component]) throw std::invalid_argument("assemble_system: duplicate component");
    by_component[record.component] = &record;
  }
  std::vector<CompiledExpression> expressions;
  for (std::size_t i = 0; i < d; ++i) {
    if (!by_component[i]) throw std::invalid_argument("assemble_system: missing component " + std::to_string(i));
    expressions.push_back(by_component[i]->expression());
  }
  return SystemModel(std::move(expressions), std::move(var_names));
}

}  // namespace fex
