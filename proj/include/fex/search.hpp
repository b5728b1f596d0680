#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fex/controller.hpp"
#include "fex/dataset.hpp"
#include "fex/expression.hpp"
#include "fex/optim.hpp"
#include "fex/residual_loss.hpp"

namespace fex {

struct SearchConfig {
  int epochs = 100;
  std::size_t batch_size = 10;
  std::size_t pool_capacity = 10;
  double nu = 0.2;
  double epsilon = 0.1;
  double controller_lr = 0.002;
  OptimConfig optim;
  TemplateKind default_template = TemplateKind::Type2;
  /// Per-component override; empty means every component uses default_template.
  std::vector<TemplateKind> component_templates;
  OperatorSet operators = OperatorSet::standard();
  std::uint64_t seed = 0;
  /// Worker threads for batch scoring; 0 picks the hardware concurrency.
  unsigned threads = 0;

  TemplateKind template_for(std::size_t component) const;
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// S = 1 / (1 + L); the +infinity loss sentinel maps to 0.
double score_from_loss(double loss);

struct ScoreRecord {
  OperatorSequence sequence;
  TemplateKind template_kind = TemplateKind::Type2;
  std::size_t input_dim = 0;
  std::size_t component = 0;
  double score = 0.0;
  double loss = kLossSentinel;
  ExpressionParams params;

  bool failed() const { return !(loss < kLossSentinel); }
  CompiledExpression expression() const;
};

/// Keeps the K best distinct sequences by score (ties broken by lower loss).
class CandidatePool {
 public:
  explicit CandidatePool(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  /// Best first.
  const std::vector<ScoreRecord>& entries() const { return entries_; }
  std::vector<ScoreRecord>& mutable_entries() { return entries_; }
  const ScoreRecord& best() const;

  /// Returns true when the pool changed. Failed records are rejected.
  bool insert(const ScoreRecord& record);
  void resort();

 private:
  std::size_t capacity_;
  std::vector<ScoreRecord> entries_;
};

/// Orders records best first: higher score, then lower loss, then sequence.
bool better_record(const ScoreRecord& a, const ScoreRecord& b);

CandidatePool pool_insert(CandidatePool pool, const ScoreRecord& record);

/// Random init on [-1, 1] (up to three re-draws while the loss is not
/// finite), then the two-stage fit. Never throws for numerical trouble: a
/// failed fit yields the score-0 sentinel record.
ScoreRecord score_sequence(const OperatorSequence& sequence, const TreeTemplate& tree, const ResidualProblem& problem,
                           const OptimConfig& optim, Rng& rng);
ScoreRecord score_sequence(const OperatorSequence& sequence, const TreeTemplate& tree, const TrajectoryDataset& data,
                           std::size_t component, const OptimConfig& optim, Rng& rng);

struct EpochReport {
  std::size_t component = 0;
  int epoch = 0;
  double batch_best = 0.0;
  double pool_best = 0.0;
};

struct SearchResult {
  ScoreRecord best;
  CandidatePool pool{1};
  /// Best score in each epoch's batch.
  std::vector<double> history;
  std::size_t sequences_scored = 0;
};

using ProgressCallback = std::function<void(const EpochReport&)>;

/// Full search for one component (zero-based) on the training data.
SearchResult search_component(const TrajectoryDataset& train, std::size_t component, const SearchConfig& cfg,
                              const ProgressCallback& progress = {});

/// Vector field assembled from one learned expression per component.
class SystemModel {
 public:
  SystemModel(std::vector<CompiledExpression> components, std::vector<std::string> var_names);

  std::size_t dim() const { return components_.size(); }
  const std::vector<CompiledExpression>& components() const { return components_; }
  const std::vector<std::string>& var_names() const { return var_names_; }

  /// Unchecked; entries may be non-finite.
  std::vector<double> evaluate(std::span<const double> x) const;
  void evaluate_into(std::span<const double> x, std::span<double> out) const;
  /// One "d<name>/dt = ..." line per component.
  std::vector<std::string> symbolic_lines(int precision = 4) const;

 private:
  std::vector<CompiledExpression> components_;
  std::vector<std::string> var_names_;
};

/// Expects exactly one record per component index 0..d-1, in any order.
SystemModel assemble_system(const std::vector<ScoreRecord>& records, std::vector<std::string> var_names);

}  // namespace fex
