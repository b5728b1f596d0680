#pragma once

#include <random>
#include <vector>

#include "fex/expression.hpp"
#include "fex/operators.hpp"

namespace fex {

using Rng = std::mt19937_64;

/// Factored categorical policy: one independent logit vector per template
/// slot. Unary slots range over `operators.unary`, binary slots over
/// `operators.binary`.
struct ControllerPolicy {
  TreeTemplate tree;
  OperatorSet operators;
  std::vector<std::vector<double>> logits;
  double epsilon = 0.1;
  double lr = 0.002;

  /// Uniform (all-zero) logits.
  static ControllerPolicy uniform(TreeTemplate tree, OperatorSet operators, double epsilon, double lr);

  std::size_t support_size(std::size_t slot) const;
  std::vector<double> probabilities(std::size_t slot) const;
  OperatorTag tag_at(std::size_t slot, std::size_t index) const;
  std::size_t index_of(std::size_t slot, const OperatorTag& tag) const;
};

struct SampleBatch {
  std::vector<OperatorSequence> sequences;
  std::vector<std::vector<std::size_t>> choices;
  /// true where the slot was drawn from the epsilon-uniform branch
  std::vector<std::vector<bool>> explored;
  std::vector<double> scores;
};

std::vector<double> softmax(const std::vector<double>& logits);

SampleBatch sample_sequences(const ControllerPolicy& policy, std::size_t n, Rng& rng);

/// Sum over slots of log softmax(logits_j)[e_j]. The epsilon mixture is not
/// part of this probability.
double log_prob(const ControllerPolicy& policy, const OperatorSequence& sequence);

/// Score that the top ceil(nu * n) entries of the batch reach: the k-th largest
/// value with k = max(1, ceil(nu * n)).
double quantile_threshold(const std::vector<double>& scores, double nu);

/// One risk-seeking REINFORCE step with the batch quantile as baseline:
///   logits += lr / |top| * sum_{S(e) >= S_nu} (S(e) - S_nu) * dlog p(e)/dlogits
void policy_update(ControllerPolicy& policy, const SampleBatch& batch, double nu);

}  // namespace fex
