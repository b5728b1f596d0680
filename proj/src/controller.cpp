#include "fex/controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fex {

ControllerPolicy ControllerPolicy::uniform(TreeTemplate tree, OperatorSet operators, double epsilon, double lr) {
  operators.validate();
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("controller: epsilon must lie in [0, 1]");
  if (!(lr >= 0.0)) throw std::invalid_argument("controller: lr must be >= 0");
  ControllerPolicy policy{std::move(tree), std::move(operators), {}, epsilon, lr};
  for (std::size_t slot = 0; slot < policy.tree.slot_count(); ++slot)
    policy.logits.emplace_back(policy.support_size(slot), 0.0);
  return policy;
}

std::size_t ControllerPolicy::support_size(std::size_t slot) const {
  return tree.slot_kind(slot) == SlotKind::Unary ? operators.unary.size() : operators.binary.size();
}

std::vector<double> ControllerPolicy::probabilities(std::size_t slot) const { return softmax(logits.at(slot)); }

OperatorTag ControllerPolicy::tag_at(std::size_t slot, std::size_t index) const {
  if (tree.slot_kind(slot) == SlotKind::Unary) return operators.unary.at(index);
  return operators.binary.at(index);
}

std::size_t ControllerPolicy::index_of(std::size_t slot, const OperatorTag& tag) const {
  std::optional<std::size_t> index;
  if (tree.slot_kind(slot) == SlotKind::Unary) {
    if (const auto* op = std::get_if<UnaryOp>(&tag)) index = operators.index_of(*op);
  } else if (const auto* op = std::get_if<BinaryOp>(&tag)) {
    index = operators.index_of(*op);
  }
  if (!index) throw std::invalid_argument("controller: tag not in the support of slot " + std::to_string(slot));
  return *index;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - top);
    total += p[k];
  }
  for (double& value : p) value /= total;
  return p;
}

SampleBatch sample_sequences(const ControllerPolicy& policy, std::size_t n, Rng& rng) {
  if (n == 0) throw std::invalid_argument("sample_sequences: batch size must be >= 1");
  const std::size_t slots = policy.tree.slot_count();
  std::vector<std::vector<double>> probs;
  for (std::size_t slot = 0; slot < slots; ++slot) probs.push_back(policy.probabilities(slot));

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SampleBatch batch;
  for (std::size_t b = 0; b < n; ++b) {
    OperatorSequence sequence;
    std::vector<std::size_t> choice(slots);
    std::vector<bool> explored(slots);
    for (std::size_t slot = 0; slot < slots; ++slot) {
      const std::size_t size = probs[slot].size();
      const bool uniform_branch = unit(rng) < policy.epsilon;
      const double u = unit(rng);
      std::size_t index = size - 1;
      if (uniform_branch) {
        index = std::min(size - 1, static_cast<std::size_t>(u * static_cast<double>(size)));
      } else {
        double cumulative = 0.0;
        for (std::size_t k = 0; k < size; ++k) {
          cumulative += probs[slot][k];
          if (u < cumulative) {
            index = k;
            break;
          }
        }
      }
      choice[slot] = index;
      explored[slot] = uniform_branch;
      sequence.entries.push_back(policy.tag_at(slot, index));
    }
    batch.sequences.push_back(std::move(sequence));
    batch.choices.push_back(std::move(choice));
    batch.explored.push_back(std::move(explored));
  }
  return batch;
}

double log_prob(const ControllerPolicy& policy, const OperatorSequence& sequence) {
  validate_sequence(policy.tree, sequence);
  double total = 0.0;
  for (std::size_t slot = 0; slot < sequence.entries.size(); ++slot) {
    const auto& logits = policy.logits[slot];
    const double top = *std::max_element(logits.begin(), logits.end());
    double norm = 0.0;
    for (double value : logits) norm += std::exp(value - top);
    total += logits[policy.index_of(slot, sequence.entries[slot])] - top - std::log(norm);
  }
  return total;
}

double quantile_threshold(const std::vector<double>& scores, double nu) {
  if (scores.empty()) throw std::invalid_argument("quantile_threshold: empty score list");
  if (!(nu > 0.0 && nu < 1.0)) throw std::invalid_argument("quantile_threshold: nu must lie in (0, 1)");
  const double raw = nu * static_cast<double>(scores.size());
  // guard against products like 0.3 * 10 = 3.0000000000000004
  auto top_count = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  top_count = std::clamp<std::size_t>(top_count, 1, scores.size());
  std::vector<double> sorted = scores;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(top_count - 1), sorted.end(),
                   std::greater<>());
  return sorted[top_count - 1];
}

void policy_update(ControllerPolicy& policy, const SampleBatch& batch, double nu) {
  if (batch.scores.size() != batch.sequences.size())
    throw std::invalid_argument("policy_update: batch is not fully scored");
  for (double s : batch.scores)
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("policy_update: scores must lie in [0, 1]");

  const double threshold = quantile_threshold(batch.scores, nu);
  std::size_t top = 0;
  for (double s : batch.scores) top += s >= threshold;

  std::vector<std::vector<double>> probs;
  for (std::size_t slot = 0; slot < policy.logits.size(); ++slot) probs.push_back(policy.probabilities(slot));

  std::vector<std::vector<double>> grad;
  for (const auto& row : policy.logits) grad.emplace_back(row.size(), 0.0);

  for (std::size_t b = 0; b < batch.sequences.size(); ++b) {
    const double advantage = batch.scores[b] - threshold;
    if (batch.scores[b] < threshold || advantage == 0.0) continue;
    const double weight = advantage / static_cast<double>(top);
    for (std::size_t slot = 0; slot < grad.size(); ++slot) {
      const std::size_t chosen = policy.index_of(slot, batch.sequences[b].entries[slot]);
      // d log softmax_k / d logit_m = [k == m] - p_m
      for (std::size_t m = 0; m < grad[slot].size(); ++m)
        grad[slot][m] += weight * ((m == chosen ? 1.0 : 0.0) - probs[slot][m]);
    }
  }

  for (std::size_t slot = 0; slot < grad.size(); ++slot)
    for (std::size_t m = 0; m < grad[slot].size(); ++m) policy.logits[slot][m] += policy.lr * grad[slot][m];
}

}  // namespace fex
