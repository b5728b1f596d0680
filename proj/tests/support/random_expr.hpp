#pragma once

// Generators shared by the property tests.

#include <random>
#include <vector>

#include "fex/expression.hpp"

namespace fex::testing {

inline OperatorSequence random_sequence(const TreeTemplate& tree, std::mt19937_64& rng,
                                        const OperatorSet& ops = OperatorSet::standard()) {
  OperatorSequence sequence;
  for (std::size_t slot = 0; slot < tree.slot_count(); ++slot) {
    if (tree.slot_kind(slot) == SlotKind::Unary) {
      std::uniform_int_distribution<std::size_t> pick(0, ops.unary.size() - 1);
      sequence.entries.emplace_back(ops.unary[pick(rng)]);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, ops.binary.size() - 1);
      sequence.entries.emplace_back(ops.binary[pick(rng)]);
    }
  }
  return sequence;
}

inline std::vector<double> uniform_vector(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

inline CompiledExpression random_expression(std::size_t dim, std::mt19937_64& rng, double param_scale = 1.0) {
  const TemplateKind kind = rng() % 2 == 0 ? TemplateKind::Type1 : TemplateKind::Type2;
  TreeTemplate tree = build_template(kind, dim);
  OperatorSequence sequence = random_sequence(tree, rng);
  const std::size_t p = param_count(tree, sequence);
  return CompiledExpression(std::move(tree), std::move(sequence),
                            ExpressionParams{uniform_vector(p, -param_scale, param_scale, rng)});
}

inline OperatorSequence make_sequence(std::initializer_list<OperatorTag> tags) {
  return OperatorSequence{std::vector<OperatorTag>(tags)};
}

}  // namespace fex::testing
