#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fex/operators.hpp"

namespace fex {

enum class TemplateKind { Type1, Type2 };
enum class SlotKind { Unary, Binary };

std::string_view template_name(TemplateKind kind);
TemplateKind parse_template_kind(std::string_view name);

class EvaluationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One slot of a tree template. Unary leaves read the input vector directly;
/// a non-leaf unary reads `left`; a binary node combines `left` and `right`.
struct TreeNode {
  SlotKind kind = SlotKind::Unary;
  bool leaf = false;
  int left = -1;
  int right = -1;

  bool operator==(const TreeNode&) const = default;
};

/// Fixed binary-tree shape. Slots are stored in postorder (root last) and that
/// order is the canonical sequence index used by the controller.
///
///   Type1: u_root( b( u_leaf1, u_leaf2 ) )             slots: u1 u2 b u_root
///   Type2: b_root( b_inner( u_leaf1, u_leaf2 ), u_leaf3 ) slots: u1 u2 b_inner u3 b_root
class TreeTemplate {
 public:
  TreeTemplate(TemplateKind kind, std::size_t input_dim, std::vector<TreeNode> nodes);

  TemplateKind kind() const { return kind_; }
  std::size_t input_dim() const { return input_dim_; }
  std::span<const TreeNode> nodes() const { return nodes_; }
  std::size_t slot_count() const { return nodes_.size(); }
  std::size_t unary_slot_count() const;
  std::size_t binary_slot_count() const;
  SlotKind slot_kind(std::size_t slot) const { return nodes_.at(slot).kind; }

  bool operator==(const TreeTemplate&) const = default;

 private:
  TemplateKind kind_;
  std::size_t input_dim_;
  std::vector<TreeNode> nodes_;
};

TreeTemplate build_template(TemplateKind kind, std::size_t input_dim);

using OperatorTag = std::variant<UnaryOp, BinaryOp>;

struct OperatorSequence {
  std::vector<OperatorTag> entries;

  bool operator==(const OperatorSequence&) const = default;
  auto operator<=>(const OperatorSequence& other) const {
    return entries <=> other.entries;
  }
};

std::string_view tag_name(const OperatorTag& tag);
std::vector<std::string> sequence_tags(const OperatorSequence& sequence);
/// Inverse of sequence_tags; throws std::invalid_argument on unknown tags.
OperatorSequence parse_sequence(std::span<const std::string> tags);
std::string to_string(const OperatorSequence& sequence);

/// Throws std::invalid_argument when the sequence does not fit the template.
void validate_sequence(const TreeTemplate& tree, const OperatorSequence& sequence);

/// Flat θ. Layout follows slot order: each unary leaf holds d scales then one
/// bias, each non-leaf unary holds one scale then one bias, binaries hold none.
struct ExpressionParams {
  std::vector<double> values;

  bool operator==(const ExpressionParams&) const = default;
};

std::size_t param_count(const TreeTemplate& tree, const OperatorSequence& sequence);

/// f(x; tree, sequence, params). Immutable once built, so concurrent
/// evaluation from several threads is safe.
class CompiledExpression {
 public:
  CompiledExpression(TreeTemplate tree, OperatorSequence sequence, ExpressionParams params);
  /// All-zero parameters.
  CompiledExpression(TreeTemplate tree, OperatorSequence sequence);

  const TreeTemplate& tree() const { return tree_; }
  const OperatorSequence& sequence() const { return sequence_; }
  const ExpressionParams& params() const { return params_; }
  std::size_t input_dim() const { return tree_.input_dim(); }
  std::size_t param_count() const { return params_.values.size(); }
  /// Offset of the first parameter owned by `slot` (binary slots own none).
  std::size_t param_offset(std::size_t slot) const { return offsets_.at(slot); }

  CompiledExpression with_params(ExpressionParams params) const;

  /// Unchecked evaluation with an external parameter vector; may return
  /// non-finite values.
  double evaluate_with(std::span<const double> params, std::span<const double> x) const;

  /// Adds scale * df/dtheta into `grad` and returns f. `grad` must hold
  /// param_count() entries.
  double accumulate_gradient(std::span<const double> params, std::span<const double> x,
                             double scale, std::span<double> grad) const;

 private:
  TreeTemplate tree_;
  OperatorSequence sequence_;
  ExpressionParams params_;
  std::vector<std::size_t> offsets_;
};

/// Throws EvaluationFailure when the result is not finite.
double evaluate(const CompiledExpression& expr, std::span<const double> x);

/// Exact df/dtheta by reverse traversal of the tree.
std::vector<double> param_gradient(const CompiledExpression& expr, std::span<const double> x);

struct SymbolicOptions {
  int precision = 4;
  /// Drop terms whose coefficient rounds to zero at `precision`.
  bool elide = false;
  /// Defaults to x1..xd when empty.
  std::vector<std::string> var_names;
};

std::string to_symbolic_string(const CompiledExpression& expr, const SymbolicOptions& options = {});

}  // namespace fex
