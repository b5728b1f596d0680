#include "fex/expression.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace fex {

namespace {

constexpr std::size_t kMaxSlots = 8;

UnaryOp unary_at(const OperatorSequence& seq, std::size_t slot) {
  return std::get<UnaryOp>(seq.entries[slot]);
}

BinaryOp binary_at(const OperatorSequence& seq, std::size_t slot) {
  return std::get<BinaryOp>(seq.entries[slot]);
}

std::string format_number(double value, int precision) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*f", precision, value);
  std::string text(buffer);
  // "-0.0000" reads as a sign error in printed equations
  if (text.front() == '-' && text.find_first_not_of("-0.") == std::string::npos) text.erase(0, 1);
  return text;
}

bool rounds_to_zero(double value, int precision) {
  return std::abs(value) < 0.5 * std::pow(10.0, -precision);
}

// Applies a unary tag to an already-formatted argument.
std::string apply_text(UnaryOp op, const std::string& arg, bool arg_is_atom) {
  const std::string base = arg_is_atom ? arg : "(" + arg + ")";
  switch (op) {
    case UnaryOp::Id: return base;
    case UnaryOp::Square: return base + "^2";
    case UnaryOp::Cube: return base + "^3";
    case UnaryOp::Quartic: return base + "^4";
    case UnaryOp::Sin: return "sin(" + arg + ")";
    case UnaryOp::Cos: return "cos(" + arg + ")";
    case UnaryOp::Exp: return "exp(" + arg + ")";
    case UnaryOp::Zero: return "0";
    case UnaryOp::One: return "1";
  }
  return arg;
}

// Joins coefficient*term pairs and a trailing constant into infix text.
std::string affine_text(const std::vector<std::pair<double, std::string>>& terms, double constant,
                        const SymbolicOptions& options) {
  std::string out;
  auto append = [&](double coefficient, const std::string& body) {
    const bool negative = coefficient < 0.0 && !rounds_to_zero(coefficient, options.precision);
    const std::string magnitude = format_number(std::abs(coefficient), options.precision);
    if (out.empty()) {
      out += negative ? "-" : "";
    } else {
      out += negative ? " - " : " + ";
    }
    out += body.empty() ? magnitude : magnitude + "*" + body;
  };
  for (const auto& [coefficient, body] : terms) {
    if (options.elide && rounds_to_zero(coefficient, options.precision)) continue;
    append(coefficient, body);
  }
  const bool print_constant = !(options.elide && rounds_to_zero(constant, options.precision));
  if (print_constant && !(constant == 0.0 && !out.empty())) append(constant, "");
  if (out.empty()) return "0";
  return out;
}

}  // namespace

std::string_view template_name(TemplateKind kind) {
  return kind == TemplateKind::Type1 ? "type1" : "type2";
}

TemplateKind parse_template_kind(std::string_view name) {
  if (name == "type1" || name == "Type1") return TemplateKind::Type1;
  if (name == "type2" || name == "Type2") return TemplateKind::Type2;
  throw std::invalid_argument("unknown template kind '" + std::string(name) + "'");
}

TreeTemplate::TreeTemplate(TemplateKind kind, std::size_t input_dim, std::vector<TreeNode> nodes)
    : kind_(kind), input_dim_(input_dim), nodes_(std::move(nodes)) {
  if (input_dim_ == 0) throw std::invalid_argument("tree template: input_dim must be >= 1");
  if (nodes_.empty() || nodes_.size() > kMaxSlots)
    throw std::invalid_argument("tree template: unsupported slot count");
}

std::size_t TreeTemplate::unary_slot_count() const {
  std::size_t n = 0;
  for (const auto& node : nodes_) n += node.kind == SlotKind::Unary;
  return n;
}

std::size_t TreeTemplate::binary_slot_count() const { return nodes_.size() - unary_slot_count(); }

TreeTemplate build_template(TemplateKind kind, std::size_t input_dim) {
  const TreeNode leaf{SlotKind::Unary, true, -1, -1};
  std::vector<TreeNode> nodes;
  if (kind == TemplateKind::Type1) {
    nodes = {leaf, leaf, TreeNode{SlotKind::Binary, false, 0, 1}, TreeNode{SlotKind::Unary, false, 2, -1}};
  } else {
    nodes = {leaf, leaf, TreeNode{SlotKind::Binary, false, 0, 1}, leaf,
             TreeNode{SlotKind::Binary, false, 2, 3}};
  }
  return TreeTemplate(kind, input_dim, std::move(nodes));
}

std::string_view tag_name(const OperatorTag& tag) {
  return std::visit([](auto op) { return tag_name(op); }, tag);
}

std::vector<std::string> sequence_tags(const OperatorSequence& sequence) {
  std::vector<std::string> tags;
  tags.reserve(sequence.entries.size());
  for (const auto& entry : sequence.entries) tags.emplace_back(tag_name(entry));
  return tags;
}

OperatorSequence parse_sequence(std::span<const std::string> tags) {
  OperatorSequence sequence;
  for (const auto& tag : tags) {
    // "0"/"1" and the binary names are disjoint, so lookup order is irrelevant
    if (auto unary = parse_unary(tag)) {
      sequence.entries.emplace_back(*unary);
    } else if (auto binary = parse_binary(tag)) {
      sequence.entries.emplace_back(*binary);
    } else {
      throw std::invalid_argument("unknown operator tag '" + tag + "'");
    }
  }
  return sequence;
}

std::string to_string(const OperatorSequence& sequence) {
  std::string out = "(";
  for (std::size_t i = 0; i < sequence.entries.size(); ++i) {
    if (i) out += ", ";
    out += tag_name(sequence.entries[i]);
  }
  return out + ")";
}

void validate_sequence(const TreeTemplate& tree, const OperatorSequence& sequence) {
  if (sequence.entries.size() != tree.slot_count())
    throw std::invalid_argument("operator sequence has " + std::to_string(sequence.entries.size()) +
                                " entries, template has " + std::to_string(tree.slot_count()) + " slots");
  for (std::size_t slot = 0; slot < tree.slot_count(); ++slot) {
    const bool unary_tag = std::holds_alternative<UnaryOp>(sequence.entries[slot]);
    if (unary_tag != (tree.slot_kind(slot) == SlotKind::Unary))
      throw std::invalid_argument("operator sequence entry " + std::to_string(slot) +
                                  " does not match the slot kind");
  }
}

std::size_t param_count(const TreeTemplate& tree, const OperatorSequence& sequence) {
  validate_sequence(tree, sequence);
  std::size_t count = 0;
  for (const auto& node : tree.nodes()) {
    if (node.kind != SlotKind::Unary) continue;
    count += node.leaf ? tree.input_dim() + 1 : 2;
  }
  return count;
}

CompiledExpression::CompiledExpression(TreeTemplate tree, OperatorSequence sequence, ExpressionParams params)
    : tree_(std::move(tree)), sequence_(std::move(sequence)), params_(std::move(params)) {
  const std::size_t expected = fex::param_count(tree_, sequence_);
  if (params_.values.size() != expected)
    throw std::invalid_argument("expression params: expected " + std::to_string(expected) + " values, got " +
                                std::to_string(params_.values.size()));
  offsets_.resize(tree_.slot_count(), 0);
  std::size_t offset = 0;
  for (std::size_t slot = 0; slot < tree_.slot_count(); ++slot) {
    offsets_[slot] = offset;
    const auto& node = tree_.nodes()[slot];
    if (node.kind == SlotKind::Unary) offset += node.leaf ? tree_.input_dim() + 1 : 2;
  }
}

CompiledExpression::CompiledExpression(TreeTemplate tree, OperatorSequence sequence)
    : CompiledExpression(tree, sequence,
                         ExpressionParams{std::vector<double>(fex::param_count(tree, sequence), 0.0)}) {}

CompiledExpression CompiledExpression::with_params(ExpressionParams params) const {
  return CompiledExpression(tree_, sequence_, std::move(params));
}

double CompiledExpression::evaluate_with(std::span<const double> params, std::span<const double> x) const {
  const auto nodes = tree_.nodes();
  const std::size_t d = tree_.input_dim();
  std::array<double, kMaxSlots> value{};
  for (std::size_t slot = 0; slot < nodes.size(); ++slot) {
    const auto& node = nodes[slot];
    if (node.kind == SlotKind::Binary) {
      value[slot] = apply_binary(binary_at(sequence_, slot), value[node.left], value[node.right]);
      continue;
    }
    const UnaryOp op = unary_at(sequence_, slot);
    const double* theta = params.data() + offsets_[slot];
    if (node.leaf) {
      double sum = theta[d];
      for (std::size_t j = 0; j < d; ++j) sum += theta[j] * apply_unary(op, x[j]);
      value[slot] = sum;
    } else {
      value[slot] = theta[0] * apply_unary(op, value[node.left]) + theta[1];
    }
  }
  return value[nodes.size() - 1];
}

double CompiledExpression::accumulate_gradient(std::span<const double> params, std::span<const double> x,
                                               double scale, std::span<double> grad) const {
  const auto nodes = tree_.nodes();
  const std::size_t d = tree_.input_dim();
  std::array<double, kMaxSlots> value{};
  for (std::size_t slot = 0; slot < nodes.size(); ++slot) {
    const auto& node = nodes[slot];
    if (node.kind == SlotKind::Binary) {
      value[slot] = apply_binary(binary_at(sequence_, slot), value[node.left], value[node.right]);
      continue;
    }
    const UnaryOp op = unary_at(sequence_, slot);
    const double* theta = params.data() + offsets_[slot];
    if (node.leaf) {
      double sum = theta[d];
      for (std::size_t j = 0; j < d; ++j) sum += theta[j] * apply_unary(op, x[j]);
      value[slot] = sum;
    } else {
      value[slot] = theta[0] * apply_unary(op, value[node.left]) + theta[1];
    }
  }

  // Reverse sweep: postorder guarantees parents come after children.
  std::array<double, kMaxSlots> adjoint{};
  adjoint[nodes.size() - 1] = scale;
  for (std::size_t slot = nodes.size(); slot-- > 0;) {
    const auto& node = nodes[slot];
    const double a = adjoint[slot];
    if (node.kind == SlotKind::Binary) {
      switch (binary_at(sequence_, slot)) {
        case BinaryOp::Add:
          adjoint[node.left] += a;
          adjoint[node.right] += a;
          break;
        case BinaryOp::Sub:
          adjoint[node.left] += a;
          adjoint[node.right] -= a;
          break;
        case BinaryOp::Mul:
          adjoint[node.left] += a * value[node.right];
          adjoint[node.right] += a * value[node.left];
          break;
      }
      continue;
    }
    const UnaryOp op = unary_at(sequence_, slot);
    const std::size_t offset = offsets_[slot];
    if (node.leaf) {
      for (std::size_t j = 0; j < d; ++j) grad[offset + j] += a * apply_unary(op, x[j]);
      grad[offset + d] += a;
    } else {
      const double z = value[node.left];
      grad[offset] += a * apply_unary(op, z);
      grad[offset + 1] += a;
      adjoint[node.left] += a * params[offset] * unary_derivative(op, z);
    }
  }
  return value[nodes.size() - 1];
}

double evaluate(const CompiledExpression& expr, std::span<const double> x) {
  if (x.size() != expr.input_dim())
    throw std::invalid_argument("evaluate: input has " + std::to_string(x.size()) + " entries, expected " +
                                std::to_string(expr.input_dim()));
  const double value = expr.evaluate_with(expr.params().values, x);
  if (!std::isfinite(value)) throw EvaluationFailure("expression evaluated to a non-finite value");
  return value;
}

std::vector<double> param_gradient(const CompiledExpression& expr, std::span<const double> x) {
  if (x.size() != expr.input_dim()) throw std::invalid_argument("param_gradient: input dimension mismatch");
  std::vector<double> grad(expr.param_count(), 0.0);
  const double value = expr.accumulate_gradient(expr.params().values, x, 1.0, grad);
  if (!std::isfinite(value)) throw EvaluationFailure("expression evaluated to a non-finite value");
  return grad;
}

std::string to_symbolic_string(const CompiledExpression& expr, const SymbolicOptions& options) {
  const auto& tree = expr.tree();
  const auto nodes = tree.nodes();
  const std::size_t d = tree.input_dim();
  const auto& theta = expr.params().values;

  std::vector<std::string> names = options.var_names;
  if (names.empty())
    for (std::size_t j = 0; j < d; ++j) names.push_back("x" + std::to_string(j + 1));
  if (names.size() != d) throw std::invalid_argument("to_symbolic_string: need one name per input");

  std::vector<std::string> text(nodes.size());
  for (std::size_t slot = 0; slot < nodes.size(); ++slot) {
    const auto& node = nodes[slot];
    const std::size_t offset = expr.param_offset(slot);
    if (node.kind == SlotKind::Binary) {
      const char* op = " + ";
      switch (binary_at(expr.sequence(), slot)) {
        case BinaryOp::Add: op = " + "; break;
        case BinaryOp::Sub: op = " - "; break;
        case BinaryOp::Mul: op = " * "; break;
      }
      text[slot] = "(" + text[node.left] + ")" + op + "(" + text[node.right] + ")";
      continue;
    }
    const UnaryOp op = unary_at(expr.sequence(), slot);
    std::vector<std::pair<double, std::string>> terms;
    double constant = 0.0;
    if (node.leaf) {
      constant = theta[offset + d];
      if (op == UnaryOp::One) {
        for (std::size_t j = 0; j < d; ++j) constant += theta[offset + j];
      } else if (op != UnaryOp::Zero) {
        for (std::size_t j = 0; j < d; ++j) terms.emplace_back(theta[offset + j], apply_text(op, names[j], true));
      }
      if (terms.empty() && constant == 0.0) {
        text[slot] = "0";
        continue;
      }
    } else {
      constant = theta[offset + 1];
      if (op == UnaryOp::One) {
        constant += theta[offset];
      } else if (op != UnaryOp::Zero) {
        terms.emplace_back(theta[offset], apply_text(op, text[node.left], false));
      }
    }
    text[slot] = affine_text(terms, constant, options);
  }
  return text[nodes.size() - 1];
}

}  // namespace fex
