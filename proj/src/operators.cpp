#include "fex/operators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fex {

namespace {

constexpr std::array<std::pair<UnaryOp, std::string_view>, 9> kUnaryNames{{
    {UnaryOp::Zero, "0"},
    {UnaryOp::One, "1"},
    {UnaryOp::Id, "id"},
    {UnaryOp::Square, "square"},
    {UnaryOp::Cube, "cube"},
    {UnaryOp::Quartic, "quartic"},
    {UnaryOp::Sin, "sin"},
    {UnaryOp::Cos, "cos"},
    {UnaryOp::Exp, "exp"},
}};

constexpr std::array<std::pair<BinaryOp, std::string_view>, 3> kBinaryNames{{
    {BinaryOp::Add, "add"},
    {BinaryOp::Sub, "sub"},
    {BinaryOp::Mul, "mul"},
}};

template <typename List>
bool has_duplicates(const List& list) {
  for (std::size_t i = 0; i < list.size(); ++i)
    for (std::size_t j = i + 1; j < list.size(); ++j)
      if (list[i] == list[j]) return true;
  return false;
}

}  // namespace

double apply_unary(UnaryOp op, double z) {
  switch (op) {
    case UnaryOp::Zero: return 0.0;
    case UnaryOp::One: return 1.0;
    case UnaryOp::Id: return z;
    case UnaryOp::Square: return z * z;
    case UnaryOp::Cube: return z * z * z;
    case UnaryOp::Quartic: {
      const double z2 = z * z;
      return z2 * z2;
    }
    case UnaryOp::Sin: return std::sin(z);
    case UnaryOp::Cos: return std::cos(z);
    case UnaryOp::Exp: return std::exp(std::min(z, kExpClamp));
  }
  return 0.0;
}

double unary_derivative(UnaryOp op, double z) {
  switch (op) {
    case UnaryOp::Zero:
    case UnaryOp::One: return 0.0;
    case UnaryOp::Id: return 1.0;
    case UnaryOp::Square: return 2.0 * z;
    case UnaryOp::Cube: return 3.0 * z * z;
    case UnaryOp::Quartic: return 4.0 * z * z * z;
    case UnaryOp::Sin: return std::cos(z);
    case UnaryOp::Cos: return -std::sin(z);
    // the clamp is flat above the threshold
    case UnaryOp::Exp: return z > kExpClamp ? 0.0 : std::exp(z);
  }
  return 0.0;
}

double apply_binary(BinaryOp op, double a, double b) {
  switch (op) {
    case BinaryOp::Add: return a + b;
    case BinaryOp::Sub: return a - b;
    case BinaryOp::Mul: return a * b;
  }
  return 0.0;
}

std::string_view tag_name(UnaryOp op) {
  for (const auto& [tag, name] : kUnaryNames)
    if (tag == op) return name;
  return "?";
}

std::string_view tag_name(BinaryOp op) {
  for (const auto& [tag, name] : kBinaryNames)
    if (tag == op) return name;
  return "?";
}

std::optional<UnaryOp> parse_unary(std::string_view tag) {
  for (const auto& [op, name] : kUnaryNames)
    if (name == tag) return op;
  return std::nullopt;
}

std::optional<BinaryOp> parse_binary(std::string_view tag) {
  for (const auto& [op, name] : kBinaryNames)
    if (name == tag) return op;
  return std::nullopt;
}

OperatorSet OperatorSet::standard() {
  OperatorSet set;
  for (const auto& entry : kUnaryNames) set.unary.push_back(entry.first);
  for (const auto& entry : kBinaryNames) set.binary.push_back(entry.first);
  return set;
}

std::optional<std::size_t> OperatorSet::index_of(UnaryOp op) const {
  auto it = std::find(unary.begin(), unary.end(), op);
  if (it == unary.end()) return std::nullopt;
  return static_cast<std::size_t>(it - unary.begin());
}

std::optional<std::size_t> OperatorSet::index_of(BinaryOp op) const {
  auto it = std::find(binary.begin(), binary.end(), op);
  if (it == binary.end()) return std::nullopt;
  return static_cast<std::size_t>(it - binary.begin());
}

void OperatorSet::validate() const {
  if (unary.empty() || binary.empty())
    throw std::invalid_argument("operator set: unary and binary lists must be nonempty");
  if (has_duplicates(unary)) throw std::invalid_argument("operator set: duplicate unary tag");
  if (has_duplicates(binary)) throw std::invalid_argument("operator set: duplicate binary tag");
}

}  // namespace fex
