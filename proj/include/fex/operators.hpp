#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fex {

enum class UnaryOp { Zero, One, Id, Square, Cube, Quartic, Sin, Cos, Exp };
enum class BinaryOp { Add, Sub, Mul };

// Upper bound applied to the argument of exp before evaluation.
inline constexpr double kExpClamp = 30.0;

double apply_unary(UnaryOp op, double z);
double unary_derivative(UnaryOp op, double z);
double apply_binary(BinaryOp op, double a, double b);

std::string_view tag_name(UnaryOp op);
std::string_view tag_name(BinaryOp op);
std::optional<UnaryOp> parse_unary(std::string_view tag);
std::optional<BinaryOp> parse_binary(std::string_view tag);

/// Ordered operator vocabularies. Controller logits index into these lists,
/// so the order must stay fixed for the lifetime of a search.
struct OperatorSet {
  std::vector<UnaryOp> unary;
  std::vector<BinaryOp> binary;

  /// {0, 1, id, square, cube, quartic, sin, cos, exp} and {add, sub, mul}.
  static OperatorSet standard();

  std::optional<std::size_t> index_of(UnaryOp op) const;
  std::optional<std::size_t> index_of(BinaryOp op) const;

  /// Throws std::invalid_argument on duplicated or empty lists.
  void validate() const;
};

}  // namespace fex
