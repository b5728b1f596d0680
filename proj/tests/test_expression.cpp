#include <doctest.h>

#include <cmath>
#include <random>

#include "fex/dataset.hpp"
#include "fex/expression.hpp"
#include "support/infix_eval.hpp"
#include "support/random_expr.hpp"

using namespace fex;
using fex::testing::make_sequence;

namespace {

// Type2 with leaf 2 and leaf 3 zeroed evaluates to leaf 1 alone.
CompiledExpression single_leaf(UnaryOp op, std::vector<double> alpha, double beta) {
  const std::size_t d = alpha.size();
  TreeTemplate tree = build_template(TemplateKind::Type2, d);
  auto seq = make_sequence({op, UnaryOp::Zero, BinaryOp::Add, UnaryOp::Zero, BinaryOp::Add});
  std::vector<double> theta(param_count(tree, seq), 0.0);
  for (std::size_t j = 0; j < d; ++j) theta[j] = alpha[j];
  theta[d] = beta;
  return CompiledExpression(tree, seq, ExpressionParams{theta});
}

std::vector<double> central_difference(const CompiledExpression& expr, std::span<const double> x, double h) {
  std::vector<double> theta = expr.params().values;
  std::vector<double> grad(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double saved = theta[k];
    theta[k] = saved + h;
    const double up = expr.evaluate_with(theta, x);
    theta[k] = saved - h;
    const double down = expr.evaluate_with(theta, x);
    theta[k] = saved;
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("build_template slot layout") {
  const auto type1 = build_template(TemplateKind::Type1, 3);
  CHECK(type1.slot_count() == 4);
  CHECK(type1.unary_slot_count() == 3);
  CHECK(type1.binary_slot_count() == 1);
  // postorder: two leaves, the binary, then the unary root
  CHECK(type1.slot_kind(2) == SlotKind::Binary);
  CHECK(type1.slot_kind(3) == SlotKind::Unary);

  const auto type2 = build_template(TemplateKind::Type2, 3);
  CHECK(type2.slot_count() == 5);
  CHECK(type2.unary_slot_count() == 3);
  CHECK(type2.binary_slot_count() == 2);

  const auto narrow = build_template(TemplateKind::Type2, 1);
  CHECK(narrow.slot_count() == 5);
  const auto seq = make_sequence({UnaryOp::Id, UnaryOp::Id, BinaryOp::Add, UnaryOp::Id, BinaryOp::Add});
  const CompiledExpression expr(narrow, seq);
  // each leaf holds alpha (length 1) and beta
  CHECK(expr.param_offset(1) - expr.param_offset(0) == 2);

  CHECK_THROWS_AS(build_template(TemplateKind::Type1, 0), std::invalid_argument);
}

TEST_CASE("param_count by structure") {
  const auto all_leaf = make_sequence({UnaryOp::Sin, UnaryOp::Id, BinaryOp::Mul, UnaryOp::Exp, BinaryOp::Sub});
  CHECK(param_count(build_template(TemplateKind::Type2, 3), all_leaf) == 12);
  CHECK(param_count(build_template(TemplateKind::Type2, 5), all_leaf) == 18);
  const auto type1 = make_sequence({UnaryOp::Id, UnaryOp::Id, BinaryOp::Sub, UnaryOp::Square});
  CHECK(param_count(build_template(TemplateKind::Type1, 1), type1) == 6);

  CHECK_THROWS_AS(param_count(build_template(TemplateKind::Type1, 2), all_leaf), std::invalid_argument);
  const auto wrong_kind = make_sequence({UnaryOp::Id, BinaryOp::Add, BinaryOp::Sub, UnaryOp::Square});
  CHECK_THROWS_AS(param_count(build_template(TemplateKind::Type1, 2), wrong_kind), std::invalid_argument);
}

TEST_CASE("leaf evaluation rule") {
  const auto square = single_leaf(UnaryOp::Square, {1.0, 2.0}, 0.5);
  const std::vector<double> x{2.0, 3.0};
  CHECK(evaluate(square, x) == doctest::Approx(22.5).epsilon(1e-15));

  const auto constant = single_leaf(UnaryOp::Id, {0.0, 0.0, 0.0}, -1.75);
  const std::vector<double> anywhere{4.0, -2.0, 9.0};
  CHECK(evaluate(constant, anywhere) == -1.75);

  // the "1" leaf is a trainable constant: sum(alpha) + beta
  const auto one = single_leaf(UnaryOp::One, {0.25, 0.5}, 1.0);
  CHECK(evaluate(one, x) == doctest::Approx(1.75));
}

TEST_CASE("learned dR/dt product at the origin") {
  const TreeTemplate tree = build_template(TemplateKind::Type2, 3);
  const auto seq = make_sequence({UnaryOp::Cube, UnaryOp::Cube, BinaryOp::Mul, UnaryOp::Sin, BinaryOp::Mul});
  const ExpressionParams theta{{-0.9030, 2.4025, -0.0262, 0.0311,   //
                                -0.1840, -0.0432, -2.5147, -0.0181,  //
                                0.1919, 0.1812, 0.7006, -0.7283}};
  const CompiledExpression expr(tree, seq, theta);
  const std::vector<double> origin{0.0, 0.0, 0.0};
  CHECK(evaluate(expr, origin) == doctest::Approx(0.0311 * -0.0181 * -0.7283).epsilon(1e-14));
}

TEST_CASE("exp is clamped and failures are reported") {
  const auto big = single_leaf(UnaryOp::Exp, {1.0}, 0.0);
  const std::vector<double> x{1000.0};
  CHECK(evaluate(big, x) == doctest::Approx(std::exp(kExpClamp)));
  CHECK(param_gradient(big, x)[0] == doctest::Approx(std::exp(kExpClamp)));

  const auto overflow = single_leaf(UnaryOp::Quartic, {1.0}, 0.0);
  const std::vector<double> huge{1e100};
  CHECK_THROWS_AS(evaluate(overflow, huge), EvaluationFailure);
}

TEST_CASE("param_gradient hand-checked leaves") {
  const auto linear = single_leaf(UnaryOp::Id, {0.3, -0.7}, 0.1);
  const std::vector<double> x{2.0, 3.0};
  const auto g = param_gradient(linear, x);
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 3.0);
  CHECK(g[2] == 1.0);

  const auto square = single_leaf(UnaryOp::Square, {1.0, 2.0}, 0.5);
  const auto gs = param_gradient(square, x);
  CHECK(gs[0] == 4.0);
  CHECK(gs[1] == 9.0);
  CHECK(gs[2] == 1.0);
}

TEST_CASE("param_gradient matches central differences on random trees") {
  std::mt19937_64 rng(20240611);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng() % 4;
    const auto expr = fex::testing::random_expression(d, rng);
    const auto x = fex::testing::uniform_vector(d, -1.5, 1.5, rng);
    const auto exact = param_gradient(expr, x);
    const auto approx = central_difference(expr, x, 1e-5);
    CHECK(exact.size() == param_count(expr.tree(), expr.sequence()));
    std::vector<double> diff(exact.size());
    for (std::size_t k = 0; k < exact.size(); ++k) diff[k] = exact[k] - approx[k];
    const double rel = norm(diff) / std::max(norm(exact), 1e-8);
    CHECK_MESSAGE(rel <= 1e-5, to_string(expr.sequence()), " relative error ", rel);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("identity/add-sub trees are affine in x") {
  std::mt19937_64 rng(7);
  const std::vector<BinaryOp> linear_ops{BinaryOp::Add, BinaryOp::Sub};
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 1 + rng() % 4;
    const auto kind = trial % 2 ? TemplateKind::Type1 : TemplateKind::Type2;
    const TreeTemplate tree = build_template(kind, d);
    OperatorSequence seq;
    for (std::size_t slot = 0; slot < tree.slot_count(); ++slot) {
      if (tree.slot_kind(slot) == SlotKind::Unary) {
        seq.entries.emplace_back(UnaryOp::Id);
      } else {
        seq.entries.emplace_back(linear_ops[rng() % 2]);
      }
    }
    const CompiledExpression expr(
        tree, seq, ExpressionParams{fex::testing::uniform_vector(param_count(tree, seq), -2.0, 2.0, rng)});
    const auto x = fex::testing::uniform_vector(d, -3.0, 3.0, rng);
    std::vector<double> doubled(x);
    for (double& v : doubled) v *= 2.0;
    const std::vector<double> zero(d, 0.0);
    const double f0 = evaluate(expr, zero);
    CHECK(evaluate(expr, doubled) - f0 == doctest::Approx(2.0 * (evaluate(expr, x) - f0)).epsilon(1e-12));
  }
}

TEST_CASE("to_symbolic_string formats") {
  const TreeTemplate tree = build_template(TemplateKind::Type2, 3);
  const auto seq = make_sequence({UnaryOp::Sin, UnaryOp::Zero, BinaryOp::Add, UnaryOp::Zero, BinaryOp::Add});
  std::vector<double> theta(12, 0.0);
  theta[0] = 0.1919;
  theta[1] = 0.1812;
  theta[2] = 0.7006;
  theta[3] = -0.7283;
  const CompiledExpression expr(tree, seq, ExpressionParams{theta});
  SymbolicOptions options;
  options.var_names = {"R", "D", "Q"};
  CHECK(to_symbolic_string(expr, options) ==
        "((0.1919*sin(R) + 0.1812*sin(D) + 0.7006*sin(Q) - 0.7283) + (0)) + (0)");
}

TEST_CASE("to_symbolic_string leaf text and zero leaf") {
  const TreeTemplate tree = build_template(TemplateKind::Type1, 3);
  const auto seq = make_sequence({UnaryOp::Sin, UnaryOp::Zero, BinaryOp::Mul, UnaryOp::Id});
  std::vector<double> theta(10, 0.0);
  theta[0] = 0.1919;
  theta[1] = 0.1812;
  theta[2] = 0.7006;
  theta[3] = -0.7283;
  theta[8] = 1.0;
  const CompiledExpression expr(tree, seq, ExpressionParams{theta});
  SymbolicOptions options;
  options.var_names = {"R", "D", "Q"};
  CHECK(to_symbolic_string(expr, options) == "1.0000*((0.1919*sin(R) + 0.1812*sin(D) + 0.7006*sin(Q) - 0.7283) * (0))");
}

TEST_CASE("elide drops coefficients that round to zero") {
  const auto leaf = single_leaf(UnaryOp::Id, {1.5, 0.00001, -2.0}, 0.0);
  SymbolicOptions options;
  options.var_names = {"a", "b", "c"};
  const std::string full = to_symbolic_string(leaf, options);
  options.elide = true;
  const std::string short_form = to_symbolic_string(leaf, options);
  CHECK(full.find("0.0000*b") != std::string::npos);
  CHECK(short_form.find("*b") == std::string::npos);
  CHECK_MESSAGE(short_form.rfind("((1.5000*a - 2.0000*c) + (0)) + (0)", 0) == 0, short_form);
}

TEST_CASE("printed expressions re-evaluate to the same value") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + rng() % 3;
    const auto expr = fex::testing::random_expression(d, rng);
    SymbolicOptions options;
    options.precision = 12;
    options.var_names = default_var_names(d);
    const auto x = fex::testing::uniform_vector(d, -1.0, 1.0, rng);
    std::map<std::string, double> vars;
    for (std::size_t j = 0; j < d; ++j) vars[options.var_names[j]] = x[j];
    const std::string text = to_symbolic_string(expr, options);
    const double reparsed = fex::testing::InfixEvaluator(text, vars).run();
    const double direct = evaluate(expr, x);
    CHECK_MESSAGE(reparsed == doctest::Approx(direct).epsilon(1e-9).scale(1.0), text);
  }
}
