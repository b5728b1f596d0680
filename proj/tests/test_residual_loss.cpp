#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fex/epi_models.hpp"
#include "fex/residual_loss.hpp"
#include "support/random_expr.hpp"

using namespace fex;
using fex::testing::make_sequence;

namespace {

TrajectoryDataset dataset_from_rows(std::size_t dim, std::vector<std::vector<double>> trajectories, double dt) {
  TrajectoryDataset data;
  data.dt = dt;
  data.var_names = default_var_names(dim);
  for (auto& values : trajectories) data.trajectories.emplace_back(dim, std::move(values));
  return data;
}

TrajectoryDataset random_dataset(std::size_t dim, std::size_t n_traj, std::size_t rows, std::mt19937_64& rng) {
  std::vector<std::vector<double>> all;
  for (std::size_t t = 0; t < n_traj; ++t) all.push_back(fex::testing::uniform_vector(dim * rows, -1.0, 1.0, rng));
  return dataset_from_rows(dim, std::move(all), 0.1 + 0.3 * std::uniform_real_distribution<double>()(rng));
}

CompiledExpression zero_expression(std::size_t dim) {
  const TreeTemplate tree = build_template(TemplateKind::Type1, dim);
  const auto seq = make_sequence({UnaryOp::Zero, UnaryOp::Zero, BinaryOp::Add, UnaryOp::Zero});
  return CompiledExpression(tree, seq);
}

// Linear leaf: alpha . x + beta through (leaf + zero) then id(1*.+0).
CompiledExpression linear_expression(std::vector<double> alpha, double beta) {
  const std::size_t d = alpha.size();
  const TreeTemplate tree = build_template(TemplateKind::Type1, d);
  const auto seq = make_sequence({UnaryOp::Id, UnaryOp::Zero, BinaryOp::Add, UnaryOp::Id});
  std::vector<double> theta(param_count(tree, seq), 0.0);
  std::copy(alpha.begin(), alpha.end(), theta.begin());
  theta[d] = beta;
  theta[theta.size() - 2] = 1.0;
  return CompiledExpression(tree, seq, ExpressionParams{theta});
}

}  // namespace

TEST_CASE("hand-computed loss") {
  const auto data = dataset_from_rows(1, {{0.0, 0.1}}, 0.2);
  CHECK(euler_residual_loss(zero_expression(1), data, 0) == doctest::Approx(0.01).epsilon(1e-14));

  const auto flat = dataset_from_rows(2, {{0.3, 1.0, 0.3, 2.0, 0.3, 3.0}}, 0.5);
  CHECK(euler_residual_loss(zero_expression(2), flat, 0) == 0.0);
  CHECK(euler_residual_loss(zero_expression(2), flat, 1) == doctest::Approx(1.0));
}

TEST_CASE("true field on Euler data gives zero loss") {
  GeneratorOptions options;
  options.n_traj = 5;
  options.steps = 50;
  options.seed = 3;
  const EpiParams params;
  const auto data = generate_trajectories(ModelKind::SIR, params, options);
  // dR/dt = gamma*I - mu*R
  const auto expr = linear_expression({0.0, params.gamma, -params.mu}, 0.0);
  CHECK(euler_residual_loss(expr, data, 2) <= 1e-30);
  const auto [loss, grad] = loss_and_gradient(expr, data, 2);
  CHECK(loss <= 1e-30);
  for (double g : grad) CHECK(std::abs(g) <= 1e-14);
}

TEST_CASE("phi = 0 gives the mean squared increment") {
  std::mt19937_64 rng(5);
  const auto data = random_dataset(3, 4, 12, rng);
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& traj : data.trajectories) {
    for (std::size_t s = 0; s + 1 < traj.rows(); ++s) {
      const double inc = traj.at(s + 1, 1) - traj.at(s, 1);
      total += inc * inc;
      ++count;
    }
  }
  CHECK(euler_residual_loss(zero_expression(3), data, 1) == doctest::Approx(total / count).epsilon(1e-13));
}

TEST_CASE("pooling is invariant to trajectory order and concatenation") {
  std::mt19937_64 rng(11);
  const auto data = random_dataset(2, 5, 9, rng);
  const auto expr = linear_expression({0.7, -0.4}, 0.2);
  const double base = euler_residual_loss(expr, data, 0);

  auto reversed = data;
  std::reverse(reversed.trajectories.begin(), reversed.trajectories.end());
  CHECK(euler_residual_loss(expr, reversed, 0) == doctest::Approx(base).epsilon(1e-14));

  // Weighted average of per-trajectory losses by pair count.
  double weighted = 0.0;
  for (const auto& traj : data.trajectories) {
    TrajectoryDataset single = data;
    single.trajectories = {traj};
    weighted += euler_residual_loss(expr, single, 0) * static_cast<double>(traj.steps());
  }
  CHECK(base == doctest::Approx(weighted / static_cast<double>(data.total_pairs())).epsilon(1e-13));
}

TEST_CASE("hand chain rule on a single pair") {
  // phi = a*x + b*y + c ; residual r = dx - dt*phi ; dL/da = -2 dt r x
  const auto data = dataset_from_rows(2, {{0.5, -1.0, 0.9, 0.0}}, 0.25);
  const auto expr = linear_expression({0.3, 0.2}, -0.1);
  const double phi = 0.3 * 0.5 + 0.2 * -1.0 - 0.1;
  const double r = 0.4 - 0.25 * phi;
  const auto [loss, grad] = loss_and_gradient(expr, data, 0);
  CHECK(loss == doctest::Approx(r * r));
  CHECK(grad[0] == doctest::Approx(-2.0 * 0.25 * r * 0.5));
  CHECK(grad[1] == doctest::Approx(-2.0 * 0.25 * r * -1.0));
  CHECK(grad[2] == doctest::Approx(-2.0 * 0.25 * r));
}

TEST_CASE("loss_and_gradient matches central differences") {
  std::mt19937_64 rng(424242);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng() % 3;
    const auto data = random_dataset(d, 1 + rng() % 3, 2 + rng() % 8, rng);
    const std::size_t component = rng() % d;
    const auto expr = fex::testing::random_expression(d, rng);
    const ResidualProblem problem(data, component);
    std::vector<double> grad;
    const double loss = problem.loss_and_gradient(expr, expr.params().values, grad);
    CHECK(loss == doctest::Approx(problem.loss(expr, expr.params().values)).epsilon(1e-13));

    std::vector<double> theta = expr.params().values;
    double diff2 = 0.0, norm2 = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(theta[k]));
      const double saved = theta[k];
      theta[k] = saved + h;
      const double up = problem.loss(expr, theta);
      theta[k] = saved - h;
      const double down = problem.loss(expr, theta);
      theta[k] = saved;
      const double fd = (up - down) / (2.0 * h);
      diff2 += (fd - grad[k]) * (fd - grad[k]);
      norm2 += grad[k] * grad[k];
    }
    const double rel = std::sqrt(diff2) / std::max(std::sqrt(norm2), 1e-8);
    CHECK_MESSAGE(rel <= 1e-5, to_string(expr.sequence()), " rel ", rel);
  }
}

TEST_CASE("non-finite evaluation yields the sentinel") {
  const auto data = dataset_from_rows(1, {{1e100, 1e100}}, 1.0);
  const TreeTemplate tree = build_template(TemplateKind::Type1, 1);
  const auto seq = make_sequence({UnaryOp::Quartic, UnaryOp::Zero, BinaryOp::Add, UnaryOp::Id});
  const CompiledExpression expr(tree, seq, ExpressionParams{{1.0, 0.0, 0.0, 0.0, 1.0, 0.0}});
  CHECK(euler_residual_loss(expr, data, 0) == kLossSentinel);
}

TEST_CASE("invalid inputs are rejected") {
  const auto data = dataset_from_rows(2, {{0.0, 0.0, 1.0, 1.0}}, 1.0);
  CHECK_THROWS_AS(ResidualProblem(data, 2), std::invalid_argument);
  CHECK_THROWS_AS(euler_residual_loss(zero_expression(3), data, 0), std::invalid_argument);
}
