#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "fex/epi_models.hpp"
#include "fex/forecast.hpp"
#include "support/random_expr.hpp"
#include "support/sir_exact.hpp"

using namespace fex;

namespace {

SystemModel zero_system(std::size_t d) {
  std::vector<CompiledExpression> exprs;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < d; ++i) {
    const auto tree = build_template(TemplateKind::Type1, d);
    exprs.emplace_back(tree, fex::testing::make_sequence({UnaryOp::Zero, UnaryOp::Zero, BinaryOp::Add, UnaryOp::Zero}));
    names.push_back("x" + std::to_string(i));
  }
  return SystemModel(std::move(exprs), names);
}

Trajectory constant_offset(const Trajectory& t, double offset) {
  std::vector<double> v(t.values());
  for (double& x : v) x += offset;
  return Trajectory(t.dim(), v);
}

}  // namespace

TEST_CASE("exact field reproduces Euler data") {
  GeneratorOptions options;
  options.n_traj = 4;
  options.steps = 250;
  options.seed = 6;
  const auto data = generate_trajectories(ModelKind::SIR, EpiParams{}, options);
  const auto system = fex::testing::sir_exact_system();
  std::vector<Trajectory> predicted;
  for (const auto& t : data.trajectories) {
    const auto r = rollout(system, t.row(0), 250, 0.2, RolloutMode::Autonomous);
    CHECK(r.ok);
    predicted.push_back(r.states);
    double worst = 0.0;
    for (std::size_t k = 0; k < t.values().size(); ++k)
      worst = std::max(worst, std::abs(t.values()[k] - r.states.values()[k]));
    CHECK(worst <= 1e-12);
  }
  for (double m : per_step_mse(predicted, data.trajectories)) CHECK(m <= 1e-24);
}

TEST_CASE("rollout trivial cases") {
  const std::vector<double> init{0.2, 0.5};
  const auto none = rollout(zero_system(2), init, 0, 0.1, RolloutMode::Autonomous);
  CHECK(none.states.rows() == 1);
  const auto flat = rollout(zero_system(2), init, 10, 0.1, RolloutMode::Autonomous);
  for (std::size_t s = 0; s < flat.states.rows(); ++s) {
    CHECK(flat.states.at(s, 0) == 0.2);
    CHECK(flat.states.at(s, 1) == 0.5);
  }
  CHECK_THROWS_AS(rollout(zero_system(2), init, 3, 0.1, RolloutMode::TeacherForced), std::invalid_argument);
}

TEST_CASE("teacher forcing restarts from the truth each step") {
  GeneratorOptions options;
  options.n_traj = 1;
  options.steps = 20;
  options.seed = 3;
  const auto data = generate_trajectories(ModelKind::SIR, EpiParams{}, options);
  const auto& truth = data.trajectories[0];
  const auto system = zero_system(3);
  const auto forced = rollout(system, truth.row(0), 20, 0.2, RolloutMode::TeacherForced, &truth);
  const auto free = rollout(system, truth.row(0), 20, 0.2, RolloutMode::Autonomous);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(forced.states.at(1, i) == free.states.at(1, i));
    // zero field: each teacher-forced prediction equals the previous truth row
    CHECK(forced.states.at(7, i) == truth.at(6, i));
  }
}

TEST_CASE("non-finite predictions truncate the rollout") {
  const auto tree = build_template(TemplateKind::Type1, 1);
  const CompiledExpression blowup(tree,
                                  fex::testing::make_sequence({UnaryOp::Quartic, UnaryOp::Zero, BinaryOp::Add, UnaryOp::Quartic}),
                                  ExpressionParams{{10.0, 0.0, 0.0, 0.0, 10.0, 0.0}});
  const SystemModel system({blowup}, {"x"});
  const std::vector<double> init{1.0};
  const auto r = rollout(system, init, 50, 1.0, RolloutMode::Autonomous);
  CHECK_FALSE(r.ok);
  REQUIRE(r.failed_step.has_value());
  CHECK(r.states.rows() == *r.failed_step);
}

TEST_CASE("per-step MSE arithmetic") {
  const Trajectory truth(1, {0.0, 1.0, 2.0, 3.0});
  const Trajectory off = constant_offset(truth, 0.1);
  const std::vector<Trajectory> p{off}, t{truth};
  const auto mse = per_step_mse(p, t);
  REQUIRE(mse.size() == 3);
  for (double m : mse) CHECK(m == doctest::Approx(0.01));
  for (double m : per_step_mse(t, t)) CHECK(m == 0.0);
}

TEST_CASE("per-step MSE pooling and permutation") {
  std::mt19937_64 rng(12);
  std::vector<Trajectory> pred, truth;
  for (int k = 0; k < 5; ++k) {
    pred.emplace_back(3, fex::testing::uniform_vector(3 * 8, -1.0, 1.0, rng));
    truth.emplace_back(3, fex::testing::uniform_vector(3 * 8, -1.0, 1.0, rng));
  }
  const auto pooled = per_step_mse(pred, truth);
  std::vector<std::vector<double>> per_component;
  for (std::size_t i = 0; i < 3; ++i) per_component.push_back(per_step_component_mse(pred, truth, i));
  for (std::size_t s = 0; s < pooled.size(); ++s) {
    const double avg = (per_component[0][s] + per_component[1][s] + per_component[2][s]) / 3.0;
    CHECK(pooled[s] == doctest::Approx(avg).epsilon(1e-14));
  }
  std::reverse(pred.begin(), pred.end());
  std::reverse(truth.begin(), truth.end());
  const auto permuted = per_step_mse(pred, truth);
  for (std::size_t s = 0; s < pooled.size(); ++s) CHECK(permuted[s] == doctest::Approx(pooled[s]).epsilon(1e-14));

  truth.pop_back();
  CHECK_THROWS_AS(per_step_mse(pred, truth), std::invalid_argument);
}

TEST_CASE("persistence baseline") {
  const Trajectory constant(2, {0.4, 0.6, 0.4, 0.6, 0.4, 0.6});
  const std::vector<Trajectory> flat{constant};
  for (double m : persistence_baseline(flat)) CHECK(m == 0.0);

  const double a = 0.3, dt = 0.5;
  std::vector<double> linear;
  for (int k = 0; k <= 6; ++k) linear.push_back(1.0 + a * k * dt);
  const std::vector<Trajectory> ramp{Trajectory(1, linear)};
  const auto mse = persistence_baseline(ramp);
  for (std::size_t k = 1; k <= mse.size(); ++k) CHECK(mse[k - 1] == doctest::Approx(std::pow(a * k * dt, 2)));

  std::mt19937_64 rng(2);
  const std::vector<Trajectory> noisy{Trajectory(2, fex::testing::uniform_vector(20, -1.0, 1.0, rng))};
  for (double m : persistence_baseline(noisy)) CHECK(m >= 0.0);
}

TEST_CASE("rollout mode names") {
  CHECK(parse_rollout_mode("autonomous") == RolloutMode::Autonomous);
  CHECK(parse_rollout_mode(rollout_mode_name(RolloutMode::TeacherForced)) == RolloutMode::TeacherForced);
  CHECK_THROWS_AS(parse_rollout_mode("open_loop"), std::invalid_argument);
  CHECK(mean(std::vector<double>{1.0, 2.0, 6.0}) == 3.0);
}
