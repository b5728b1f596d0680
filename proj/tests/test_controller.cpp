#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "fex/controller.hpp"
#include "support/random_expr.hpp"

using namespace fex;

namespace {

ControllerPolicy type2_policy(double epsilon, double lr) {
  return ControllerPolicy::uniform(build_template(TemplateKind::Type2, 3), OperatorSet::standard(), epsilon, lr);
}

// Plain nearest-rank: sort descending, take the k-th with k = ceil(nu * n).
double brute_force_threshold(std::vector<double> scores, double nu) {
  std::sort(scores.begin(), scores.end(), std::greater<>());
  const auto n = static_cast<double>(scores.size());
  std::size_t k = static_cast<std::size_t>(std::ceil(nu * n - 1e-9));
  k = std::clamp<std::size_t>(k, 1, scores.size());
  return scores[k - 1];
}

SampleBatch scored_batch(const ControllerPolicy& policy, std::size_t n, std::uint64_t seed,
                         const std::function<double(std::size_t)>& score) {
  Rng rng(seed);
  auto batch = sample_sequences(policy, n, rng);
  batch.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) batch.scores[i] = score(i);
  return batch;
}

}  // namespace

TEST_CASE("softmax is normalised and shift invariant") {
  const std::vector<double> logits{1.0, -2.0, 700.0, 3.5};
  const auto p = softmax(logits);
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> shifted(logits);
  for (double& v : shifted) v -= 100.0;
  const auto q = softmax(shifted);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == doctest::Approx(q[i]));
}

TEST_CASE("slot supports follow slot kinds") {
  const auto policy = type2_policy(0.1, 0.002);
  CHECK(policy.logits.size() == 5);
  CHECK(policy.support_size(0) == 9);
  CHECK(policy.support_size(2) == 3);
  CHECK(std::holds_alternative<BinaryOp>(policy.tag_at(4, 0)));
  CHECK(policy.index_of(0, UnaryOp::Exp) == 8);
}

TEST_CASE("epsilon = 1 samples uniformly") {
  const auto policy = [] {
    auto p = type2_policy(1.0, 0.0);
    p.logits[0][3] = 50.0;  // ignored by the uniform branch
    return p;
  }();
  Rng rng(17);
  const auto batch = sample_sequences(policy, 10000, rng);
  std::vector<int> counts(9, 0);
  for (const auto& c : batch.choices) ++counts[c[0]];
  for (int c : counts) CHECK(std::abs(c / 10000.0 - 1.0 / 9.0) <= 0.02);
  for (const auto& flags : batch.explored)
    for (bool f : flags) CHECK(f);
}

TEST_CASE("epsilon = 0 follows dominant logits") {
  auto policy = type2_policy(0.0, 0.0);
  policy.logits[1] = std::vector<double>(9, -10.0);
  policy.logits[1][0] = 10.0;
  Rng rng(23);
  const auto batch = sample_sequences(policy, 10000, rng);
  int first = 0;
  for (const auto& c : batch.choices) first += c[1] == 0;
  CHECK(first / 10000.0 >= 0.999);
}

TEST_CASE("sampling is deterministic under a seed") {
  const auto policy = type2_policy(0.1, 0.002);
  Rng a(99), b(99);
  const auto first = sample_sequences(policy, 50, a);
  const auto second = sample_sequences(policy, 50, b);
  CHECK(first.sequences == second.sequences);
  CHECK(first.explored == second.explored);
  for (const auto& seq : first.sequences) CHECK_NOTHROW(validate_sequence(policy.tree, seq));
}

TEST_CASE("log_prob") {
  const auto policy = type2_policy(0.1, 0.002);
  const auto seq = fex::testing::make_sequence({UnaryOp::Sin, UnaryOp::Id, BinaryOp::Mul, UnaryOp::Exp, BinaryOp::Sub});
  CHECK(log_prob(policy, seq) == doctest::Approx(std::log(std::pow(1.0 / 9, 3) * std::pow(1.0 / 3, 2))));

  auto peaked = policy;
  for (std::size_t slot = 0; slot < 5; ++slot) peaked.logits[slot][peaked.index_of(slot, seq.entries[slot])] = 60.0;
  CHECK(log_prob(peaked, seq) == doctest::Approx(0.0).scale(1.0));

  Rng rng(4);
  for (const auto& s : sample_sequences(policy, 100, rng).sequences) CHECK(log_prob(policy, s) <= 0.0);
}

TEST_CASE("quantile threshold examples") {
  const std::vector<double> tenths{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  const double t = quantile_threshold(tenths, 0.2);
  CHECK(t == 0.9);
  CHECK(std::count_if(tenths.begin(), tenths.end(), [&](double s) { return s >= t; }) == 2);
  CHECK(quantile_threshold({0.4, 0.4, 0.4}, 0.2) == 0.4);
  CHECK(quantile_threshold({0.7}, 0.5) == 0.7);
  CHECK_THROWS_AS(quantile_threshold({}, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(quantile_threshold({0.1}, 1.0), std::invalid_argument);
}

TEST_CASE("quantile threshold matches brute force") {
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> unit;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    std::vector<double> scores(n);
    // coarse values so ties are common
    for (double& s : scores) s = std::round(unit(rng) * 10.0) / 10.0;
    const double nu = 0.01 + 0.98 * unit(rng);
    const double t = quantile_threshold(scores, nu);
    CHECK(t == brute_force_threshold(scores, nu));
    CHECK(std::any_of(scores.begin(), scores.end(), [&](double s) { return s >= t; }));
  }
}

TEST_CASE("policy update leaves logits unchanged for equal scores or zero lr") {
  const auto policy = type2_policy(0.1, 0.002);
  auto equal = scored_batch(policy, 10, 1, [](std::size_t) { return 0.5; });
  auto updated = policy;
  policy_update(updated, equal, 0.2);
  CHECK(updated.logits == policy.logits);

  auto frozen = type2_policy(0.1, 0.0);
  const auto varied = scored_batch(frozen, 10, 2, [](std::size_t i) { return 0.1 * static_cast<double>(i); });
  auto after = frozen;
  policy_update(after, varied, 0.2);
  CHECK(after.logits == frozen.logits);
}

TEST_CASE("policy update ignores members below the threshold") {
  const auto policy = type2_policy(0.1, 0.5);
  auto batch = scored_batch(policy, 10, 5, [](std::size_t i) { return 0.05 * static_cast<double>(i + 1); });
  auto with_all = policy;
  policy_update(with_all, batch, 0.2);

  // Push every sub-threshold sequence to the sampled sequence of the worst
  // member: the update must be the same.
  const double t = quantile_threshold(batch.scores, 0.2);
  auto altered = batch;
  for (std::size_t i = 0; i < altered.scores.size(); ++i) {
    if (altered.scores[i] < t) {
      altered.sequences[i] = batch.sequences[0];
      altered.choices[i] = batch.choices[0];
      altered.scores[i] = 0.0;
    }
  }
  auto with_altered = policy;
  policy_update(with_altered, altered, 0.2);
  CHECK(with_altered.logits == with_all.logits);

  for (std::size_t slot = 0; slot < with_all.logits.size(); ++slot) {
    const auto p = with_all.probabilities(slot);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("policy update moves towards the rewarded operator") {
  // reward depends only on slot 3; with a usable step size the argmax follows
  auto policy = type2_policy(0.0, 0.5);
  const auto target = UnaryOp::Cos;
  Rng rng(8);
  for (int step = 0; step < 300; ++step) {
    auto batch = sample_sequences(policy, 10, rng);
    batch.scores.resize(batch.sequences.size());
    for (std::size_t i = 0; i < batch.sequences.size(); ++i) {
      batch.scores[i] = std::get<UnaryOp>(batch.sequences[i].entries[3]) == target ? 1.0 : 0.1;
    }
    policy_update(policy, batch, 0.2);
  }
  const auto& row = policy.logits[3];
  CHECK(std::max_element(row.begin(), row.end()) - row.begin() == static_cast<long>(policy.index_of(3, target)));
}
