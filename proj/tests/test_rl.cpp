#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "doctest.h"
#include "prlc/mdp.hpp"
#include "prlc/rl.hpp"
#include "prlc/rng.hpp"

namespace {

using namespace prlc;

mdp::ScenarioModel two_layer_model(double loss = 0.05) {
  mdp::ScenarioModel m;
  m.servers = {{1.0, loss, 0.0}};
  m.spec = GenerationSpec::make({3, 2}, {11.0, 9.0}, 10, 5);
  m.period = 5;
  m.field_order = 256;
  return m;
}

mdp::RequestVector single(std::vector<int> counts) { return {{std::move(counts)}}; }

// Reference partition rule, quadratic in the pair count: two valid pairs
// are equivalent when their following-generation splits agree.
std::vector<std::pair<int, int>> scan_class(const mdp::PlannerModel& model, int a) {
  auto split = model.actions().next_split(a);
  std::vector<std::pair<int, int>> out;
  for (int t = 0; t < model.states().size(); ++t)
    for (int b : model.actions().valid_actions(t))
      if (model.actions().next_split(b) == split) out.emplace_back(t, b);
  return out;
}

}  // namespace

TEST_SUITE("rl") {

TEST_CASE("temperature schedule follows its closed form") {
  rl::TemperatureSchedule sched{75.0, 0.5, 0.99996};
  sched.validate();
  CHECK(sched.at_episode(0) == 75.0);

  double theta = sched.theta_max;
  std::int64_t n = 0;
  for (std::int64_t target : {1, 10, 1000, 250000}) {
    while (n < target) {
      theta = sched.theta_min + sched.decay * (theta - sched.theta_min);
      ++n;
    }
    double closed = sched.at_episode(n);
    CHECK(std::abs(theta - closed) <= 1e-9 * closed);
    CHECK(closed < sched.at_episode(n - 1));
    CHECK(closed > sched.theta_min);
  }
  // The floor is approached but never crossed.
  CHECK(sched.at_episode(100000000) == doctest::Approx(0.5).epsilon(1e-9));

  CHECK_THROWS_AS((rl::TemperatureSchedule{75.0, 0.0, 0.5}.validate()), std::domain_error);
  CHECK_THROWS_AS((rl::TemperatureSchedule{0.4, 0.5, 0.5}.validate()), std::domain_error);
  CHECK_THROWS_AS((rl::TemperatureSchedule{75.0, 0.5, 0.0}.validate()), std::domain_error);
  CHECK_THROWS_AS((rl::TemperatureSchedule{75.0, 0.5, 1.5}.validate()), std::domain_error);
  CHECK_THROWS_AS(sched.at_episode(-1), std::domain_error);
}

TEST_CASE("boltzmann selection matches softmax frequencies") {
  Stream rng(2024);

  // Two actions 20 apart at temperature 10: the hotter one is chosen with
  // probability 1 / (1 + exp(-2)).
  std::vector<double> row{20.0, 0.0};
  std::vector<int> valid{0, 1};
  const int trials = 100000;
  int first = 0;
  for (int t = 0; t < trials; ++t)
    if (rl::boltzmann_select(row, valid, 10.0, rng) == 0) ++first;
  double p = 1.0 / (1.0 + std::exp(-2.0));
  CHECK(p == doctest::Approx(0.8807970779778823));
  double se = std::sqrt(p * (1.0 - p) / trials);
  CHECK(std::abs(first / double(trials) - p) <= 3.5 * se);

  // Equal values draw uniformly: chi-square over 56 cells.
  std::vector<double> flat(56, 3.25);
  std::vector<int> all(56);
  for (int i = 0; i < 56; ++i) all[i] = i;
  std::vector<int> hits(56, 0);
  const int draws = 56000;
  for (int t = 0; t < draws; ++t) hits[rl::boltzmann_select(flat, all, 5.0, rng)] += 1;
  double chi2 = 0.0;
  for (int h : hits) chi2 += (h - 1000.0) * (h - 1000.0) / 1000.0;
  CHECK(chi2 < 100.0);  // df = 55, mean 55, sd ~10.5

  // Invalid actions are never drawn, however large their values.
  std::vector<double> spiked{0.0, 0.0, 1e9};
  std::vector<int> pair{0, 1};
  std::vector<int> seen(3, 0);
  for (int t = 0; t < 2000; ++t) seen[rl::boltzmann_select(spiked, pair, 1.0, rng)] += 1;
  CHECK(seen[2] == 0);
  CHECK(seen[0] > 0);
  CHECK(seen[1] > 0);

  // Near-zero temperature is effectively greedy.
  for (int t = 0; t < 1000; ++t) CHECK(rl::boltzmann_select(row, valid, 1e-3, rng) == 0);

  // Same seed, same sequence.
  Stream r1(99), r2(99);
  for (int t = 0; t < 200; ++t)
    CHECK(rl::boltzmann_select(flat, all, 2.0, r1) == rl::boltzmann_select(flat, all, 2.0, r2));

  CHECK_THROWS_AS(rl::boltzmann_select(row, {}, 1.0, rng), std::domain_error);
  CHECK_THROWS_AS(rl::boltzmann_select(row, valid, 0.0, rng), std::domain_error);
  CHECK_THROWS_AS(rl::boltzmann_select(row, valid, -2.0, rng), std::domain_error);
}

TEST_CASE("value updates blend at the harmonic rate") {
  rl::QTable table(2, 3);
  CHECK(table.q(1, 2) == 0.0);
  CHECK(table.count(1, 2) == 0);

  // A fresh pair moves halfway to the target.
  rl::q_update(table, 0, 1, 20.0);
  CHECK(table.q(0, 1) == 10.0);
  CHECK(table.count(0, 1) == 1);

  rl::q_update(table, 0, 1, 20.0);
  CHECK(table.q(0, 1) == doctest::Approx(40.0 / 3).epsilon(1e-15));
  CHECK(table.count(0, 1) == 2);
  CHECK(table.q(0, 0) == 0.0);
}

TEST_CASE("environment sampling agrees with the planner tables") {
  mdp::PlannerModel model(two_layer_model());
  int s0 = model.states().empty_state();
  int a = model.actions().index_of(single({2, 1, 1, 1}));

  rl::AnalyticEnvironment env(model, 7);
  const int trials = 100000;
  std::vector<int> counts(model.states().size(), 0);
  for (int t = 0; t < trials; ++t) {
    auto out = env.step(s0, a);
    CHECK(out.reward == model.reward(s0, a));
    counts[out.next_state] += 1;
  }
  std::vector<double> law(model.states().size(), 0.0);
  for (const auto& [ns, p] : model.transitions(a)) law[ns] += p;
  for (int s = 0; s < model.states().size(); ++s) {
    double p = law[s];
    if (p == 0.0) {
      CHECK(counts[s] == 0);
      continue;
    }
    double se = std::sqrt(p * (1.0 - p) / trials);
    CHECK(std::abs(counts[s] / double(trials) - p) <= 3.5 * se + 1e-9);
  }

  // Realized rewards live on the cumulative quality grid and average to
  // the planner's expectation.
  rl::AnalyticEnvironment realized(model, 8, true);
  double sum = 0.0, sumsq = 0.0;
  for (int t = 0; t < trials; ++t) {
    auto out = realized.step(s0, a);
    bool on_grid = out.reward == 0.0 || out.reward == 11.0 || out.reward == 20.0;
    CHECK(on_grid);
    sum += out.reward;
    sumsq += out.reward * out.reward;
  }
  double mean = sum / trials;
  double var = (sumsq - trials * mean * mean) / (trials - 1);
  CHECK(std::abs(mean - model.reward(s0, a)) <= 3.5 * std::sqrt(var / trials));
}

TEST_CASE("environment consumes losses positionally") {
  mdp::PlannerModel model(two_layer_model());
  int s0 = model.states().empty_state();

  // Actions sharing the following-generation split see identical next
  // states under a common seed, whatever their urgent halves request.
  int a1 = model.actions().index_of(single({2, 1, 1, 1}));
  int a2 = model.actions().index_of(single({1, 2, 1, 1}));
  rl::AnalyticEnvironment e1(model, 41), e2(model, 41);
  for (int t = 0; t < 2000; ++t) CHECK(e1.step(s0, a1).next_state == e2.step(s0, a2).next_state);

  // No prefill packets, no carry-over: the next buffer is always empty.
  int a0 = model.actions().index_of(single({3, 2, 0, 0}));
  rl::AnalyticEnvironment e3(model, 5);
  for (int t = 0; t < 100; ++t) CHECK(e3.step(s0, a0).next_state == s0);

  CHECK_THROWS_AS(e3.step(-1, a0), std::domain_error);
  CHECK_THROWS_AS(e3.step(s0, model.actions().size()), std::domain_error);
  int full = model.states().index_of({3, 5});
  CHECK_THROWS_AS(e3.step(full, a0), std::domain_error);  // filled classes not requestable
}

TEST_CASE("experience classes partition the valid pairs") {
  mdp::PlannerModel model(two_layer_model());
  rl::VirtualExperienceClasses classes(model);

  std::int64_t valid_pairs = 0;
  for (int s = 0; s < model.states().size(); ++s)
    valid_pairs += static_cast<std::int64_t>(model.actions().valid_actions(s).size());
  CHECK(classes.pair_count() == valid_pairs);

  std::set<std::pair<int, int>> seen;
  size_t largest = 0;
  for (int c = 0; c < classes.class_count(); ++c) {
    const auto& group = classes.members(c);
    CHECK(!group.empty());
    largest = std::max(largest, group.size());
    for (auto [s, a] : group) {
      CHECK(classes.class_of(s, a) == c);
      CHECK(model.actions().valid(s, a));
      CHECK(seen.insert({s, a}).second);
    }
  }
  CHECK(static_cast<std::int64_t>(seen.size()) == valid_pairs);
  // Statistically equivalent pairs exist in bulk; batching is not a no-op.
  CHECK(largest >= 10);

  // Invalid pairs belong to no class.
  int full = model.states().index_of({3, 5});
  int urgent_only = model.actions().index_of(single({3, 2, 0, 0}));
  CHECK(classes.class_of(full, urgent_only) == -1);

  // Precomputed classes agree with the quadratic reference scan.
  for (int s : {0, 7, model.states().size() - 1}) {
    const auto& valid = model.actions().valid_actions(s);
    for (int a : {valid.front(), valid[valid.size() / 2], valid.back()}) {
      auto expect = scan_class(model, a);
      auto got = classes.members(classes.class_of(s, a));
      std::sort(got.begin(), got.end());
      std::sort(expect.begin(), expect.end());
      CHECK(got == expect);
    }
  }
}

TEST_CASE("a pure next-generation request is one class across every state") {
  mdp::PlannerModel model(two_layer_model());
  rl::VirtualExperienceClasses classes(model);

  // Requesting five packets for the following generation touches no urgent
  // class, so the action is valid everywhere and no other action shares its
  // split: the class pairs this one action with all 18 rank vectors.
  int a = model.actions().index_of(single({0, 0, 0, 5}));
  int c = classes.class_of(model.states().index_of({3, 5}), a);
  std::set<std::pair<int, int>> got(classes.members(c).begin(), classes.members(c).end());
  std::set<std::pair<int, int>> expect;
  for (int s = 0; s < model.states().size(); ++s) expect.insert({s, a});
  CHECK(got == expect);

  // Expected immediate qualities differ inside the class; a batch update
  // must aim each member at its own.
  CHECK(model.reward(model.states().index_of({3, 5}), a) == 20.0);
  CHECK(model.reward(model.states().index_of({0, 5}), a) == 20.0);
  CHECK(model.reward(model.states().index_of({3, 3}), a) == 11.0);
  CHECK(model.reward(model.states().empty_state(), a) == 0.0);
}

TEST_CASE("a loss pattern maps each split onto its generic next rank") {
  mdp::PlannerModel model(two_layer_model());
  // The split occupies the trailing slots of the five-packet budget, class
  // one first: survivors here are one of class one and two of class two.
  std::vector<std::vector<std::uint8_t>> pattern{{1, 0, 1, 1, 0}};
  CHECK(rl::pattern_next_state(model, {{2, 3}}, pattern) == model.states().index_of({1, 3}));
  // A smaller split reads only the trailing slots.
  CHECK(rl::pattern_next_state(model, {{0, 2}}, pattern) == model.states().index_of({0, 1}));
  CHECK(rl::pattern_next_state(model, {{0, 0}}, pattern) == model.states().empty_state());
  // Survivors of one class cannot exceed its level dimension.
  std::vector<std::vector<std::uint8_t>> clean{{1, 1, 1, 1, 1}};
  CHECK(rl::pattern_next_state(model, {{5, 0}}, clean) == model.states().index_of({3, 3}));
  CHECK(rl::pattern_next_state(model, {{3, 2}}, clean) == model.states().index_of({3, 5}));
}

TEST_CASE("batch updates sweep every pair, one bootstrap per class") {
  mdp::PlannerModel model(two_layer_model());
  rl::VirtualExperienceClasses classes(model);
  int a = model.actions().index_of(single({0, 0, 0, 5}));
  int t = model.states().index_of({0, 5});  // a mid-list member's own state
  int c = classes.class_of(t, a);
  std::vector<std::vector<std::uint8_t>> keep{{1, 1, 1, 1, 1}};

  // On a zero table every bootstrap maximum reads zero at entry, so one
  // batch replaces every valid pair with its own expected immediate
  // quality: a pair without real visits blends at a unit rate, and the
  // batch consumes no visit.  The sweep writes nonzero rows as it goes, so
  // any maximum read during the sweep instead of at entry would leak into
  // the later targets.
  rl::QTable table(model.states().size(), model.actions().size());
  rl::apply_virtual_batch(table, model, classes, t, a, t, keep, 0.9);
  for (int s = 0; s < model.states().size(); ++s)
    for (int b : model.actions().valid_actions(s)) {
      CHECK(table.q(s, b) == model.reward(s, b));
      CHECK(table.count(s, b) == 0);
    }

  // Planted next-state values enter the observed class through the
  // realized next state, and other classes through their pattern-derived
  // ones: with every slot surviving, split (5,0) lands at rank (3,3).
  rl::QTable second(model.states().size(), model.actions().size());
  int elsewhere = model.states().index_of({1, 1});
  int landing = model.states().index_of({3, 3});
  second.q(elsewhere, model.actions().index_of(single({5, 0, 0, 0}))) = 100.0;
  second.q(landing, model.actions().index_of(single({0, 5, 0, 0}))) = 40.0;
  rl::apply_virtual_batch(second, model, classes, t, a, elsewhere, keep, 0.9);
  for (auto [s, b] : classes.members(c))
    CHECK(second.q(s, b) == model.reward(s, b) + 0.9 * 100.0);
  int probe = model.actions().index_of(single({0, 0, 5, 0}));
  int empty = model.states().empty_state();
  CHECK(second.q(empty, probe) == model.reward(empty, probe) + 0.9 * 40.0);

  // A batch nudges the observed pair at its current real-visit rate: after
  // one plain update the batch blends at one half and keeps the count.
  rl::QTable twice(model.states().size(), model.actions().size());
  int plain_next = model.states().empty_state();
  rl::q_update(twice, t, a, 20.0 + 0.9 * twice.best_valid(model.actions(), plain_next));
  CHECK(twice.q(t, a) == 10.0);
  rl::apply_virtual_batch(twice, model, classes, t, a, plain_next, keep, 0.9);
  CHECK(twice.q(t, a) == 15.0);  // half of 10, half of the fresh target 20
  CHECK(twice.count(t, a) == 1);
  for (auto [s, b] : classes.members(c))
    if (s != t) {
      CHECK(twice.q(s, b) == model.reward(s, b));
      CHECK(twice.count(s, b) == 0);
    }

  int urgent_only = model.actions().index_of(single({3, 2, 0, 0}));
  int full = model.states().index_of({3, 5});
  CHECK_THROWS_AS(
      rl::apply_virtual_batch(twice, model, classes, full, urgent_only, 0, keep, 0.9),
      std::domain_error);
}

TEST_CASE("undiscounted training converges to the immediate reward") {
  mdp::PlannerModel model(two_layer_model());
  rl::TrainingConfig config;
  config.schedule = {75.0, 0.5, 0.9999};
  config.gamma = 0.0;
  config.seed = 3;
  rl::Trainer trainer(model, config);
  trainer.run(30000);

  // With no bootstrap and an exact reward signal, a pair visited n times
  // sits exactly at reward * n / (n + 1).
  std::int64_t visit_total = 0;
  std::int64_t visited_pairs = 0;
  for (int s = 0; s < model.states().size(); ++s)
    for (int a = 0; a < model.actions().size(); ++a) {
      std::int64_t n = trainer.table().count(s, a);
      visit_total += n;
      if (n == 0) {
        CHECK(trainer.table().q(s, a) == 0.0);
        continue;
      }
      ++visited_pairs;
      double expect = model.reward(s, a) * (double(n) / double(n + 1));
      CHECK(trainer.table().q(s, a) == doctest::Approx(expect).epsilon(1e-9));
    }
  CHECK(visit_total == 30000);  // one update per episode without batches
  CHECK(visited_pairs > 50);
  CHECK(trainer.episode() == 30000);
  CHECK(trainer.temperature() == doctest::Approx(config.schedule.at_episode(30000)).epsilon(1e-9));
}

TEST_CASE("values respect the discounted quality bound") {
  mdp::PlannerModel model(two_layer_model());
  double bound = 20.0 / (1.0 - 0.9);

  rl::TrainingConfig plain;
  plain.schedule = {75.0, 0.5, 0.99986};
  plain.gamma = 0.9;
  plain.seed = 17;
  rl::Trainer a(model, plain);
  a.run(50000);

  rl::TrainingConfig batched = plain;
  batched.seed = 18;
  batched.virtual_period = 10;
  rl::Trainer b(model, batched);
  b.run(50000);

  for (const auto* trainer : {&a, &b})
    for (double v : trainer->table().value) {
      CHECK(v >= 0.0);
      CHECK(v <= bound * (1.0 + 1e-12));
    }

  // Batches reuse the current rate and consume no visits: the counters
  // record trajectory visits only, with or without batching.
  std::int64_t plain_visits = 0, batched_visits = 0;
  for (auto n : a.table().visits) plain_visits += n;
  for (auto n : b.table().visits) batched_visits += n;
  CHECK(plain_visits == 50000);
  CHECK(batched_visits == 50000);
}

TEST_CASE("an untriggered batch schedule replays the plain run") {
  mdp::PlannerModel model(two_layer_model());
  rl::TrainingConfig plain;
  plain.schedule = {75.0, 0.5, 0.99986};
  plain.seed = 23;
  plain.curve_stride = 500;

  rl::TrainingConfig dormant = plain;
  dormant.virtual_period = 1000000;  // beyond the horizon: batches never fire

  rl::Trainer a(model, plain), b(model, dormant);
  a.run(20000);
  b.run(20000);
  CHECK(a.table().value == b.table().value);
  CHECK(a.table().visits == b.table().visits);
  CHECK(a.state() == b.state());
  CHECK(a.temperature() == b.temperature());
  CHECK(a.reward_curve() == b.reward_curve());
  CHECK(a.checkpoint().policy_rng == b.checkpoint().policy_rng);
  CHECK(a.checkpoint().env_rng == b.checkpoint().env_rng);
}

TEST_CASE("training is deterministic and resumes exactly") {
  mdp::PlannerModel model(two_layer_model());
  rl::TrainingConfig config;
  config.schedule = {75.0, 0.5, 0.99986};
  config.seed = 11;
  config.virtual_period = 10;
  config.curve_stride = 500;

  rl::Trainer whole(model, config);
  whole.run(6000);

  rl::Trainer first(model, config);
  first.run(2500);
  auto saved = first.checkpoint();
  rl::Trainer resumed(model, saved);
  resumed.run(3500);

  CHECK(resumed.episode() == whole.episode());
  CHECK(resumed.state() == whole.state());
  CHECK(resumed.temperature() == whole.temperature());
  CHECK(resumed.table().value == whole.table().value);
  CHECK(resumed.table().visits == whole.table().visits);
  CHECK(resumed.reward_curve() == whole.reward_curve());
  CHECK(resumed.checkpoint().policy_rng == whole.checkpoint().policy_rng);
  CHECK(resumed.checkpoint().env_rng == whole.checkpoint().env_rng);
  CHECK(whole.reward_curve().size() == 12);
  for (double point : whole.reward_curve()) {
    CHECK(point >= 0.0);
    CHECK(point <= 20.0);
  }

  // Checkpoints refuse mismatched scenarios and malformed tables.
  auto bad = saved;
  bad.fingerprint ^= 1;
  CHECK_THROWS_AS(rl::Trainer(model, bad), std::runtime_error);
  auto truncated = saved;
  truncated.value.pop_back();
  CHECK_THROWS_AS(rl::Trainer(model, truncated), std::runtime_error);

  // Config validation.
  rl::TrainingConfig invalid = config;
  invalid.gamma = 1.0;
  CHECK_THROWS_AS(rl::Trainer(model, invalid), std::domain_error);
  invalid = config;
  invalid.virtual_period = -1;
  CHECK_THROWS_AS(rl::Trainer(model, invalid), std::domain_error);
  CHECK_THROWS_AS(whole.run(-1), std::domain_error);
}

TEST_CASE("greedy policies read the learned table") {
  mdp::PlannerModel model(two_layer_model());
  rl::TrainingConfig config;
  config.schedule = {75.0, 0.5, 0.99986};
  config.seed = 29;
  config.virtual_period = 10;
  rl::Trainer trainer(model, config);
  trainer.run(50000);

  auto policy = trainer.greedy_policy();
  CHECK(policy.fingerprint == model.fingerprint());
  CHECK(policy.action_of.size() == static_cast<size_t>(model.states().size()));
  for (int s = 0; s < model.states().size(); ++s) {
    int a = policy.action_of[s];
    CHECK(model.actions().valid(s, a));
    CHECK(policy.value[s] == trainer.table().q(s, a));
    for (int b : model.actions().valid_actions(s)) {
      CHECK(trainer.table().q(s, b) <= policy.value[s]);
      if (trainer.table().q(s, b) == policy.value[s]) {
        CHECK(a <= b);  // ties break toward the lowest index
        break;
      }
    }
  }

  // The learned greedy choice at the empty state spends the whole budget.
  const auto& pick = mdp::policy_lookup(model, policy, {0, 0});
  int total = 0;
  for (int c : pick.per_server[0]) total += c;
  CHECK(total == 5);
}

}  // TEST_SUITE
