#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prlc/mdp.hpp"
#include "prlc/rng.hpp"

// Model-free learning of the request policy: tabular Q-learning with
// Boltzmann exploration, plus batch updates of statistically equivalent
// state-action pairs from a single observed transition.
namespace prlc::rl {

// Geometric exploration-temperature decay.  The closed form and the
// per-episode recurrence agree: theta(n) - theta_min = decay^n *
// (theta_max - theta_min).
struct TemperatureSchedule {
  double theta_max = 75.0;
  double theta_min = 0.5;
  double decay = 1.0;

  double at_episode(std::int64_t n) const;
  void validate() const;
};

// Softmax draw over the valid actions only, stabilized by subtracting the
// running maximum before exponentiation.  Consumes exactly one draw from
// the stream and returns an element of `valid`.
int boltzmann_select(std::span<const double> q_row, const std::vector<int>& valid,
                     double temperature, Stream& rng);

// Action-value table with per-pair visit counters, both zero-initialized.
struct QTable {
  int states = 0;
  int actions = 0;
  std::vector<double> value;
  std::vector<std::int64_t> visits;

  QTable() = default;
  QTable(int state_count, int action_count);

  double q(int s, int a) const { return value[static_cast<size_t>(s) * actions + a]; }
  double& q(int s, int a) { return value[static_cast<size_t>(s) * actions + a]; }
  std::int64_t count(int s, int a) const { return visits[static_cast<size_t>(s) * actions + a]; }

  // Largest value among the valid actions of a state.
  double best_valid(const mdp::ActionSpace& actions_of, int s) const;

  // Row view for softmax selection.
  std::span<const double> row(int s) const {
    return {value.data() + static_cast<size_t>(s) * actions, static_cast<size_t>(actions)};
  }
};

// One tabular backup toward the given target (immediate reward plus any
// discounted bootstrap the caller folded in).  The visit counter is
// incremented first, so the n-th visit of a pair blends at rate 1/(n + 1);
// a fresh pair with target 20 lands at 10.
void q_update(QTable& table, int s, int a, double target);

// Blend toward the target at the pair's current rate without consuming a
// visit.  Virtual updates use this: a pair the trajectory never visits
// keeps a unit rate, so each batch replaces its value with the freshest
// target, while heavily visited pairs are only nudged.
void q_track(QTable& table, int s, int a, double target);

struct StepResult {
  double reward = 0.0;
  int next_state = 0;
};

// Samples decision epochs consistently with the planner tables.  Per step
// the stream is consumed in a fixed order: for each server, one loss bit
// per budgeted packet in canonical position order (urgent classes, then
// the following generation's classes), then one inversion draw for the
// next buffer's rank vector, then, in realized-reward mode only, one draw
// for the decoded layer count.  Actions sharing a per-server split of the
// following generation therefore see identical next states under a common
// stream, and the loss bit count per step never varies.
class AnalyticEnvironment {
 public:
  AnalyticEnvironment(const mdp::PlannerModel& model, std::uint64_t seed,
                      bool realized_reward = false);

  // In expected-reward mode (default) the reward equals the planner's
  // expected immediate quality; in realized mode it is a sampled
  // cumulative quality increment with that expectation.
  StepResult step(int state, int action);

  // Survival bits of the most recent step, one per budgeted packet of each
  // server in draw order.  Because every action fills its server budgets
  // completely, the same bits determine the fate of any other request
  // allocation laid out over the same slots.
  const std::vector<std::vector<std::uint8_t>>& last_pattern() const { return pattern_; }

  const mdp::PlannerModel& model() const { return *model_; }
  bool realized_reward() const { return realized_; }
  Stream& rng() { return rng_; }
  const Stream& rng() const { return rng_; }

 private:
  const std::vector<std::pair<int, double>>& next_cdf(const std::vector<int>& survivors);
  const std::vector<double>& decode_cdf(int state, const std::vector<int>& survivors);

  const mdp::PlannerModel* model_;
  Stream rng_;
  bool realized_;
  std::vector<std::vector<std::uint8_t>> pattern_;
  std::map<std::vector<int>, std::vector<std::pair<int, double>>> next_cdf_cache_;
  std::map<std::pair<int, std::vector<int>>, std::vector<double>> decode_cdf_cache_;
};

// Partition of the valid state-action pairs into classes sharing the
// per-server split toward the following generation.  Members of a class
// have identical transition laws and identical realized next states under
// any shared loss pattern, and each member's expected immediate quality is
// known in closed form, so an observed transition of one member is a valid
// experience for all.
class VirtualExperienceClasses {
 public:
  explicit VirtualExperienceClasses(const mdp::PlannerModel& model);

  int class_count() const { return static_cast<int>(members_.size()); }
  int class_of(int s, int a) const;  // -1 when the pair is invalid
  const std::vector<std::pair<int, int>>& members(int c) const { return members_.at(c); }
  std::int64_t pair_count() const;

 private:
  std::vector<std::vector<std::pair<int, int>>> members_;
  std::vector<std::vector<int>> class_index_;  // [state][action], -1 invalid
};

// Next-generation rank vector reached when the given per-server split is
// subjected to a recorded loss pattern.  Each split occupies the trailing
// slots of its server's budget, mirroring the environment's draw order,
// and the surviving packets land in generic position: each level's rank is
// the previous level's rank plus its own survivors, capped by that level's
// dimension.
int pattern_next_state(const mdp::PlannerModel& model,
                       const std::vector<std::vector<int>>& split,
                       const std::vector<std::vector<std::uint8_t>>& pattern);

// Replays one observed loss pattern against the whole table: the observed
// pair's class bootstraps from the realized next state, every other class
// from the state its own split extracts from the pattern.  All bootstrap
// maxima are read before any update, then every valid pair is tracked
// toward its own expected immediate quality plus the discounted bootstrap
// of its class, at its current rate and without consuming visits.  The
// observed pair is included, so on batch episodes it is updated twice.
void apply_virtual_batch(QTable& table, const mdp::PlannerModel& model,
                         const VirtualExperienceClasses& classes, int observed_state,
                         int observed_action, int next_state,
                         const std::vector<std::vector<std::uint8_t>>& pattern, double gamma);

struct TrainingConfig {
  TemperatureSchedule schedule;
  double gamma = 0.9;
  std::uint64_t seed = 0;
  // Every `virtual_period` episodes the observed loss pattern also drives
  // one batch update of every equivalence class; zero disables batches.
  int virtual_period = 0;
  bool realized_reward = false;
  // When positive, the mean observed reward of each consecutive block of
  // this many episodes is recorded as a learning-curve point.
  int curve_stride = 0;

  void validate() const;
};

// Portable snapshot of a training run; resuming validates the model
// fingerprint so a table never continues against a different scenario.
struct TrainerCheckpoint {
  std::uint64_t fingerprint = 0;
  TrainingConfig config;
  std::int64_t episode = 0;
  double temperature = 0.0;
  int state = 0;
  std::vector<double> value;
  std::vector<std::int64_t> visits;
  std::vector<double> reward_curve;
  double curve_accum = 0.0;
  std::string policy_rng;
  std::string env_rng;
};

// One continuing trajectory from the empty buffer.  Per episode: the
// temperature decays once, a valid action is drawn by Boltzmann
// exploration, the environment advances, the observed pair updates, and
// on batch episodes the observed pair's whole class updates again.
class Trainer {
 public:
  Trainer(const mdp::PlannerModel& model, TrainingConfig config);
  Trainer(const mdp::PlannerModel& model, const TrainerCheckpoint& checkpoint);

  void run(std::int64_t episodes);

  const QTable& table() const { return table_; }
  std::int64_t episode() const { return episode_; }
  double temperature() const { return theta_; }
  int state() const { return state_; }
  const TrainingConfig& config() const { return config_; }
  const std::vector<double>& reward_curve() const { return curve_; }

  // Greedy policy over valid actions; ties break toward the lowest index.
  mdp::Policy greedy_policy() const;

  TrainerCheckpoint checkpoint() const;

 private:
  void ensure_classes();

  const mdp::PlannerModel* model_;
  TrainingConfig config_;
  QTable table_;
  AnalyticEnvironment env_;
  Stream policy_rng_;
  std::optional<VirtualExperienceClasses> classes_;
  std::int64_t episode_ = 0;
  double theta_ = 0.0;
  int state_ = 0;
  std::vector<double> curve_;
  double curve_accum_ = 0.0;
};

}  // namespace prlc::rl
