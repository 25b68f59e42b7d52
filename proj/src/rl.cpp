#include "prlc/rl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "prlc/subspace.hpp"

namespace prlc::rl {

double TemperatureSchedule::at_episode(std::int64_t n) const {
  if (n < 0) throw std::domain_error("temperature: negative episode");
  return theta_min + std::pow(decay, static_cast<double>(n)) * (theta_max - theta_min);
}

void TemperatureSchedule::validate() const {
  if (!(theta_min > 0.0) || !std::isfinite(theta_min))
    throw std::domain_error("temperature: theta_min must be positive");
  if (!(theta_max >= theta_min) || !std::isfinite(theta_max))
    throw std::domain_error("temperature: theta_max must be at least theta_min");
  if (!(decay > 0.0) || !(decay <= 1.0))
    throw std::domain_error("temperature: decay must lie in (0, 1]");
}

int boltzmann_select(std::span<const double> q_row, const std::vector<int>& valid,
                     double temperature, Stream& rng) {
  if (valid.empty()) throw std::domain_error("boltzmann: no valid actions");
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw std::domain_error("boltzmann: temperature must be positive");
  double best = q_row[valid.front()];
  for (int a : valid) best = std::max(best, q_row[a]);
  std::vector<double> weight(valid.size());
  double total = 0.0;
  for (size_t i = 0; i < valid.size(); ++i) {
    weight[i] = std::exp((q_row[valid[i]] - best) / temperature);
    total += weight[i];
  }
  double u = rng.unit() * total;
  double acc = 0.0;
  for (size_t i = 0; i < valid.size(); ++i) {
    acc += weight[i];
    if (u < acc) return valid[i];
  }
  return valid.back();
}

QTable::QTable(int state_count, int action_count) : states(state_count), actions(action_count) {
  if (state_count < 0 || action_count < 0) throw std::domain_error("q table: negative extent");
  value.assign(static_cast<size_t>(state_count) * action_count, 0.0);
  visits.assign(static_cast<size_t>(state_count) * action_count, 0);
}

double QTable::best_valid(const mdp::ActionSpace& actions_of, int s) const {
  const auto& valid = actions_of.valid_actions(s);
  if (valid.empty()) throw std::logic_error("q table: state without valid actions");
  double best = q(s, valid.front());
  for (int a : valid) best = std::max(best, q(s, a));
  return best;
}

void q_update(QTable& table, int s, int a, double target) {
  auto idx = static_cast<size_t>(s) * table.actions + a;
  table.visits[idx] += 1;
  double rate = 1.0 / (1.0 + static_cast<double>(table.visits[idx]));
  table.value[idx] = (1.0 - rate) * table.value[idx] + rate * target;
}

void q_track(QTable& table, int s, int a, double target) {
  auto idx = static_cast<size_t>(s) * table.actions + a;
  double rate = 1.0 / (1.0 + static_cast<double>(table.visits[idx]));
  table.value[idx] = (1.0 - rate) * table.value[idx] + rate * target;
}

AnalyticEnvironment::AnalyticEnvironment(const mdp::PlannerModel& model, std::uint64_t seed,
                                         bool realized_reward)
    : model_(&model), rng_(seed), realized_(realized_reward) {}

const std::vector<std::pair<int, double>>& AnalyticEnvironment::next_cdf(
    const std::vector<int>& survivors) {
  auto it = next_cdf_cache_.find(survivors);
  if (it != next_cdf_cache_.end()) return it->second;
  const auto& spec = model_->scenario().spec;
  std::vector<int> empty(spec.layers(), 0);
  auto atoms = subspace::rank_transition_pmf(empty, survivors, spec.beta,
                                             model_->scenario().field_order,
                                             model_->exact_probabilities());
  std::vector<std::pair<int, double>> cdf;
  cdf.reserve(atoms.size());
  double acc = 0.0;
  for (const auto& atom : atoms) {
    acc += to_double(atom.prob);
    cdf.emplace_back(model_->states().index_of(atom.rank), acc);
  }
  return next_cdf_cache_.emplace(survivors, std::move(cdf)).first->second;
}

const std::vector<double>& AnalyticEnvironment::decode_cdf(int state,
                                                           const std::vector<int>& survivors) {
  auto key = std::make_pair(state, survivors);
  auto it = decode_cdf_cache_.find(key);
  if (it != decode_cdf_cache_.end()) return it->second;
  const auto& spec = model_->scenario().spec;
  auto pmf = subspace::decode_layers_pmf(model_->states().rank(state), survivors, spec.beta,
                                         model_->scenario().field_order,
                                         model_->exact_probabilities());
  std::vector<double> cdf(pmf.size());
  double acc = 0.0;
  for (size_t l = 0; l < pmf.size(); ++l) {
    acc += to_double(pmf[l]);
    cdf[l] = acc;
  }
  return decode_cdf_cache_.emplace(std::move(key), std::move(cdf)).first->second;
}

StepResult AnalyticEnvironment::step(int state, int action) {
  if (state < 0 || state >= model_->states().size())
    throw std::domain_error("environment: state out of range");
  if (action < 0 || action >= model_->actions().size())
    throw std::domain_error("environment: action out of range");
  if (!model_->actions().valid(state, action))
    throw std::domain_error("environment: invalid action for state");

  const auto& scenario = model_->scenario();
  int layers = scenario.spec.layers();
  const auto& request = model_->actions().action(action).per_server;
  std::vector<int> urgent_survivors(layers, 0);
  std::vector<int> next_survivors(layers, 0);
  pattern_.resize(request.size());
  for (size_t k = 0; k < request.size(); ++k) {
    double loss = scenario.servers[k].loss;
    auto& bits = pattern_[k];
    bits.clear();
    for (int l = 0; l < layers; ++l)
      for (int i = 0; i < request[k][l]; ++i) {
        bits.push_back(rng_.bernoulli(loss) ? 0 : 1);
        urgent_survivors[l] += bits.back();
      }
    for (int l = 0; l < layers; ++l)
      for (int i = 0; i < request[k][layers + l]; ++i) {
        bits.push_back(rng_.bernoulli(loss) ? 0 : 1);
        next_survivors[l] += bits.back();
      }
  }

  StepResult out;
  const auto& cdf = next_cdf(next_survivors);
  double u = rng_.unit();
  out.next_state = cdf.back().first;
  for (const auto& [s, acc] : cdf) {
    if (u < acc) {
      out.next_state = s;
      break;
    }
  }

  if (realized_) {
    const auto& layer_cdf = decode_cdf(state, urgent_survivors);
    double v = rng_.unit();
    int decoded = static_cast<int>(layer_cdf.size()) - 1;
    for (size_t l = 0; l < layer_cdf.size(); ++l) {
      if (v < layer_cdf[l]) {
        decoded = static_cast<int>(l);
        break;
      }
    }
    out.reward = scenario.spec.cumulative_delta(decoded);
  } else {
    out.reward = model_->reward(state, action);
  }
  return out;
}

VirtualExperienceClasses::VirtualExperienceClasses(const mdp::PlannerModel& model) {
  const auto& states = model.states();
  const auto& actions = model.actions();
  std::map<std::vector<int>, int> lookup;
  class_index_.assign(states.size(), std::vector<int>(actions.size(), -1));
  for (int s = 0; s < states.size(); ++s) {
    for (int a : actions.valid_actions(s)) {
      std::vector<int> split_key;
      for (const auto& counts : actions.next_split(a))
        split_key.insert(split_key.end(), counts.begin(), counts.end());
      auto [it, fresh] = lookup.emplace(std::move(split_key), class_count());
      if (fresh) members_.emplace_back();
      class_index_[s][a] = it->second;
      members_[it->second].emplace_back(s, a);
    }
  }
}

int VirtualExperienceClasses::class_of(int s, int a) const {
  if (s < 0 || s >= static_cast<int>(class_index_.size()))
    throw std::domain_error("experience classes: state out of range");
  if (a < 0 || a >= static_cast<int>(class_index_[s].size()))
    throw std::domain_error("experience classes: action out of range");
  return class_index_[s][a];
}

std::int64_t VirtualExperienceClasses::pair_count() const {
  std::int64_t total = 0;
  for (const auto& group : members_) total += static_cast<std::int64_t>(group.size());
  return total;
}

int pattern_next_state(const mdp::PlannerModel& model,
                       const std::vector<std::vector<int>>& split,
                       const std::vector<std::vector<std::uint8_t>>& pattern) {
  const auto& spec = model.scenario().spec;
  int layers = spec.layers();
  std::vector<int> survivors(layers, 0);
  for (size_t k = 0; k < pattern.size(); ++k) {
    int offset = static_cast<int>(pattern[k].size());
    for (int l = 0; l < layers; ++l) offset -= split[k][l];
    for (int l = 0; l < layers; ++l)
      for (int i = 0; i < split[k][l]; ++i) survivors[l] += pattern[k][offset++];
  }
  std::vector<int> rank(layers);
  int cumulative = 0;
  for (int l = 0; l < layers; ++l) {
    cumulative = std::min(spec.beta[l], cumulative + survivors[l]);
    rank[l] = cumulative;
  }
  return model.states().index_of(rank);
}

void apply_virtual_batch(QTable& table, const mdp::PlannerModel& model,
                         const VirtualExperienceClasses& classes, int observed_state,
                         int observed_action, int next_state,
                         const std::vector<std::vector<std::uint8_t>>& pattern, double gamma) {
  int observed_class = classes.class_of(observed_state, observed_action);
  if (observed_class < 0) throw std::domain_error("virtual batch: observed pair is invalid");
  std::vector<double> bootstrap(classes.class_count());
  for (int c = 0; c < classes.class_count(); ++c) {
    int next = c == observed_class
                   ? next_state
                   : pattern_next_state(
                         model, model.actions().next_split(classes.members(c).front().second),
                         pattern);
    bootstrap[c] = gamma * table.best_valid(model.actions(), next);
  }
  for (int c = 0; c < classes.class_count(); ++c)
    for (const auto& [s, a] : classes.members(c))
      q_track(table, s, a, model.reward(s, a) + bootstrap[c]);
}

void TrainingConfig::validate() const {
  schedule.validate();
  if (!(gamma >= 0.0) || !(gamma < 1.0))
    throw std::domain_error("training: discount must lie in [0, 1)");
  if (virtual_period < 0) throw std::domain_error("training: negative batch period");
  if (curve_stride < 0) throw std::domain_error("training: negative curve stride");
}

Trainer::Trainer(const mdp::PlannerModel& model, TrainingConfig config)
    : model_(&model),
      config_(config),
      table_(model.states().size(), model.actions().size()),
      env_(model, mix_seed(config.seed, {1}), config.realized_reward),
      policy_rng_(mix_seed(config.seed, {0})),
      theta_(config.schedule.theta_max),
      state_(model.states().empty_state()) {
  config_.validate();
  ensure_classes();
}

Trainer::Trainer(const mdp::PlannerModel& model, const TrainerCheckpoint& checkpoint)
    : model_(&model),
      config_(checkpoint.config),
      table_(model.states().size(), model.actions().size()),
      env_(model, mix_seed(checkpoint.config.seed, {1}), checkpoint.config.realized_reward),
      policy_rng_(mix_seed(checkpoint.config.seed, {0})) {
  config_.validate();
  if (checkpoint.fingerprint != model.fingerprint())
    throw std::runtime_error("training: checkpoint was built for a different scenario");
  if (checkpoint.value.size() != table_.value.size() ||
      checkpoint.visits.size() != table_.visits.size())
    throw std::runtime_error("training: checkpoint table extent mismatch");
  if (checkpoint.state < 0 || checkpoint.state >= model.states().size())
    throw std::runtime_error("training: checkpoint state out of range");
  if (checkpoint.episode < 0) throw std::runtime_error("training: negative checkpoint episode");
  table_.value = checkpoint.value;
  table_.visits = checkpoint.visits;
  episode_ = checkpoint.episode;
  theta_ = checkpoint.temperature;
  state_ = checkpoint.state;
  curve_ = checkpoint.reward_curve;
  curve_accum_ = checkpoint.curve_accum;
  policy_rng_.restore(checkpoint.policy_rng);
  env_.rng().restore(checkpoint.env_rng);
  ensure_classes();
}

void Trainer::ensure_classes() {
  if (config_.virtual_period > 0 && !classes_) classes_.emplace(*model_);
}

void Trainer::run(std::int64_t episodes) {
  if (episodes < 0) throw std::domain_error("training: negative episode count");
  const auto& actions = model_->actions();
  const auto& schedule = config_.schedule;
  for (std::int64_t i = 0; i < episodes; ++i) {
    episode_ += 1;
    theta_ = schedule.theta_min + schedule.decay * (theta_ - schedule.theta_min);
    int a = boltzmann_select(table_.row(state_), actions.valid_actions(state_), theta_,
                             policy_rng_);
    StepResult outcome = env_.step(state_, a);
    double target =
        outcome.reward + config_.gamma * table_.best_valid(actions, outcome.next_state);
    q_update(table_, state_, a, target);
    if (config_.virtual_period > 0 && episode_ % config_.virtual_period == 0)
      apply_virtual_batch(table_, *model_, *classes_, state_, a, outcome.next_state,
                          env_.last_pattern(), config_.gamma);
    if (config_.curve_stride > 0) {
      curve_accum_ += outcome.reward;
      if (episode_ % config_.curve_stride == 0) {
        curve_.push_back(curve_accum_ / config_.curve_stride);
        curve_accum_ = 0.0;
      }
    }
    state_ = outcome.next_state;
  }
}

mdp::Policy Trainer::greedy_policy() const {
  mdp::Policy policy;
  policy.fingerprint = model_->fingerprint();
  policy.action_of.resize(model_->states().size());
  policy.value.resize(model_->states().size());
  for (int s = 0; s < model_->states().size(); ++s) {
    const auto& valid = model_->actions().valid_actions(s);
    int best = valid.front();
    for (int a : valid)
      if (table_.q(s, a) > table_.q(s, best)) best = a;
    policy.action_of[s] = best;
    policy.value[s] = table_.q(s, best);
  }
  return policy;
}

TrainerCheckpoint Trainer::checkpoint() const {
  TrainerCheckpoint out;
  out.fingerprint = model_->fingerprint();
  out.config = config_;
  out.episode = episode_;
  out.temperature = theta_;
  out.state = state_;
  out.value = table_.value;
  out.visits = table_.visits;
  out.reward_curve = curve_;
  out.curve_accum = curve_accum_;
  out.policy_rng = policy_rng_.save();
  out.env_rng = env_.rng().save();
  return out;
}

}  // namespace prlc::rl
