#include "prlc/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "prlc/subspace.hpp"

namespace prlc::mdp {

namespace {

BigInt binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  BigInt r = 1;
  for (int i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

Rational rat_pow(const Rational& base, int exp) {
  Rational r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

// All count vectors of `cells` nonnegative entries summing to `total`,
// ascending lexicographic.
void compositions(int total, int cells, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (cells == 1) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int take = 0; take <= total; ++take) {
    cur.push_back(take);
    compositions(total - take, cells - 1, cur, out);
    cur.pop_back();
  }
}

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

int ScenarioModel::packets_per_interval(int server) const {
  const double exact = servers.at(server).rate * period;
  const auto n = static_cast<int>(std::llround(exact));
  if (std::abs(exact - n) > 1e-6 || n < 0)
    throw std::domain_error("scenario: per-interval budget is not a nonnegative integer");
  return n;
}

int ScenarioModel::total_budget() const {
  int total = 0;
  for (size_t k = 0; k < servers.size(); ++k) total += packets_per_interval(static_cast<int>(k));
  return total;
}

void ScenarioModel::validate() const {
  spec.validate();
  if (servers.empty()) throw std::domain_error("scenario: no servers");
  if (period <= 0) throw std::domain_error("scenario: period must be positive");
  if (!(discount >= 0.0 && discount <= 1.0)) throw std::domain_error("scenario: discount outside [0, 1]");
  if (field_order < 2) throw std::domain_error("scenario: field order must be at least 2");
  if (horizon < 1 || horizon > 2) throw std::domain_error("scenario: horizon must be 1 or 2");
  for (size_t k = 0; k < servers.size(); ++k) {
    const auto& s = servers[k];
    if (!(s.rate > 0)) throw std::domain_error("scenario: server rate must be positive");
    if (!(s.loss >= 0.0 && s.loss < 1.0)) throw std::domain_error("scenario: loss outside [0, 1)");
    if (s.delay < 0) throw std::domain_error("scenario: negative delay");
    packets_per_interval(static_cast<int>(k));
  }
}

StateSpace::StateSpace(const GenerationSpec& spec) {
  spec.validate();
  const int levels = spec.layers();
  std::vector<int> u(levels, 0);
  std::function<void(int, int)> walk = [&](int level, int sum) {
    if (level == levels) {
      std::vector<int> rank(levels);
      int c = 0;
      for (int l = 0; l < levels; ++l) {
        c += u[l];
        rank[l] = c;
      }
      index_[rank] = static_cast<int>(ranks_.size());
      ranks_.push_back(std::move(rank));
      return;
    }
    for (int v = 0; sum + v <= spec.beta[level]; ++v) {
      u[level] = v;
      walk(level + 1, sum + v);
    }
  };
  walk(0, 0);
}

std::vector<int> StateSpace::layer_counts(int index) const {
  const auto& r = rank(index);
  std::vector<int> u(r.size());
  for (size_t l = 0; l < r.size(); ++l) u[l] = r[l] - (l ? r[l - 1] : 0);
  return u;
}

int StateSpace::index_of(const std::vector<int>& rank) const {
  auto it = index_.find(rank);
  if (it == index_.end()) throw std::domain_error("state space: unknown rank vector");
  return it->second;
}

std::vector<int> RequestVector::flattened() const {
  std::vector<int> flat;
  for (const auto& counts : per_server) flat.insert(flat.end(), counts.begin(), counts.end());
  return flat;
}

ActionSpace::ActionSpace(const StateSpace& states, const ScenarioModel& model) {
  model.validate();
  layers_ = model.spec.layers();
  const int types = model.horizon * layers_;

  std::vector<std::vector<std::vector<int>>> per(model.servers.size());
  for (size_t k = 0; k < per.size(); ++k) {
    std::vector<int> cur;
    compositions(model.packets_per_interval(static_cast<int>(k)), types, cur, per[k]);
  }

  // Cartesian product with the first server most significant keeps the
  // flattened tuples in ascending lexicographic order.
  std::vector<size_t> pick(per.size(), 0);
  bool exhausted = false;
  while (!exhausted) {
    RequestVector rv;
    rv.per_server.reserve(per.size());
    for (size_t k = 0; k < per.size(); ++k) rv.per_server.push_back(per[k][pick[k]]);
    index_[rv.flattened()] = static_cast<int>(actions_.size());
    actions_.push_back(std::move(rv));
    int k = static_cast<int>(per.size()) - 1;
    while (k >= 0 && ++pick[k] == per[k].size()) pick[k--] = 0;
    exhausted = k < 0;
  }

  valid_.assign(states.size(), std::vector<uint8_t>(actions_.size(), 0));
  valid_list_.resize(states.size());
  for (int s = 0; s < states.size(); ++s) {
    const auto& rank = states.rank(s);
    for (int a = 0; a < size(); ++a) {
      bool ok = true;
      for (const auto& counts : actions_[a].per_server)
        for (int l = 0; ok && l < layers_; ++l)
          if (rank[l] == model.spec.beta[l] && counts[l] > 0) ok = false;
      if (ok) {
        valid_[s][a] = 1;
        valid_list_[s].push_back(a);
      }
    }
  }
}

int ActionSpace::index_of(const RequestVector& v) const {
  auto it = index_.find(v.flattened());
  if (it == index_.end()) throw std::domain_error("action space: unknown request vector");
  return it->second;
}

std::vector<std::vector<int>> ActionSpace::urgent_split(int action) const {
  std::vector<std::vector<int>> split;
  for (const auto& counts : actions_.at(action).per_server)
    split.emplace_back(counts.begin(), counts.begin() + layers_);
  return split;
}

std::vector<std::vector<int>> ActionSpace::next_split(int action) const {
  std::vector<std::vector<int>> split;
  for (const auto& counts : actions_.at(action).per_server) {
    if (static_cast<int>(counts.size()) >= 2 * layers_)
      split.emplace_back(counts.begin() + layers_, counts.begin() + 2 * layers_);
    else
      split.emplace_back(layers_, 0);
  }
  return split;
}

std::vector<std::pair<std::vector<int>, Rational>> arrival_pmf(
    const std::vector<std::vector<int>>& requested, const std::vector<LinkModel>& servers) {
  if (requested.size() != servers.size())
    throw std::domain_error("arrival pmf: request/server count mismatch");
  const int classes = requested.empty() ? 0 : static_cast<int>(requested[0].size());

  // Per class: convolution over servers of per-link survival binomials.
  std::vector<std::vector<Rational>> per_class(classes);
  for (int l = 0; l < classes; ++l) {
    std::vector<Rational> pmf{Rational(1)};
    for (size_t k = 0; k < servers.size(); ++k) {
      const int n = requested[k].at(l);
      const Rational keep = Rational(1) - Rational(servers[k].loss);
      const Rational lose = Rational(servers[k].loss);
      std::vector<Rational> link(static_cast<size_t>(n) + 1);
      for (int j = 0; j <= n; ++j)
        link[j] = Rational(binomial(n, j)) * rat_pow(keep, j) * rat_pow(lose, n - j);
      std::vector<Rational> next(pmf.size() + n, Rational(0));
      for (size_t i = 0; i < pmf.size(); ++i) {
        if (pmf[i] == 0) continue;
        for (int j = 0; j <= n; ++j) next[i + j] += pmf[i] * link[j];
      }
      pmf = std::move(next);
    }
    per_class[l] = std::move(pmf);
  }

  std::vector<std::pair<std::vector<int>, Rational>> out;
  std::vector<int> counts(classes, 0);
  std::function<void(int, Rational)> expand = [&](int l, Rational prob) {
    if (prob == 0) return;
    if (l == classes) {
      out.emplace_back(counts, prob);
      return;
    }
    for (size_t j = 0; j < per_class[l].size(); ++j) {
      counts[l] = static_cast<int>(j);
      expand(l + 1, prob * per_class[l][j]);
    }
  };
  expand(0, Rational(1));

  Rational total = 0;
  for (const auto& [z, p] : out) total += p;
  if (total != 1) throw std::logic_error("arrival pmf does not sum to one");
  return out;
}

PlannerModel::PlannerModel(ScenarioModel scenario, bool exact_probabilities)
    : scenario_(std::move(scenario)),
      exact_(exact_probabilities),
      states_(scenario_.spec),
      actions_(states_, scenario_) {
  const auto& beta = scenario_.spec.beta;
  const unsigned q = scenario_.field_order;
  const int levels = scenario_.spec.layers();

  std::vector<Rational> cum_delta(static_cast<size_t>(levels) + 1, Rational(0));
  for (int l = 0; l < levels; ++l) cum_delta[l + 1] = cum_delta[l] + Rational(scenario_.spec.delta[l]);

  // Immediate quality: group actions by their urgent request split, since
  // the expected quality depends on nothing else.
  reward_exact_.assign(states_.size(), std::vector<Rational>(actions_.size(), Rational(0)));
  reward_.assign(states_.size(), std::vector<double>(actions_.size(), 0.0));
  std::map<std::vector<std::vector<int>>, std::vector<int>> urgent_groups;
  for (int a = 0; a < actions_.size(); ++a) urgent_groups[actions_.urgent_split(a)].push_back(a);

  std::map<std::pair<int, std::vector<int>>, Rational> quality_memo;
  auto quality_after = [&](int s, const std::vector<int>& z) -> const Rational& {
    auto key = std::make_pair(s, z);
    auto it = quality_memo.find(key);
    if (it == quality_memo.end()) {
      const auto pmf = subspace::decode_layers_pmf(states_.rank(s), z, beta, q, exact_);
      Rational value = 0;
      for (int l = 0; l <= levels; ++l) value += pmf[l] * cum_delta[l];
      it = quality_memo.emplace(std::move(key), std::move(value)).first;
    }
    return it->second;
  };

  for (const auto& [split, members] : urgent_groups) {
    const auto arrivals = arrival_pmf(split, scenario_.servers);
    for (int s = 0; s < states_.size(); ++s) {
      Rational j = 0;
      for (const auto& [z, p] : arrivals) j += p * quality_after(s, z);
      for (int a : members) {
        reward_exact_[s][a] = j;
        reward_[s][a] = to_double(j);
      }
    }
  }

  // Next-state law: grouped by the next-generation split; the following
  // buffer always starts empty, so the current state never enters.
  trans_exact_.resize(actions_.size());
  trans_.resize(actions_.size());
  const std::vector<int> empty_rank(levels, 0);
  std::map<std::vector<std::vector<int>>, std::vector<std::pair<int, Rational>>> next_memo;
  for (int a = 0; a < actions_.size(); ++a) {
    const auto split = actions_.next_split(a);
    auto it = next_memo.find(split);
    if (it == next_memo.end()) {
      std::map<int, Rational> law;
      for (const auto& [z, p] : arrival_pmf(split, scenario_.servers)) {
        if (p == 0) continue;
        for (const auto& atom : subspace::rank_transition_pmf(empty_rank, z, beta, q, exact_))
          law[states_.index_of(atom.rank)] += p * atom.prob;
      }
      std::vector<std::pair<int, Rational>> flat(law.begin(), law.end());
      Rational total = 0;
      for (const auto& [ns, p] : flat) total += p;
      if (total != 1) throw std::logic_error("transition pmf does not sum to one");
      it = next_memo.emplace(split, std::move(flat)).first;
    }
    trans_exact_[a] = it->second;
    trans_[a].clear();
    trans_[a].reserve(trans_exact_[a].size());
    for (const auto& [ns, p] : trans_exact_[a]) trans_[a].emplace_back(ns, to_double(p));
  }

  std::ostringstream os;
  os << std::setprecision(17);
  os << "layers";
  for (int x : scenario_.spec.alpha) os << ',' << x;
  os << ";delta";
  for (double x : scenario_.spec.delta) os << ',' << x;
  os << ";playback=" << scenario_.spec.playback_delay << ";duration=" << scenario_.spec.duration
     << ";period=" << scenario_.period << ";discount=" << scenario_.discount
     << ";q=" << scenario_.field_order << ";horizon=" << scenario_.horizon;
  for (const auto& s : scenario_.servers)
    os << ";server=" << s.rate << ',' << s.loss << ',' << s.delay;
  if (!exact_) os << ";mode=infinite";
  fingerprint_ = fnv1a64(os.str());
}

Policy value_iteration(const PlannerModel& model, double gamma, double threshold) {
  if (!(threshold > 0)) throw std::domain_error("value iteration: threshold must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::domain_error("value iteration: gamma outside [0, 1)");
  const int count = model.states().size();
  const int universe = model.actions().size();

  std::vector<double> v(count, 0.0), nv(count, 0.0), future(universe, 0.0);
  std::vector<double> deltas;
  for (;;) {
    // Next-state laws are state independent, so each action's discounted
    // continuation is shared by every state in the sweep.
    if (gamma > 0)
      for (int a = 0; a < universe; ++a) {
        double f = 0;
        for (const auto& [ns, p] : model.transitions(a)) f += p * v[ns];
        future[a] = gamma * f;
      }
    double delta = 0;
    for (int s = 0; s < count; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a : model.actions().valid_actions(s)) {
        const double x = model.reward(s, a) + (gamma > 0 ? future[a] : 0.0);
        if (x > best) best = x;
      }
      if (!std::isfinite(best)) throw std::runtime_error("value iteration: non-finite backup");
      delta = std::max(delta, std::abs(best - v[s]));
      nv[s] = best;
    }
    v.swap(nv);
    deltas.push_back(delta);
    if (delta < threshold) break;
  }

  Policy policy;
  policy.value = v;
  policy.sweep_deltas = std::move(deltas);
  policy.fingerprint = model.fingerprint();
  policy.action_of.resize(count);
  if (gamma > 0)
    for (int a = 0; a < universe; ++a) {
      double f = 0;
      for (const auto& [ns, p] : model.transitions(a)) f += p * v[ns];
      future[a] = gamma * f;
    }
  for (int s = 0; s < count; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    int pick = -1;
    for (int a : model.actions().valid_actions(s)) {
      const double x = model.reward(s, a) + (gamma > 0 ? future[a] : 0.0);
      if (x > best) {
        best = x;
        pick = a;
      }
    }
    policy.action_of[s] = pick;
  }
  return policy;
}

const RequestVector& policy_lookup(const PlannerModel& model, const Policy& policy,
                                   const std::vector<int>& rank) {
  const int s = model.states().index_of(rank);
  return model.actions().action(policy.action_of.at(s));
}

}  // namespace prlc::mdp
