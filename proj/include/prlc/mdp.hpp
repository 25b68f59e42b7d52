#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "prlc/generation.hpp"
#include "prlc/rational.hpp"

// Exact planning model of the rolling-generation request problem: at each
// decision epoch the receiver splits every server's packet budget between
// the most urgent generation (decoded at the epoch's end) and the one
// after it (whose packets prefill the next buffer).  The state is the
// urgent buffer's rank vector; everything else is deterministic.
namespace prlc::mdp {

// One lossy server link.
struct LinkModel {
  double rate = 1.0;   // packets per slot
  double loss = 0.0;   // erasure probability per packet
  double delay = 0.0;  // fixed delivery latency in slots
};

struct ScenarioModel {
  std::vector<LinkModel> servers;
  GenerationSpec spec;
  int period = 0;       // slots between decisions (= deadline spacing)
  double discount = 0.9;
  unsigned field_order = 256;
  int horizon = 2;      // generations requestable per decision

  // Per-interval packet budget N_k = rate * period, which must be integral.
  int packets_per_interval(int server) const;
  int total_budget() const;
  void validate() const;
};

// All reachable rank vectors of one generation, in ascending lexicographic
// order of the per-layer innovative packet counts (u_1, ..., u_L).
class StateSpace {
 public:
  explicit StateSpace(const GenerationSpec& spec);

  int size() const { return static_cast<int>(ranks_.size()); }
  const std::vector<int>& rank(int index) const { return ranks_.at(index); }
  std::vector<int> layer_counts(int index) const;
  int index_of(const std::vector<int>& rank) const;  // unknown vector: domain error
  int empty_state() const { return 0; }

 private:
  std::vector<std::vector<int>> ranks_;
  std::map<std::vector<int>, int> index_;
};

// One request split: per server, packet counts per type in canonical
// order (urgent generation classes 1..L, then the following generation's
// classes 1..L).  Every server's counts sum to its full budget.
struct RequestVector {
  std::vector<std::vector<int>> per_server;

  bool operator==(const RequestVector&) const = default;
  std::vector<int> flattened() const;
};

// The unfiltered action universe (every split of every server's budget
// over the packet types, in ascending lexicographic order of the
// flattened count tuple) plus per-state validity: classes the urgent
// buffer has already filled may not be requested.
class ActionSpace {
 public:
  ActionSpace(const StateSpace& states, const ScenarioModel& model);

  int size() const { return static_cast<int>(actions_.size()); }
  const RequestVector& action(int index) const { return actions_.at(index); }
  int index_of(const RequestVector& v) const;  // unknown vector: domain error
  bool valid(int state, int action) const { return valid_[state][action] != 0; }
  const std::vector<int>& valid_actions(int state) const { return valid_list_.at(state); }

  // Per-server request counts of the urgent / following generation half.
  std::vector<std::vector<int>> urgent_split(int action) const;
  std::vector<std::vector<int>> next_split(int action) const;

 private:
  std::vector<RequestVector> actions_;
  std::vector<std::vector<uint8_t>> valid_;    // [state][action]
  std::vector<std::vector<int>> valid_list_;   // [state] -> ascending indices
  std::map<std::vector<int>, int> index_;
  int layers_ = 0;
};

// Law of the per-class totals that survive their links, exact in the
// dyadic loss probabilities.  requested[k][l] packets of class l+1 are
// asked from server k; losses are independent per packet.
std::vector<std::pair<std::vector<int>, Rational>> arrival_pmf(
    const std::vector<std::vector<int>>& requested, const std::vector<LinkModel>& servers);

// Precomputed exact planning tables for one scenario: expected immediate
// quality per (state, action) and the next-state law per action.  The
// next state depends only on the action's next-generation half, never on
// the current state, because the following buffer always starts empty.
class PlannerModel {
 public:
  // exact_probabilities = false plans in the infinite-field-size limit,
  // where every arriving packet is innovative until its level saturates.
  explicit PlannerModel(ScenarioModel scenario, bool exact_probabilities = true);

  const ScenarioModel& scenario() const { return scenario_; }
  const StateSpace& states() const { return states_; }
  const ActionSpace& actions() const { return actions_; }
  bool exact_probabilities() const { return exact_; }

  double reward(int state, int action) const { return reward_[state][action]; }
  const Rational& reward_exact(int state, int action) const { return reward_exact_[state][action]; }
  const std::vector<std::pair<int, double>>& transitions(int action) const { return trans_.at(action); }
  const std::vector<std::pair<int, Rational>>& transitions_exact(int action) const {
    return trans_exact_.at(action);
  }

  // Hash of the canonical scenario description; embedded in exported
  // policies and checkpoints so stale artifacts are rejected.
  uint64_t fingerprint() const { return fingerprint_; }

 private:
  ScenarioModel scenario_;
  bool exact_ = true;
  StateSpace states_;
  ActionSpace actions_;
  std::vector<std::vector<Rational>> reward_exact_;
  std::vector<std::vector<double>> reward_;
  std::vector<std::vector<std::pair<int, Rational>>> trans_exact_;
  std::vector<std::vector<std::pair<int, double>>> trans_;
  uint64_t fingerprint_ = 0;
};

struct Policy {
  std::vector<int> action_of;        // per state, an index into the universe
  std::vector<double> value;
  std::vector<double> sweep_deltas;  // sup-norm improvements per sweep
  uint64_t fingerprint = 0;
};

// Bellman backups until the sup-norm improvement drops below the
// threshold, then greedy extraction; ties break toward the lowest action
// index.  gamma = 0 degenerates to the myopic argmax of the immediate
// reward.
Policy value_iteration(const PlannerModel& model, double gamma, double threshold = 1e-9);

// Action prescribed for a rank vector; unknown vectors raise a domain
// error.
const RequestVector& policy_lookup(const PlannerModel& model, const Policy& policy,
                                   const std::vector<int>& rank);

}  // namespace prlc::mdp
