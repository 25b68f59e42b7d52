#pragma once

#include <cstdint>
#include <vector>

#include "prlc/mdp.hpp"
#include "prlc/rng.hpp"

// Packet-level simulation of the rolling delivery process: every decision
// interval the chosen request vector is transmitted position by position,
// losses are drawn per packet, surviving packets are fed through the
// actual codec, and each generation's decode outcome is recorded at its
// deadline.
//
// Stream discipline: run r of an experiment with base seed s draws link
// k's losses from substream (r, k), the scheduler from (r, K), coding
// coefficients from (r, K + 1) and source symbols from (r, K + 2), K
// being the server count.  Exactly one loss bit is consumed per budgeted
// packet position per interval, lost or not, so schemes compared under
// one seed face identical loss realizations.
namespace prlc::sim {

// Chooses a valid action index for a state; may consume the stream.
class Scheduler {
 public:
  virtual ~Scheduler() = default;
  virtual int choose(int state, Stream& rng) = 0;
};

// Fixed state-to-action map, e.g. a value-iteration or greedy-table
// policy.  Refuses policies built for a different scenario.
class PolicyScheduler : public Scheduler {
 public:
  PolicyScheduler(const mdp::PlannerModel& model, mdp::Policy policy);
  int choose(int state, Stream& rng) override;

 private:
  const mdp::PlannerModel* model_;
  mdp::Policy policy_;
};

// Uniform draw over the state's valid actions.
class RandomScheduler : public Scheduler {
 public:
  explicit RandomScheduler(const mdp::PlannerModel& model) : model_(&model) {}
  int choose(int state, Stream& rng) override;

 private:
  const mdp::PlannerModel* model_;
};

// The same action every epoch; it must be valid wherever the trajectory
// goes (requests toward the following generation always are).
class ConstantScheduler : public Scheduler {
 public:
  explicit ConstantScheduler(int action) : action_(action) {}
  int choose(int, Stream&) override { return action_; }

 private:
  int action_;
};

// Per-class packet counts that survived their links, split by target
// generation.
struct ArrivalSample {
  std::vector<std::vector<int>> urgent;  // [server][class]
  std::vector<std::vector<int>> next;
};

// Draws one loss bit per requested packet in canonical position order
// (per server: urgent classes ascending, then following-generation
// classes ascending).  Pure loss law; delivery-delay drops are applied
// only inside run_episode.
ArrivalSample sample_arrivals(const mdp::RequestVector& request,
                              const std::vector<mdp::LinkModel>& links, Stream& rng);

struct DecisionRecord {
  int state = 0;
  int action = 0;
  std::vector<int> urgent_arrivals;  // per class, summed over servers
  std::vector<int> next_arrivals;
};

struct EpisodeTrace {
  std::vector<int> decoded_layers;     // per generation, at its deadline
  std::vector<double> achieved_delta;  // cumulative quality, same index
  std::vector<DecisionRecord> decisions;
  long long late_packets = 0;  // delivered after their interval and dropped

  double mean_delta() const;
  // Sample standard deviation of the per-generation quality, the
  // fluctuation measure; zero for a single generation.
  double std_delta() const;
};

// Simulates `generations` rolling intervals from an empty buffer.  Per
// epoch: observe the urgent buffer's rank vector, fetch an action, send
// every budgeted position (packet p of server k completes at (p+1)/f_k
// plus the link delay and is dropped as late when that exceeds the
// interval), feed survivors through the codec, then record the decode
// outcome at the deadline and rotate buffers.  Decoded layers are checked
// against the true sources, so a codec fault fails loudly.
//
// The decision period must equal the deadline spacing, and sub-interval
// availability of the following generation is not enforced: its packets
// occupy the tail positions of each interval, matching the planner's
// assumption that every on-time position counts.
EpisodeTrace run_episode(const mdp::PlannerModel& model, Scheduler& scheduler, int generations,
                         std::uint64_t seed, int run_index = 0);

struct ExperimentSummary {
  std::vector<double> generation_mean;  // across runs, per generation index
  std::vector<double> generation_se;
  double delta_bar = 0.0;     // mean over runs of the per-run mean quality
  double delta_bar_se = 0.0;  // standard error of delta_bar across runs
  double fluctuation = 0.0;   // mean over runs of the per-run std
  long long late_packets = 0;
};

// Independent runs r = 0..runs-1 under one base seed; bit-identical when
// repeated with the same arguments.
ExperimentSummary run_experiment(const mdp::PlannerModel& model, Scheduler& scheduler, int runs,
                                 int generations, std::uint64_t seed);

}  // namespace prlc::sim
