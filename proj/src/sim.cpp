#include "prlc/sim.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>

#include "prlc/codec.hpp"
#include "prlc/galois.hpp"

namespace prlc::sim {

namespace {

// One symbol per packet keeps the decode check cheap without weakening
// it: header handling is payload-width independent.
constexpr int kPayloadSymbols = 1;

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

PolicyScheduler::PolicyScheduler(const mdp::PlannerModel& model, mdp::Policy policy)
    : model_(&model), policy_(std::move(policy)) {
  if (policy_.fingerprint != model.fingerprint())
    throw std::domain_error("policy scheduler: policy was built for a different scenario");
  if (policy_.action_of.size() != static_cast<size_t>(model.states().size()))
    throw std::domain_error("policy scheduler: policy table extent mismatch");
  for (int s = 0; s < model.states().size(); ++s)
    if (!model.actions().valid(s, policy_.action_of[s]))
      throw std::domain_error("policy scheduler: policy prescribes an invalid action");
}

int PolicyScheduler::choose(int state, Stream&) {
  if (state < 0 || state >= model_->states().size())
    throw std::domain_error("policy scheduler: state out of range");
  return policy_.action_of[state];
}

int RandomScheduler::choose(int state, Stream& rng) {
  const auto& valid = model_->actions().valid_actions(state);
  return valid[rng.below(static_cast<uint32_t>(valid.size()))];
}

ArrivalSample sample_arrivals(const mdp::RequestVector& request,
                              const std::vector<mdp::LinkModel>& links, Stream& rng) {
  if (request.per_server.size() != links.size())
    throw std::domain_error("arrival sampling: one request row per link required");
  ArrivalSample out;
  for (size_t k = 0; k < links.size(); ++k) {
    const auto& counts = request.per_server[k];
    if (counts.size() % 2 != 0)
      throw std::domain_error("arrival sampling: malformed request row");
    int layers = static_cast<int>(counts.size()) / 2;
    out.urgent.emplace_back(layers, 0);
    out.next.emplace_back(layers, 0);
    for (int l = 0; l < layers; ++l)
      for (int i = 0; i < counts[l]; ++i)
        if (!rng.bernoulli(links[k].loss)) out.urgent[k][l] += 1;
    for (int l = 0; l < layers; ++l)
      for (int i = 0; i < counts[layers + l]; ++i)
        if (!rng.bernoulli(links[k].loss)) out.next[k][l] += 1;
  }
  return out;
}

double EpisodeTrace::mean_delta() const {
  if (achieved_delta.empty()) return 0.0;
  double sum = 0.0;
  for (double d : achieved_delta) sum += d;
  return sum / static_cast<double>(achieved_delta.size());
}

double EpisodeTrace::std_delta() const { return sample_std(achieved_delta); }

EpisodeTrace run_episode(const mdp::PlannerModel& model, Scheduler& scheduler, int generations,
                         std::uint64_t seed, int run_index) {
  if (generations < 1) throw std::domain_error("episode: at least one generation required");
  const auto& scenario = model.scenario();
  const auto& spec = scenario.spec;
  if (scenario.period != spec.duration)
    throw std::domain_error("episode: rolling schedule needs period == deadline spacing");

  const auto servers = static_cast<uint64_t>(scenario.servers.size());
  std::vector<Stream> link_streams;
  for (uint64_t k = 0; k < servers; ++k)
    link_streams.emplace_back(mix_seed(seed, {static_cast<uint64_t>(run_index), k}));
  Stream sched_stream(mix_seed(seed, {static_cast<uint64_t>(run_index), servers}));
  Stream coeff_stream(mix_seed(seed, {static_cast<uint64_t>(run_index), servers + 1}));
  Stream source_stream(mix_seed(seed, {static_cast<uint64_t>(run_index), servers + 2}));

  gf::Field field(scenario.field_order);
  int layers = spec.layers();

  // Source blocks appear in generation order; two are live at a time.
  std::vector<codec::SourceBlock> sources;
  auto source_block = [&](int gen) -> const codec::SourceBlock& {
    while (static_cast<int>(sources.size()) <= gen)
      sources.push_back(codec::random_sources(field, spec, kPayloadSymbols, source_stream));
    return sources[gen];
  };

  std::optional<codec::DecodingBuffer> urgent(std::in_place, field, spec, kPayloadSymbols, 0);
  std::optional<codec::DecodingBuffer> following(std::in_place, field, spec, kPayloadSymbols, 1);

  EpisodeTrace trace;
  for (int n = 0; n < generations; ++n) {
    DecisionRecord record;
    record.state = model.states().index_of(urgent->rank());
    record.action = scheduler.choose(record.state, sched_stream);
    if (record.action < 0 || record.action >= model.actions().size())
      throw std::domain_error("episode: scheduler chose an unknown action");
    if (!model.actions().valid(record.state, record.action))
      throw std::domain_error("episode: scheduler chose an invalid action");
    record.urgent_arrivals.assign(layers, 0);
    record.next_arrivals.assign(layers, 0);

    const auto& request = model.actions().action(record.action).per_server;
    for (size_t k = 0; k < servers; ++k) {
      const auto& link = scenario.servers[k];
      int position = 0;
      for (int type = 0; type < 2 * layers; ++type) {
        bool urgent_half = type < layers;
        int klass = type % layers + 1;
        for (int i = 0; i < request[k][type]; ++i) {
          bool lost = link_streams[k].bernoulli(link.loss);
          double delivered = static_cast<double>(position + 1) / link.rate + link.delay;
          position += 1;
          if (lost) continue;
          if (delivered > static_cast<double>(scenario.period) + 1e-9) {
            trace.late_packets += 1;
            continue;
          }
          int gen = urgent_half ? n : n + 1;
          auto packet =
              codec::encode_packet(field, spec, source_block(gen), gen, klass, coeff_stream);
          (urgent_half ? urgent : following)->receive(packet);
          (urgent_half ? record.urgent_arrivals : record.next_arrivals)[klass - 1] += 1;
        }
      }
    }
    trace.decisions.push_back(std::move(record));

    int decoded = urgent->decodable_layers();
    if (decoded > 0) {
      // The rank vector promises these layers: recover them and compare
      // with the ground truth.
      auto recovered = urgent->decode(decoded);
      const auto& truth = source_block(n);
      for (size_t row = 0; row < recovered.size(); ++row)
        if (recovered[row] != truth[row]) throw std::logic_error("episode: decode mismatch");
    }
    trace.decoded_layers.push_back(decoded);
    trace.achieved_delta.push_back(spec.cumulative_delta(decoded));

    // The deadline passed: the urgent generation expires and the next one
    // takes its place.
    urgent.emplace(std::move(*following));
    following.emplace(field, spec, kPayloadSymbols, n + 2);
  }
  return trace;
}

ExperimentSummary run_experiment(const mdp::PlannerModel& model, Scheduler& scheduler, int runs,
                                 int generations, std::uint64_t seed) {
  if (runs < 1) throw std::domain_error("experiment: at least one run required");
  ExperimentSummary summary;
  summary.generation_mean.assign(generations, 0.0);
  summary.generation_se.assign(generations, 0.0);
  std::vector<std::vector<double>> per_generation(generations);
  std::vector<double> run_means;
  std::vector<double> run_stds;
  for (int r = 0; r < runs; ++r) {
    auto trace = run_episode(model, scheduler, generations, seed, r);
    run_means.push_back(trace.mean_delta());
    run_stds.push_back(trace.std_delta());
    summary.late_packets += trace.late_packets;
    for (int g = 0; g < generations; ++g) per_generation[g].push_back(trace.achieved_delta[g]);
  }
  for (int g = 0; g < generations; ++g) {
    double sum = 0.0;
    for (double d : per_generation[g]) sum += d;
    summary.generation_mean[g] = sum / runs;
    summary.generation_se[g] = sample_std(per_generation[g]) / std::sqrt(double(runs));
  }
  double total = 0.0;
  for (double m : run_means) total += m;
  summary.delta_bar = total / runs;
  summary.delta_bar_se = sample_std(run_means) / std::sqrt(double(runs));
  double fl = 0.0;
  for (double s : run_stds) fl += s;
  summary.fluctuation = fl / runs;
  return summary;
}

}  // namespace prlc::sim
