#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "prlc/config.hpp"
#include "prlc/io.hpp"
#include "prlc/mdp.hpp"
#include "prlc/rl.hpp"
#include "prlc/sim.hpp"

// Command-line front end: plan, train, simulate, sweep, validate-config.
// Exit codes: 0 success, 2 configuration or artifact validation error,
// 3 self-check oracle failure.
namespace {

using namespace prlc;

struct SelfCheckError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config_path;
  std::string out_dir;
  std::string policy_path;
  std::string resume_path;
  std::string algo = "qlearn";
  std::string scheme;
  std::string axis;
  std::vector<double> values;
  std::optional<std::int64_t> episodes;
  std::optional<double> decay;
  std::optional<int> update_period;
  std::optional<double> gamma;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<int> generations;
  double threshold = 1e-9;
  int curve_stride = 1000;
  int seeds = 1;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  bool infinite_q = false;
  bool self_check = false;
  bool svg = false;
};

config::ScenarioConfig load_config(const Options& opt) {
  config::ScenarioConfig cfg = config::load_scenario(opt.config_path);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.runs) cfg.runs = *opt.runs;
  if (opt.generations) cfg.generations = *opt.generations;
  if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
  cfg.validate();
  return cfg;
}

std::string out_file(const config::ScenarioConfig& cfg, const std::string& leaf) {
  std::filesystem::create_directories(cfg.output_dir);
  return (std::filesystem::path(cfg.output_dir) / (cfg.name + "-" + leaf)).string();
}

// Independent recount of the rank-vector lattice.
long long count_rank_vectors(const std::vector<int>& beta, int level = 0, int prev = 0) {
  if (level == static_cast<int>(beta.size())) return 1;
  long long total = 0;
  for (int r = prev; r <= beta[level]; ++r) total += count_rank_vectors(beta, level + 1, r);
  return total;
}

long long choose(long long n, long long k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (long long i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Cheap oracle battery over a built model; failures are reported with
// exit code 3.
void run_self_check(const config::ScenarioConfig& cfg, const mdp::PlannerModel& model) {
  const auto& beta = model.scenario().spec.beta;
  const long long want_states = count_rank_vectors(beta);
  if (model.states().size() != want_states)
    throw SelfCheckError("state count " + std::to_string(model.states().size()) +
                         " != lattice count " + std::to_string(want_states));

  long long want_actions = 1;
  const int types = 2 * model.scenario().spec.layers();
  for (size_t k = 0; k < model.scenario().servers.size(); ++k) {
    const int budget = model.scenario().packets_per_interval(static_cast<int>(k));
    want_actions *= choose(budget + types - 1, types - 1);
  }
  if (model.actions().size() != want_actions)
    throw SelfCheckError("action count " + std::to_string(model.actions().size()) +
                         " != composition count " + std::to_string(want_actions));

  const double top = model.scenario().spec.cumulative_delta(model.scenario().spec.layers());
  for (int a = 0; a < model.actions().size(); a += std::max(1, model.actions().size() / 7)) {
    double total = 0.0;
    for (const auto& [next, p] : model.transitions(a)) {
      if (p < 0.0 || next < 0 || next >= model.states().size())
        throw SelfCheckError("malformed transition atom");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw SelfCheckError("transition law does not sum to one");
    for (int s : {0, model.states().size() - 1}) {
      const double r = model.reward(s, a);
      if (r < -1e-12 || r > top + 1e-9) throw SelfCheckError("reward outside [0, total quality]");
    }
  }

  mdp::Policy seen = mdp::value_iteration(model, cfg.gamma, 1e-9);
  if (seen.sweep_deltas.empty() || seen.sweep_deltas.back() > 1e-9)
    throw SelfCheckError("value iteration did not reach its threshold");
  const double bound = top / (1.0 - cfg.gamma) + 1e-6;
  for (double v : seen.value)
    if (v < -1e-12 || v > bound) throw SelfCheckError("value outside the discounted bound");

  mdp::Policy myopic = mdp::value_iteration(model, 0.0, 1e-9);
  for (int s = 0; s < model.states().size(); ++s) {
    int best = -1;
    for (int a : model.actions().valid_actions(s))
      if (best < 0 || model.reward(s, a) > model.reward(s, best)) best = a;
    if (myopic.action_of[s] != best)
      throw SelfCheckError("myopic policy disagrees with the immediate-reward argmax");
  }

  std::ostringstream csv;
  csv << io::csv_header(io::curve_schema()) << "\n1000,17.5\n";
  std::istringstream reread(csv.str());
  if (io::validate_csv(reread, io::curve_schema()) != 1)
    throw SelfCheckError("csv round-trip miscounted rows");

  std::printf("self-check ok (states=%d actions=%d)\n", model.states().size(),
              model.actions().size());
}

mdp::PlannerModel build_model(const config::ScenarioConfig& cfg, const Options& opt) {
  mdp::PlannerModel model(cfg.to_model(), !opt.infinite_q);
  if (opt.self_check) run_self_check(cfg, model);
  return model;
}

void print_summary(const std::string& label, const sim::ExperimentSummary& summary) {
  std::printf("%s: delta_bar=%.4f se=%.4f fluctuation=%.4f late_packets=%lld\n", label.c_str(),
              summary.delta_bar, summary.delta_bar_se, summary.fluctuation, summary.late_packets);
}

void write_summary_csv(const std::string& path, const config::ScenarioConfig& cfg,
                       const std::string& scheme, const sim::ExperimentSummary& summary) {
  io::CsvWriter csv(path, io::summary_schema());
  csv.row({cfg.name, scheme, std::int64_t{cfg.runs}, std::int64_t{cfg.generations},
           summary.delta_bar, summary.delta_bar_se, summary.fluctuation,
           std::int64_t{summary.late_packets}});
  csv.close();
}

void write_trace_svg(const std::string& path, const config::ScenarioConfig& cfg,
                     const std::string& scheme, const sim::ExperimentSummary& summary) {
  io::CurveSeries series{scheme, {}, summary.generation_mean};
  for (size_t n = 0; n < summary.generation_mean.size(); ++n)
    series.x.push_back(static_cast<double>(n));
  io::write_curve_svg(path, cfg.name, "generation", "distortion reduction (dB)", {series});
}

int cmd_validate(const Options& opt) {
  config::ScenarioConfig cfg = load_config(opt);
  mdp::ScenarioModel model = cfg.to_model();
  mdp::StateSpace states(model.spec);
  mdp::ActionSpace actions(states, model);
  if (opt.self_check) run_self_check(cfg, mdp::PlannerModel(model));
  std::printf("ok: %s states=%d actions=%d budget=%d\n", cfg.name.c_str(), states.size(),
              actions.size(), model.total_budget());
  return 0;
}

int cmd_plan(const Options& opt) {
  config::ScenarioConfig cfg = load_config(opt);
  const double gamma = opt.gamma.value_or(cfg.gamma);
  if (!(gamma >= 0.0 && gamma < 1.0)) throw config::ConfigError("gamma", "must lie in [0, 1)");
  mdp::PlannerModel model = build_model(cfg, opt);
  mdp::Policy policy = mdp::value_iteration(model, gamma, opt.threshold);
  const std::string scheme = gamma == 0.0 ? "myopic" : "mdp";
  const std::string path = out_file(cfg, scheme + ".policy.json");
  io::write_policy(path, policy, scheme);
  std::printf("states=%d actions=%d sweeps=%zu\n", model.states().size(), model.actions().size(),
              policy.sweep_deltas.size());
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

rl::Trainer make_trainer(const config::ScenarioConfig& cfg, const mdp::PlannerModel& model,
                         const Options& opt, std::int64_t& target) {
  if (!opt.resume_path.empty()) {
    rl::TrainerCheckpoint checkpoint = io::read_checkpoint(opt.resume_path);
    target = opt.episodes.value_or(cfg.algorithm_params(opt.algo).episodes);
    if (checkpoint.episode > target)
      throw config::ConfigError("episodes", "checkpoint is already past the target");
    return {model, checkpoint};
  }
  rl::TrainingConfig tc = cfg.training_config(opt.algo);
  target = opt.episodes.value_or(cfg.algorithm_params(opt.algo).episodes);
  if (opt.episodes && *opt.episodes != cfg.algorithm_params(opt.algo).episodes)
    tc.schedule.decay = config::decay_for_episodes(cfg, *opt.episodes);
  if (opt.decay) tc.schedule.decay = *opt.decay;
  if (opt.update_period) {
    if (opt.algo != "qlearn-ve")
      throw config::ConfigError("update_period", "only meaningful for qlearn-ve");
    tc.virtual_period = *opt.update_period;
  }
  tc.curve_stride = opt.curve_stride;
  tc.validate();
  return {model, tc};
}

int cmd_train(const Options& opt) {
  config::ScenarioConfig cfg = load_config(opt);
  mdp::PlannerModel model = build_model(cfg, opt);
  std::int64_t target = 0;
  rl::Trainer trainer = make_trainer(cfg, model, opt, target);
  trainer.run(target - trainer.episode());

  mdp::Policy policy = trainer.greedy_policy();
  const std::string policy_path = out_file(cfg, opt.algo + ".policy.json");
  io::write_policy(policy_path, policy, opt.algo);
  const std::string checkpoint_path = out_file(cfg, opt.algo + ".checkpoint.json");
  io::write_checkpoint(checkpoint_path, trainer.checkpoint());

  const std::string curve_path = out_file(cfg, opt.algo + ".curve.csv");
  io::CsvWriter curve(curve_path, io::curve_schema());
  const auto stride = static_cast<size_t>(trainer.config().curve_stride);
  const auto& points = trainer.reward_curve();
  for (size_t i = 0; i < points.size(); ++i)
    curve.row({static_cast<std::int64_t>((i + 1) * stride), points[i]});
  curve.close();

  std::printf("trained %s episodes=%lld temperature=%.6f\n", opt.algo.c_str(),
              static_cast<long long>(trainer.episode()), trainer.temperature());
  std::printf("wrote %s\n", policy_path.c_str());
  std::printf("wrote %s\n", checkpoint_path.c_str());
  std::printf("wrote %s\n", curve_path.c_str());
  return 0;
}

int cmd_simulate(const Options& opt) {
  config::ScenarioConfig cfg = load_config(opt);
  mdp::PlannerModel model(cfg.to_model());
  if (opt.self_check) run_self_check(cfg, model);

  std::string label;
  std::unique_ptr<sim::Scheduler> scheduler;
  if (!opt.policy_path.empty()) {
    io::PolicyFile file = io::read_policy(opt.policy_path);
    if (file.policy.fingerprint != model.fingerprint())
      throw config::ConfigError("policy",
                                "'" + opt.policy_path + "' was planned for a different scenario");
    label = file.scheme;
    scheduler = std::make_unique<sim::PolicyScheduler>(model, file.policy);
  } else {
    label = opt.scheme.empty() ? cfg.scheme : opt.scheme;
    if (label == "randsched") {
      scheduler = std::make_unique<sim::RandomScheduler>(model);
    } else if (label == "mdp" || label == "myopic") {
      mdp::Policy policy = mdp::value_iteration(model, label == "myopic" ? 0.0 : cfg.gamma);
      scheduler = std::make_unique<sim::PolicyScheduler>(model, policy);
    } else {
      rl::TrainingConfig tc = cfg.training_config(label);
      rl::Trainer trainer(model, tc);
      trainer.run(cfg.algorithm_params(label).episodes);
      scheduler = std::make_unique<sim::PolicyScheduler>(model, trainer.greedy_policy());
    }
  }

  sim::ExperimentSummary summary =
      sim::run_experiment(model, *scheduler, cfg.runs, cfg.generations, cfg.seed);

  const std::string trace_path = out_file(cfg, label + ".trace.csv");
  io::write_trace_csv(trace_path, summary);
  const std::string summary_path = out_file(cfg, label + ".summary.csv");
  write_summary_csv(summary_path, cfg, label, summary);
  if (opt.svg) write_trace_svg(out_file(cfg, label + ".trace.svg"), cfg, label, summary);

  print_summary(label, summary);
  std::printf("wrote %s\n", trace_path.c_str());
  std::printf("wrote %s\n", summary_path.c_str());
  return 0;
}

// One sweep measurement; `work` is self-contained so cells can run on
// worker threads while rows are emitted afterward in declaration order.
struct SweepCell {
  std::string scheme;
  double value = 0.0;
  int seed_index = 0;
  std::int64_t episodes = 0;
  std::function<sim::ExperimentSummary()> work;
  sim::ExperimentSummary result;
};

void run_cells(std::vector<SweepCell>& cells, int jobs) {
  if (cells.empty()) return;
  jobs = std::clamp<int>(jobs, 1, static_cast<int>(cells.size()));
  if (jobs <= 1) {
    for (SweepCell& cell : cells) cell.result = cell.work();
    return;
  }
  std::atomic<size_t> cursor{0};
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j)
    pool.emplace_back([&] {
      for (size_t i; (i = cursor.fetch_add(1)) < cells.size();) cells[i].result = cells[i].work();
    });
  for (std::thread& t : pool) t.join();
}

int cmd_sweep(const Options& opt) {
  config::ScenarioConfig cfg = load_config(opt);
  if (opt.values.empty()) throw config::ConfigError("values", "at least one value required");

  auto simulate_policy = [cfg](const mdp::PlannerModel& model, const mdp::Policy& policy,
                               std::uint64_t seed) {
    sim::PolicyScheduler scheduler(model, policy);
    return sim::run_experiment(model, scheduler, cfg.runs, cfg.generations, seed);
  };

  std::vector<SweepCell> cells;
  std::vector<std::shared_ptr<mdp::PlannerModel>> models;  // keeps cell captures alive

  if (opt.axis == "episodes") {
    auto model = std::make_shared<mdp::PlannerModel>(cfg.to_model(), !opt.infinite_q);
    if (opt.self_check) run_self_check(cfg, *model);
    models.push_back(model);
    for (double value : opt.values) {
      const auto episodes = static_cast<std::int64_t>(value);
      if (episodes < 1 || static_cast<double>(episodes) != value)
        throw config::ConfigError("values", "episode counts must be positive integers");
      for (const std::string algo : {"qlearn", "qlearn-ve"}) {
        for (int s = 0; s < opt.seeds; ++s) {
          rl::TrainingConfig tc = cfg.training_config(algo);
          tc.schedule.decay = config::decay_for_episodes(cfg, episodes);
          tc.seed = cfg.seed + static_cast<std::uint64_t>(s);
          cells.push_back({algo, value, s, episodes, [model, tc, episodes, simulate_policy] {
                             rl::Trainer trainer(*model, tc);
                             trainer.run(episodes);
                             return simulate_policy(*model, trainer.greedy_policy(), tc.seed);
                           }});
        }
      }
    }
  } else if (opt.axis == "update-period") {
    auto model = std::make_shared<mdp::PlannerModel>(cfg.to_model(), !opt.infinite_q);
    if (opt.self_check) run_self_check(cfg, *model);
    models.push_back(model);
    const std::int64_t episodes = cfg.algorithm_params("qlearn-ve").episodes;
    // Period 0 rows carry the no-batching baseline at the same budget.
    std::vector<double> periods = {0.0};
    periods.insert(periods.end(), opt.values.begin(), opt.values.end());
    for (double value : periods) {
      const int period = static_cast<int>(value);
      if (period < 0 || static_cast<double>(period) != value)
        throw config::ConfigError("values", "update periods must be nonnegative integers");
      for (int s = 0; s < opt.seeds; ++s) {
        rl::TrainingConfig tc = cfg.training_config("qlearn-ve");
        tc.virtual_period = period;
        tc.seed = cfg.seed + static_cast<std::uint64_t>(s);
        cells.push_back({period == 0 ? "qlearn" : "qlearn-ve", value, s, episodes,
                         [model, tc, episodes, simulate_policy] {
                           rl::Trainer trainer(*model, tc);
                           trainer.run(episodes);
                           return simulate_policy(*model, trainer.greedy_policy(), tc.seed);
                         }});
      }
    }
  } else {  // loss
    for (double value : opt.values) {
      if (!(value >= 0.0 && value < 1.0))
        throw config::ConfigError("values", "loss rates must lie in [0, 1)");
      config::ScenarioConfig local = cfg;
      for (config::LinkConfig& link : local.links) link.loss = value;
      auto model = std::make_shared<mdp::PlannerModel>(local.to_model(), !opt.infinite_q);
      if (opt.self_check) run_self_check(local, *model);
      models.push_back(model);
      const mdp::Policy policy = mdp::value_iteration(*model, cfg.gamma);
      for (int s = 0; s < opt.seeds; ++s) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
        cells.push_back({"mdp", value, s, 0, [model, policy, seed, simulate_policy] {
                           return simulate_policy(*model, policy, seed);
                         }});
        cells.push_back({"randsched", value, s, 0, [model, seed, cfg] {
                           sim::RandomScheduler random(*model);
                           return sim::run_experiment(*model, random, cfg.runs, cfg.generations,
                                                      seed);
                         }});
      }
    }
  }

  run_cells(cells, opt.jobs);

  const std::string path = out_file(cfg, "sweep-" + opt.axis + ".csv");
  io::CsvWriter csv(path, io::sweep_schema());
  std::vector<io::CurveSeries> curves;
  auto curve_of = [&](const std::string& scheme) -> io::CurveSeries& {
    for (auto& c : curves)
      if (c.label == scheme) return c;
    curves.push_back({scheme, {}, {}});
    return curves.back();
  };
  for (const SweepCell& cell : cells) {
    csv.row({opt.axis, cell.value, cell.scheme, std::int64_t{cell.seed_index}, cell.episodes,
             cell.result.delta_bar, cell.result.fluctuation});
    io::CurveSeries& curve = curve_of(cell.scheme);
    curve.x.push_back(cell.value);
    curve.y.push_back(cell.result.delta_bar);
    std::printf("%s %s=%g seed=%d delta_bar=%.4f\n", cell.scheme.c_str(), opt.axis.c_str(),
                cell.value, cell.seed_index, cell.result.delta_bar);
  }

  csv.close();
  if (opt.svg) {
    const std::string svg_path = out_file(cfg, "sweep-" + opt.axis + ".svg");
    io::write_curve_svg(svg_path, cfg.name + " " + opt.axis + " sweep", opt.axis,
                        "distortion reduction (dB)", curves);
    std::printf("wrote %s\n", svg_path.c_str());
  }
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"Planning, learning, and simulation of deadline-constrained layered delivery"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", opt.config_path, "scenario file")->required();
    cmd->add_option("--out", opt.out_dir, "output directory (default: scenario output_dir)");
    cmd->add_option("--seed", opt.seed, "override the scenario seed");
    cmd->add_flag("--self-check", opt.self_check, "run internal oracles first (exit 3 on failure)");
  };

  CLI::App* validate = app.add_subcommand("validate-config", "parse and validate a scenario file");
  add_common(validate);

  CLI::App* plan = app.add_subcommand("plan", "exact planning by value iteration");
  add_common(plan);
  plan->add_option("--gamma", opt.gamma, "discount override (0 = myopic)");
  plan->add_option("--threshold", opt.threshold, "sup-norm stopping threshold");
  plan->add_flag("--infinite-q", opt.infinite_q, "plan in the infinite-field-size limit");

  CLI::App* train = app.add_subcommand("train", "fit a policy by temporal-difference learning");
  add_common(train);
  train->add_option("--algo", opt.algo, "qlearn or qlearn-ve")
      ->check(CLI::IsMember({"qlearn", "qlearn-ve"}));
  train->add_option("--episodes", opt.episodes, "episode budget (decay re-interpolated)");
  train->add_option("--decay", opt.decay, "explicit temperature decay");
  train->add_option("--update-period", opt.update_period, "batch period override (qlearn-ve)");
  train->add_option("--curve-stride", opt.curve_stride, "episodes per learning-curve point");
  train->add_option("--resume", opt.resume_path, "continue from a checkpoint file");
  train->add_flag("--infinite-q", opt.infinite_q, "train against the infinite-field-size limit");

  CLI::App* simulate = app.add_subcommand("simulate", "packet-level evaluation of a policy");
  add_common(simulate);
  simulate->add_option("--policy", opt.policy_path, "policy artifact to execute");
  simulate->add_option("--scheme", opt.scheme, "mdp, myopic, qlearn, qlearn-ve, or randsched")
      ->check(CLI::IsMember({"mdp", "myopic", "qlearn", "qlearn-ve", "randsched"}));
  simulate->add_option("--runs", opt.runs, "independent runs");
  simulate->add_option("--generations", opt.generations, "generations per run");
  simulate->add_flag("--svg", opt.svg, "also draw the per-generation curve");

  CLI::App* sweep = app.add_subcommand("sweep", "grid evaluation along one axis");
  add_common(sweep);
  sweep->add_option("--axis", opt.axis, "episodes, update-period, or loss")
      ->required()
      ->check(CLI::IsMember({"episodes", "update-period", "loss"}));
  sweep->add_option("--values", opt.values, "axis values")->required()->expected(-1);
  sweep->add_option("--seeds", opt.seeds, "seeds per cell")->check(CLI::PositiveNumber);
  sweep->add_option("--jobs", opt.jobs, "worker threads across cells")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--runs", opt.runs, "independent runs per cell");
  sweep->add_option("--generations", opt.generations, "generations per run");
  sweep->add_flag("--svg", opt.svg, "also draw delta_bar against the axis");
  sweep->add_flag("--infinite-q", opt.infinite_q, "plan in the infinite-field-size limit");

  try {
    app.parse(argc, argv);
    if (validate->parsed()) return cmd_validate(opt);
    if (plan->parsed()) return cmd_plan(opt);
    if (train->parsed()) return cmd_train(opt);
    if (simulate->parsed()) return cmd_simulate(opt);
    if (sweep->parsed()) return cmd_sweep(opt);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const SelfCheckError& e) {
    std::fprintf(stderr, "self-check failed: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
