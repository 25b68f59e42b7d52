#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "prlc/mdp.hpp"
#include "prlc/rl.hpp"

// Scenario files: one strict JSON document per experiment describing the
// data layout, the links, and the learning hyperparameters.  Parsing
// rejects unknown keys and reports every failure with the dotted path of
// the offending field.
namespace prlc::config {

struct ConfigError : std::runtime_error {
  std::string path;

  ConfigError(std::string field_path, const std::string& message)
      : std::runtime_error(field_path + ": " + message), path(std::move(field_path)) {}
};

struct LinkConfig {
  double rate = 1.0;
  double loss = 0.0;
  double delay = 0.0;
};

// Episode budget and temperature decay of one learning algorithm; the
// batch update period only applies to the virtual-experience variant.
struct AlgorithmParams {
  std::int64_t episodes = 0;
  double decay = 1.0;
  int update_period = 0;
};

struct TrainingSection {
  double theta_max = 75.0;
  double theta_min = 0.5;
  std::optional<AlgorithmParams> qlearn;
  std::optional<AlgorithmParams> qlearn_ve;
};

// The set of scheme labels commands accept.
bool known_scheme(const std::string& scheme);

struct ScenarioConfig {
  int schema_version = 1;
  std::string name;

  std::vector<int> alpha;      // packets per layer
  std::vector<double> delta;   // distortion reduction per layer
  int playback_delay = 0;      // slots until the first deadline
  int spacing = 0;             // slots between consecutive deadlines
  int decision_period = 0;     // slots between decisions

  std::vector<LinkConfig> links;
  double gamma = 0.9;
  unsigned field_order = 256;

  std::string scheme = "mdp";  // default scheme for simulate
  TrainingSection training;

  int runs = 100;
  int generations = 100;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  // Mirrors the planner's invariants; throws ConfigError with the field
  // path on the first violation.
  void validate() const;

  mdp::ScenarioModel to_model() const;

  // Hyperparameters of one algorithm ("qlearn" or "qlearn-ve"); throws
  // ConfigError when the corresponding section is missing.
  rl::TrainingConfig training_config(const std::string& algorithm) const;
  const AlgorithmParams& algorithm_params(const std::string& algorithm) const;
};

// Temperature decay for an arbitrary episode budget: log(1 - decay) is
// interpolated linearly in log(episodes) through the scenario's anchor
// tuples (both algorithm sections), returning anchor values verbatim at
// their own budgets.
double decay_for_episodes(const ScenarioConfig& config, std::int64_t episodes);

// Strict parse: unknown keys, wrong types, and invariant violations all
// raise ConfigError.  The returned config is already validated.
ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::string& path);

// Canonical JSON rendering (stable key order, round-trips through
// parse_scenario).
std::string to_json(const ScenarioConfig& config);

}  // namespace prlc::config
