#include "prlc/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include "json.hpp"
#include "prlc/galois.hpp"

namespace prlc::config {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ConfigError(path, message);
}

std::string joined(std::initializer_list<const char*> keys) {
  std::string out;
  for (const char* k : keys) {
    if (!out.empty()) out += ", ";
    out += k;
  }
  return out;
}

const json& object_at(const json& node, const std::string& path,
                      std::initializer_list<const char*> allowed) {
  if (!node.is_object()) fail(path, "expected an object");
  for (const auto& item : node.items()) {
    bool known = false;
    for (const char* k : allowed) known = known || item.key() == k;
    if (!known) fail(path + "." + item.key(), "unknown key (allowed: " + joined(allowed) + ")");
  }
  return node;
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& require(const json& obj, const std::string& path, const char* key) {
  const json* v = find(obj, key);
  if (v == nullptr) fail(path + "." + key, "missing required key");
  return *v;
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  auto wide = v.get<std::int64_t>();
  if (wide < INT32_MIN || wide > INT32_MAX) fail(path, "integer out of range");
  return static_cast<int>(wide);
}

std::int64_t as_int64(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<std::int64_t>();
}

std::uint64_t as_uint64(const json& v, const std::string& path) {
  if (!v.is_number_unsigned()) fail(path, "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

std::vector<int> as_int_array(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array");
  std::vector<int> out;
  for (size_t i = 0; i < v.size(); ++i)
    out.push_back(as_int(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<double> as_double_array(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array");
  std::vector<double> out;
  for (size_t i = 0; i < v.size(); ++i)
    out.push_back(as_double(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

AlgorithmParams parse_algorithm(const json& node, const std::string& path, bool wants_period) {
  AlgorithmParams params;
  if (wants_period)
    object_at(node, path, {"episodes", "decay", "update_period"});
  else
    object_at(node, path, {"episodes", "decay"});
  params.episodes = as_int64(require(node, path, "episodes"), path + ".episodes");
  params.decay = as_double(require(node, path, "decay"), path + ".decay");
  if (wants_period)
    params.update_period = as_int(require(node, path, "update_period"), path + ".update_period");
  return params;
}

}  // namespace

bool known_scheme(const std::string& scheme) {
  return scheme == "mdp" || scheme == "myopic" || scheme == "qlearn" || scheme == "qlearn-ve" ||
         scheme == "randsched";
}

void ScenarioConfig::validate() const {
  if (schema_version != 1)
    fail("schema_version", "unsupported version " + std::to_string(schema_version) + " (expected 1)");
  if (name.empty()) fail("name", "must not be empty");
  for (char c : name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-'))
      fail("name", "only letters, digits, '.', '_' and '-' are allowed");

  if (alpha.empty()) fail("generation.alpha", "at least one layer required");
  for (size_t l = 0; l < alpha.size(); ++l)
    if (alpha[l] <= 0) fail("generation.alpha[" + std::to_string(l) + "]", "must be positive");
  if (delta.size() != alpha.size())
    fail("generation.delta", "needs one entry per layer");
  for (size_t l = 0; l < delta.size(); ++l)
    if (!(delta[l] >= 0.0) || !std::isfinite(delta[l]))
      fail("generation.delta[" + std::to_string(l) + "]", "must be a finite nonnegative number");
  if (playback_delay < 0) fail("generation.playback_delay", "must be nonnegative");
  if (spacing <= 0) fail("generation.spacing", "must be positive");
  if (decision_period <= 0) fail("decision_period", "must be positive");
  if (decision_period != spacing)
    fail("decision_period", "must equal generation.spacing (one decision per deadline)");

  if (links.empty()) fail("links", "at least one link required");
  for (size_t k = 0; k < links.size(); ++k) {
    const std::string path = "links[" + std::to_string(k) + "]";
    const LinkConfig& link = links[k];
    if (!(link.rate > 0.0) || !std::isfinite(link.rate)) fail(path + ".rate", "must be positive");
    if (!(link.loss >= 0.0 && link.loss < 1.0)) fail(path + ".loss", "must lie in [0, 1)");
    if (!(link.delay >= 0.0) || !std::isfinite(link.delay))
      fail(path + ".delay", "must be a finite nonnegative number");
    const double budget = link.rate * decision_period;
    if (std::abs(budget - std::llround(budget)) > 1e-6)
      fail(path + ".rate", "rate times decision_period must be an integral packet budget");
  }

  if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma", "must lie in [0, 1)");
  if (field_order < 2) fail("field_order", "must be at least 2");
  try {
    gf::Field probe(field_order);
    (void)probe;
  } catch (const std::exception& e) {
    fail("field_order", e.what());
  }
  if (!known_scheme(scheme))
    fail("scheme", "unknown scheme (allowed: mdp, myopic, qlearn, qlearn-ve, randsched)");

  if (!(training.theta_min > 0.0) || !std::isfinite(training.theta_min))
    fail("training.theta_min", "must be positive");
  if (!(training.theta_max >= training.theta_min) || !std::isfinite(training.theta_max))
    fail("training.theta_max", "must be at least theta_min");
  auto check_algorithm = [](const AlgorithmParams& p, const std::string& path, bool wants_period) {
    if (p.episodes < 1) fail(path + ".episodes", "must be positive");
    if (!(p.decay > 0.0 && p.decay <= 1.0)) fail(path + ".decay", "must lie in (0, 1]");
    if (wants_period && p.update_period < 1) fail(path + ".update_period", "must be positive");
  };
  if (training.qlearn) check_algorithm(*training.qlearn, "training.qlearn", false);
  if (training.qlearn_ve) check_algorithm(*training.qlearn_ve, "training.qlearn_ve", true);

  if (runs < 1) fail("runs", "must be positive");
  if (generations < 1) fail("generations", "must be positive");
  if (output_dir.empty()) fail("output_dir", "must not be empty");
}

mdp::ScenarioModel ScenarioConfig::to_model() const {
  validate();
  mdp::ScenarioModel model;
  model.spec = GenerationSpec::make(alpha, delta, playback_delay, spacing);
  for (const LinkConfig& link : links) model.servers.push_back({link.rate, link.loss, link.delay});
  model.period = decision_period;
  model.discount = gamma;
  model.field_order = field_order;
  model.validate();
  return model;
}

const AlgorithmParams& ScenarioConfig::algorithm_params(const std::string& algorithm) const {
  if (algorithm == "qlearn") {
    if (!training.qlearn) fail("training.qlearn", "section required for this command");
    return *training.qlearn;
  }
  if (algorithm == "qlearn-ve") {
    if (!training.qlearn_ve) fail("training.qlearn_ve", "section required for this command");
    return *training.qlearn_ve;
  }
  fail("algorithm", "unknown algorithm '" + algorithm + "' (allowed: qlearn, qlearn-ve)");
}

rl::TrainingConfig ScenarioConfig::training_config(const std::string& algorithm) const {
  const AlgorithmParams& params = algorithm_params(algorithm);
  rl::TrainingConfig out;
  out.schedule.theta_max = training.theta_max;
  out.schedule.theta_min = training.theta_min;
  out.schedule.decay = params.decay;
  out.gamma = gamma;
  out.seed = seed;
  out.virtual_period = algorithm == "qlearn-ve" ? params.update_period : 0;
  out.validate();
  return out;
}

double decay_for_episodes(const ScenarioConfig& config, std::int64_t episodes) {
  if (episodes < 1) fail("episodes", "must be positive");
  std::vector<std::pair<std::int64_t, double>> anchors;
  if (config.training.qlearn)
    anchors.emplace_back(config.training.qlearn->episodes, config.training.qlearn->decay);
  if (config.training.qlearn_ve)
    anchors.emplace_back(config.training.qlearn_ve->episodes, config.training.qlearn_ve->decay);
  if (anchors.empty()) fail("training", "no algorithm sections to anchor the decay");
  for (const auto& [n, decay] : anchors)
    if (n == episodes) return decay;
  if (anchors.size() == 1 || anchors[0].first == anchors[1].first ||
      anchors[0].second == anchors[1].second)
    return anchors[0].second;

  // Straight line through the anchors in (log episodes, log(1 - decay)).
  const double x0 = std::log(static_cast<double>(anchors[0].first));
  const double x1 = std::log(static_cast<double>(anchors[1].first));
  const double y0 = std::log1p(-anchors[0].second);
  const double y1 = std::log1p(-anchors[1].second);
  const double x = std::log(static_cast<double>(episodes));
  const double y = y0 + (y1 - y0) * (x - x0) / (x1 - x0);
  const double decay = -std::expm1(y);
  if (!(decay > 0.0 && decay < 1.0)) fail("episodes", "decay interpolation left (0, 1)");
  return decay;
}

ScenarioConfig parse_scenario(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail("$", e.what());
  }
  object_at(root, "$",
            {"schema_version", "name", "generation", "links", "decision_period", "gamma",
             "field_order", "scheme", "training", "runs", "generations", "seed", "output_dir"});

  ScenarioConfig cfg;
  cfg.schema_version = as_int(require(root, "$", "schema_version"), "schema_version");
  cfg.name = as_string(require(root, "$", "name"), "name");

  const json& gen = require(root, "$", "generation");
  object_at(gen, "generation", {"alpha", "delta", "playback_delay", "spacing"});
  cfg.alpha = as_int_array(require(gen, "generation", "alpha"), "generation.alpha");
  cfg.delta = as_double_array(require(gen, "generation", "delta"), "generation.delta");
  cfg.playback_delay =
      as_int(require(gen, "generation", "playback_delay"), "generation.playback_delay");
  cfg.spacing = as_int(require(gen, "generation", "spacing"), "generation.spacing");

  const json& links = require(root, "$", "links");
  if (!links.is_array()) fail("links", "expected an array");
  for (size_t k = 0; k < links.size(); ++k) {
    const std::string path = "links[" + std::to_string(k) + "]";
    object_at(links[k], path, {"rate", "loss", "delay"});
    LinkConfig link;
    link.rate = as_double(require(links[k], path, "rate"), path + ".rate");
    link.loss = as_double(require(links[k], path, "loss"), path + ".loss");
    if (const json* delay = find(links[k], "delay")) link.delay = as_double(*delay, path + ".delay");
    cfg.links.push_back(link);
  }

  cfg.decision_period = as_int(require(root, "$", "decision_period"), "decision_period");
  if (const json* v = find(root, "gamma")) cfg.gamma = as_double(*v, "gamma");
  if (const json* v = find(root, "field_order")) {
    auto order = as_uint64(*v, "field_order");
    if (order > 1u << 30) fail("field_order", "integer out of range");
    cfg.field_order = static_cast<unsigned>(order);
  }
  if (const json* v = find(root, "scheme")) cfg.scheme = as_string(*v, "scheme");

  if (const json* tr = find(root, "training")) {
    object_at(*tr, "training", {"theta_max", "theta_min", "qlearn", "qlearn_ve"});
    if (const json* v = find(*tr, "theta_max"))
      cfg.training.theta_max = as_double(*v, "training.theta_max");
    if (const json* v = find(*tr, "theta_min"))
      cfg.training.theta_min = as_double(*v, "training.theta_min");
    if (const json* v = find(*tr, "qlearn"))
      cfg.training.qlearn = parse_algorithm(*v, "training.qlearn", false);
    if (const json* v = find(*tr, "qlearn_ve"))
      cfg.training.qlearn_ve = parse_algorithm(*v, "training.qlearn_ve", true);
  }

  if (const json* v = find(root, "runs")) cfg.runs = as_int(*v, "runs");
  if (const json* v = find(root, "generations")) cfg.generations = as_int(*v, "generations");
  if (const json* v = find(root, "seed")) cfg.seed = as_uint64(*v, "seed");
  if (const json* v = find(root, "output_dir")) cfg.output_dir = as_string(*v, "output_dir");

  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("$", "cannot open scenario file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str());
}

std::string to_json(const ScenarioConfig& config) {
  ordered_json root;
  root["schema_version"] = config.schema_version;
  root["name"] = config.name;
  root["generation"] = {{"alpha", config.alpha},
                        {"delta", config.delta},
                        {"playback_delay", config.playback_delay},
                        {"spacing", config.spacing}};
  ordered_json links = ordered_json::array();
  for (const LinkConfig& link : config.links)
    links.push_back({{"rate", link.rate}, {"loss", link.loss}, {"delay", link.delay}});
  root["links"] = std::move(links);
  root["decision_period"] = config.decision_period;
  root["gamma"] = config.gamma;
  root["field_order"] = config.field_order;
  root["scheme"] = config.scheme;
  ordered_json training;
  training["theta_max"] = config.training.theta_max;
  training["theta_min"] = config.training.theta_min;
  auto render = [](const AlgorithmParams& p, bool wants_period) {
    ordered_json node{{"episodes", p.episodes}, {"decay", p.decay}};
    if (wants_period) node["update_period"] = p.update_period;
    return node;
  };
  if (config.training.qlearn) training["qlearn"] = render(*config.training.qlearn, false);
  if (config.training.qlearn_ve) training["qlearn_ve"] = render(*config.training.qlearn_ve, true);
  root["training"] = std::move(training);
  root["runs"] = config.runs;
  root["generations"] = config.generations;
  root["seed"] = config.seed;
  root["output_dir"] = config.output_dir;
  return root.dump(2) + "\n";
}

}  // namespace prlc::config
