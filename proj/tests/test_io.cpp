#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "prlc/io.hpp"

namespace {

using namespace prlc;

std::string temp_path(const std::string& leaf) {
  return (std::filesystem::temp_directory_path() / ("prlc_io_test_" + leaf)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

const mdp::PlannerModel& two_layer_model() {
  static const mdp::PlannerModel model = [] {
    mdp::ScenarioModel m;
    m.servers = {{1.0, 0.05, 0.0}};
    m.spec = GenerationSpec::make({3, 2}, {11.0, 9.0}, 10, 5);
    m.period = 5;
    return mdp::PlannerModel(std::move(m));
  }();
  return model;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("policy artifacts round-trip exactly") {
  mdp::Policy policy;
  policy.action_of = {5, 3, 0, 55};
  policy.value = {0.1, 1.0 / 3.0, 1e-300, 123456789.123456789};
  policy.sweep_deltas = {20.0, 1.25e-9};
  policy.fingerprint = 0xdeadbeefcafef00dull;

  const std::string path = temp_path("policy.json");
  io::write_policy(path, policy, "qlearn-ve");
  io::PolicyFile loaded = io::read_policy(path);

  CHECK(loaded.scheme == "qlearn-ve");
  CHECK(loaded.policy.fingerprint == policy.fingerprint);
  CHECK(loaded.policy.action_of == policy.action_of);
  CHECK(loaded.policy.value == policy.value);
  CHECK(loaded.policy.sweep_deltas == policy.sweep_deltas);

  CHECK_THROWS_AS(io::read_checkpoint(path), std::runtime_error);
  CHECK_THROWS_AS(io::read_policy(temp_path("missing.json")), std::runtime_error);

  const std::string broken = temp_path("broken.json");
  std::ofstream(broken) << "{ \"kind\": \"policy\", ";
  CHECK_THROWS_AS(io::read_policy(broken), std::runtime_error);
}

TEST_CASE("checkpoint artifacts resume byte-identically through disk") {
  rl::TrainingConfig cfg;
  cfg.schedule.decay = 0.9995;
  cfg.gamma = 0.9;
  cfg.seed = 7;
  cfg.virtual_period = 10;
  cfg.curve_stride = 500;

  rl::Trainer whole(two_layer_model(), cfg);
  whole.run(2500);

  const std::string path = temp_path("checkpoint.json");
  io::write_checkpoint(path, whole.checkpoint());
  rl::TrainerCheckpoint loaded = io::read_checkpoint(path);
  rl::Trainer resumed(two_layer_model(), loaded);

  whole.run(2500);
  resumed.run(2500);

  CHECK(resumed.episode() == whole.episode());
  CHECK(resumed.temperature() == whole.temperature());
  CHECK(resumed.state() == whole.state());
  CHECK(resumed.table().value == whole.table().value);
  CHECK(resumed.table().visits == whole.table().visits);
  CHECK(resumed.reward_curve() == whole.reward_curve());
  CHECK(resumed.checkpoint().policy_rng == whole.checkpoint().policy_rng);
  CHECK(resumed.checkpoint().env_rng == whole.checkpoint().env_rng);
}

TEST_CASE("csv writer enforces its schema") {
  CHECK(io::csv_header(io::summary_schema()) ==
        "scenario,scheme,runs,generations,delta_bar,delta_bar_se,fluctuation,late_packets");
  CHECK(io::csv_header(io::trace_schema()) == "generation,mean_delta,stderr_delta");
  CHECK(io::csv_header(io::sweep_schema()) ==
        "axis,value,scheme,seed,episodes,delta_bar,fluctuation");
  CHECK(io::csv_header(io::curve_schema()) == "episode,mean_reward");

  const std::string path = temp_path("summary.csv");
  io::CsvWriter csv(path, io::summary_schema());
  const std::vector<io::CsvValue> good = {std::string("demo"), std::string("mdp"),
                                          std::int64_t{100},   std::int64_t{100},
                                          18.55,               0.03,
                                          4.07,                std::int64_t{0}};
  csv.row(good);

  std::vector<io::CsvValue> wrong_arity(good.begin(), good.end() - 1);
  CHECK_THROWS_AS(csv.row(wrong_arity), std::invalid_argument);

  std::vector<io::CsvValue> wrong_type = good;
  wrong_type[2] = 100.0;
  CHECK_THROWS_AS(csv.row(wrong_type), std::invalid_argument);

  std::vector<io::CsvValue> embedded_comma = good;
  embedded_comma[0] = std::string("a,b");
  CHECK_THROWS_AS(csv.row(embedded_comma), std::invalid_argument);

  std::vector<io::CsvValue> non_finite = good;
  non_finite[4] = std::nan("");
  CHECK_THROWS_AS(csv.row(non_finite), std::runtime_error);

  csv.close();
  CHECK(io::validate_csv_file(path, io::summary_schema()) == 1);
  CHECK_THROWS_AS(csv.row(good), std::logic_error);
}

TEST_CASE("csv validator rejects drifted documents") {
  auto reject = [](const std::string& text, const io::CsvSchema& schema) {
    std::istringstream in(text);
    CHECK_THROWS_AS(io::validate_csv(in, schema), std::runtime_error);
  };

  std::istringstream ok("episode,mean_reward\n1000,17.5\n2000,18\n");
  CHECK(io::validate_csv(ok, io::curve_schema()) == 2);

  reject("", io::curve_schema());
  reject("episode,reward\n", io::curve_schema());
  reject("episode,mean_reward\n1000\n", io::curve_schema());
  reject("episode,mean_reward\n1000,abc\n", io::curve_schema());
  reject("episode,mean_reward\n10.5,1.0\n", io::curve_schema());
  reject("episode,mean_reward\n1000,1.0,extra\n", io::curve_schema());
}

TEST_CASE("trace csv carries the per-generation curve") {
  sim::ExperimentSummary summary;
  summary.generation_mean = {1.5, 18.0, 20.0};
  summary.generation_se = {0.1, 0.25, 0.0};

  const std::string path = temp_path("trace.csv");
  io::write_trace_csv(path, summary);
  CHECK(io::validate_csv_file(path, io::trace_schema()) == 3);
  CHECK(slurp(path) ==
        "generation,mean_delta,stderr_delta\n0,1.5,0.1\n1,18,0.25\n2,20,0\n");
}

TEST_CASE("csv doubles survive a write-read cycle exactly") {
  const std::vector<double> values = {0.1 + 0.2, 3.141592653589793, 1e-17, 4.9e-324,
                                      123456.78901234567};
  const std::string path = temp_path("doubles.csv");
  {
    io::CsvWriter csv(path, io::curve_schema());
    for (size_t i = 0; i < values.size(); ++i)
      csv.row({static_cast<std::int64_t>(i), values[i]});
  }
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  for (double expected : values) {
    REQUIRE(std::getline(in, line));
    const std::string cell = line.substr(line.find(',') + 1);
    CHECK(std::strtod(cell.c_str(), nullptr) == expected);
  }
}

TEST_CASE("curve drawings render every series") {
  io::CurveSeries a{"planned", {0, 1, 2, 3}, {10, 18, 18.5, 18.6}};
  io::CurveSeries b{"random", {0, 1, 2, 3}, {9, 11, 11.5, 11.4}};
  const std::string path = temp_path("curves.svg");
  io::write_curve_svg(path, "demo", "generation", "quality", {a, b});

  const std::string svg = slurp(path);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("planned") != std::string::npos);
  CHECK(svg.find("random") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);

  io::CurveSeries bad{"bad", {0, 1}, {1}};
  CHECK_THROWS_AS(io::write_curve_svg(path, "demo", "x", "y", {bad}), std::invalid_argument);
}

}  // TEST_SUITE
