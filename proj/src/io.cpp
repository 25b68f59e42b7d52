#include "prlc/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace prlc::io {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string hex64(std::uint64_t x) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(x));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s, const std::string& what) {
  if (s.size() != 18 || s.rfind("0x", 0) != 0)
    throw std::runtime_error(what + ": malformed fingerprint '" + s + "'");
  return std::stoull(s.substr(2), nullptr, 16);
}

// Shortest decimal that parses back to the same double; integral values
// render without an exponent.
std::string format_double(double x) {
  if (!std::isfinite(x)) throw std::runtime_error("csv: non-finite number");
  if (std::floor(x) == x && std::abs(x) < 9e15)
    return std::to_string(static_cast<long long>(x));
  char buf[32];
  for (int digits = 1; digits <= 17; ++digits) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

json load_json(const std::string& path, const char* expected_kind) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(std::string(expected_kind) + ": cannot open '" + path + "'");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string(expected_kind) + ": " + path + ": " + e.what());
  }
  if (!root.is_object() || root.value("kind", "") != expected_kind)
    throw std::runtime_error(path + ": not a " + expected_kind + " file");
  if (root.value("schema_version", 0) != 1)
    throw std::runtime_error(path + ": unsupported schema version");
  return root;
}

void store(const std::string& path, const ordered_json& root) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << root.dump(2) << '\n';
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

}  // namespace

void write_policy(const std::string& path, const mdp::Policy& policy, const std::string& scheme) {
  ordered_json root;
  root["schema_version"] = 1;
  root["kind"] = "policy";
  root["scheme"] = scheme;
  root["fingerprint"] = hex64(policy.fingerprint);
  root["action_of"] = policy.action_of;
  root["value"] = policy.value;
  root["sweep_deltas"] = policy.sweep_deltas;
  store(path, root);
}

PolicyFile read_policy(const std::string& path) {
  json root = load_json(path, "policy");
  PolicyFile out;
  out.scheme = root.at("scheme").get<std::string>();
  out.policy.fingerprint = parse_hex64(root.at("fingerprint").get<std::string>(), path);
  out.policy.action_of = root.at("action_of").get<std::vector<int>>();
  out.policy.value = root.at("value").get<std::vector<double>>();
  out.policy.sweep_deltas = root.at("sweep_deltas").get<std::vector<double>>();
  if (out.policy.value.size() != out.policy.action_of.size())
    throw std::runtime_error(path + ": table sizes disagree");
  return out;
}

void write_checkpoint(const std::string& path, const rl::TrainerCheckpoint& checkpoint) {
  ordered_json root;
  root["schema_version"] = 1;
  root["kind"] = "checkpoint";
  root["fingerprint"] = hex64(checkpoint.fingerprint);
  root["episode"] = checkpoint.episode;
  root["temperature"] = checkpoint.temperature;
  root["state"] = checkpoint.state;
  root["config"] = {{"theta_max", checkpoint.config.schedule.theta_max},
                    {"theta_min", checkpoint.config.schedule.theta_min},
                    {"decay", checkpoint.config.schedule.decay},
                    {"gamma", checkpoint.config.gamma},
                    {"seed", checkpoint.config.seed},
                    {"virtual_period", checkpoint.config.virtual_period},
                    {"realized_reward", checkpoint.config.realized_reward},
                    {"curve_stride", checkpoint.config.curve_stride}};
  root["value"] = checkpoint.value;
  root["visits"] = checkpoint.visits;
  root["reward_curve"] = checkpoint.reward_curve;
  root["curve_accum"] = checkpoint.curve_accum;
  root["policy_rng"] = checkpoint.policy_rng;
  root["env_rng"] = checkpoint.env_rng;
  store(path, root);
}

rl::TrainerCheckpoint read_checkpoint(const std::string& path) {
  json root = load_json(path, "checkpoint");
  rl::TrainerCheckpoint out;
  out.fingerprint = parse_hex64(root.at("fingerprint").get<std::string>(), path);
  out.episode = root.at("episode").get<std::int64_t>();
  out.temperature = root.at("temperature").get<double>();
  out.state = root.at("state").get<int>();
  const json& cfg = root.at("config");
  out.config.schedule.theta_max = cfg.at("theta_max").get<double>();
  out.config.schedule.theta_min = cfg.at("theta_min").get<double>();
  out.config.schedule.decay = cfg.at("decay").get<double>();
  out.config.gamma = cfg.at("gamma").get<double>();
  out.config.seed = cfg.at("seed").get<std::uint64_t>();
  out.config.virtual_period = cfg.at("virtual_period").get<int>();
  out.config.realized_reward = cfg.at("realized_reward").get<bool>();
  out.config.curve_stride = cfg.at("curve_stride").get<int>();
  out.value = root.at("value").get<std::vector<double>>();
  out.visits = root.at("visits").get<std::vector<std::int64_t>>();
  out.reward_curve = root.at("reward_curve").get<std::vector<double>>();
  out.curve_accum = root.at("curve_accum").get<double>();
  out.policy_rng = root.at("policy_rng").get<std::string>();
  out.env_rng = root.at("env_rng").get<std::string>();
  if (out.value.size() != out.visits.size())
    throw std::runtime_error(path + ": table sizes disagree");
  return out;
}

const CsvSchema& trace_schema() {
  static const CsvSchema schema{
      "trace", {{"generation", 'i'}, {"mean_delta", 'f'}, {"stderr_delta", 'f'}}};
  return schema;
}

const CsvSchema& summary_schema() {
  static const CsvSchema schema{"summary",
                                {{"scenario", 's'},
                                 {"scheme", 's'},
                                 {"runs", 'i'},
                                 {"generations", 'i'},
                                 {"delta_bar", 'f'},
                                 {"delta_bar_se", 'f'},
                                 {"fluctuation", 'f'},
                                 {"late_packets", 'i'}}};
  return schema;
}

const CsvSchema& sweep_schema() {
  static const CsvSchema schema{"sweep",
                                {{"axis", 's'},
                                 {"value", 'f'},
                                 {"scheme", 's'},
                                 {"seed", 'i'},
                                 {"episodes", 'i'},
                                 {"delta_bar", 'f'},
                                 {"fluctuation", 'f'}}};
  return schema;
}

const CsvSchema& curve_schema() {
  static const CsvSchema schema{"curve", {{"episode", 'i'}, {"mean_reward", 'f'}}};
  return schema;
}

std::string csv_header(const CsvSchema& schema) {
  std::string out;
  for (const CsvColumn& column : schema.columns) {
    if (!out.empty()) out += ',';
    out += column.name;
  }
  return out;
}

CsvWriter::CsvWriter(std::string path, const CsvSchema& schema)
    : path_(std::move(path)), schema_(&schema), uncaught_at_open_(std::uncaught_exceptions()) {
  body_ = csv_header(schema) + "\n";
}

CsvWriter::~CsvWriter() {
  if (!closed_ && std::uncaught_exceptions() == uncaught_at_open_) close();
}

void CsvWriter::row(const std::vector<CsvValue>& cells) {
  if (closed_) throw std::logic_error("csv: row after close");
  if (cells.size() != schema_->columns.size())
    throw std::invalid_argument("csv: expected " + std::to_string(schema_->columns.size()) +
                                " cells, got " + std::to_string(cells.size()));
  std::string line;
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) line += ',';
    const char type = schema_->columns[i].type;
    const CsvValue& cell = cells[i];
    if (type == 'i') {
      if (!std::holds_alternative<std::int64_t>(cell))
        throw std::invalid_argument("csv: column " + schema_->columns[i].name + " wants an integer");
      line += std::to_string(std::get<std::int64_t>(cell));
    } else if (type == 'f') {
      if (!std::holds_alternative<double>(cell))
        throw std::invalid_argument("csv: column " + schema_->columns[i].name + " wants a number");
      line += format_double(std::get<double>(cell));
    } else {
      if (!std::holds_alternative<std::string>(cell))
        throw std::invalid_argument("csv: column " + schema_->columns[i].name + " wants a string");
      const std::string& s = std::get<std::string>(cell);
      if (s.empty() || s.find_first_of(",\r\n") != std::string::npos)
        throw std::invalid_argument("csv: unrepresentable string cell");
      line += s;
    }
  }
  body_ += line + "\n";
}

void CsvWriter::close() {
  if (closed_) return;
  closed_ = true;
  std::ofstream out(path_);
  if (!out) throw std::runtime_error("cannot write '" + path_ + "'");
  out << body_;
  if (!out) throw std::runtime_error("short write to '" + path_ + "'");
}

size_t validate_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: empty document");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header(schema))
    throw std::runtime_error("csv: header '" + line + "' does not match schema " + schema.kind);
  size_t rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.eof()) break;
    ++rows;
    std::vector<std::string> cells;
    size_t start = 0;
    while (true) {
      size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() != schema.columns.size())
      throw std::runtime_error("csv: row " + std::to_string(rows) + " has " +
                               std::to_string(cells.size()) + " cells");
    for (size_t i = 0; i < cells.size(); ++i) {
      const char type = schema.columns[i].type;
      const std::string& cell = cells[i];
      if (cell.empty()) throw std::runtime_error("csv: row " + std::to_string(rows) + " empty cell");
      if (type == 'i' || type == 'f') {
        char* end = nullptr;
        if (type == 'i')
          std::strtoll(cell.c_str(), &end, 10);
        else
          std::strtod(cell.c_str(), &end);
        if (end != cell.c_str() + cell.size())
          throw std::runtime_error("csv: row " + std::to_string(rows) + " column " +
                                   schema.columns[i].name + " is not numeric: '" + cell + "'");
      }
    }
  }
  return rows;
}

size_t validate_csv_file(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return validate_csv(in, schema);
}

void write_trace_csv(const std::string& path, const sim::ExperimentSummary& summary) {
  CsvWriter csv(path, trace_schema());
  for (size_t n = 0; n < summary.generation_mean.size(); ++n)
    csv.row({static_cast<std::int64_t>(n), summary.generation_mean[n], summary.generation_se[n]});
  csv.close();
}

void write_curve_svg(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<CurveSeries>& series) {
  static const char* kPalette[] = {"#1f6f8b", "#c1403d", "#3f784c", "#8e5b9f", "#b8860b", "#444"};
  constexpr double kWidth = 720, kHeight = 440;
  constexpr double kLeft = 70, kRight = 30, kTop = 44, kBottom = 54;

  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  bool first = true;
  for (const CurveSeries& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("svg: series sizes disagree");
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        x_min = x_max = s.x[i];
        y_min = y_max = s.y[i];
        first = false;
      }
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min(y_min, s.y[i]);
      y_max = std::max(y_max, s.y[i]);
    }
  }
  if (x_max <= x_min) x_max = x_min + 1;
  if (y_max <= y_min) y_max = y_min + 1;
  const double y_pad = 0.06 * (y_max - y_min);
  y_min -= y_pad;
  y_max += y_pad;

  auto sx = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * (kWidth - kLeft - kRight); };
  auto sy = [&](double y) {
    return kHeight - kBottom - (y - y_min) / (y_max - y_min) * (kHeight - kTop - kBottom);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << kWidth << ' ' << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << title << "</text>\n";

  constexpr int kTicks = 5;
  for (int t = 0; t <= kTicks; ++t) {
    const double fx = x_min + (x_max - x_min) * t / kTicks;
    const double fy = y_min + (y_max - y_min) * t / kTicks;
    svg << "<line x1=\"" << sx(fx) << "\" y1=\"" << sy(y_min) << "\" x2=\"" << sx(fx) << "\" y2=\""
        << sy(y_max) << "\" stroke=\"#ddd\"/>\n";
    svg << "<line x1=\"" << sx(x_min) << "\" y1=\"" << sy(fy) << "\" x2=\"" << sx(x_max)
        << "\" y2=\"" << sy(fy) << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << sx(fx) << "\" y=\"" << kHeight - kBottom + 18
        << "\" text-anchor=\"middle\">" << format_double(std::round(fx * 100) / 100) << "</text>\n";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << sy(fy) + 4 << "\" text-anchor=\"end\">"
        << format_double(std::round(fy * 100) / 100) << "</text>\n";
  }
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight
      << "\" height=\"" << kHeight - kTop - kBottom << "\" fill=\"none\" stroke=\"#333\"/>\n";
  svg << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 14
      << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  svg << "<text x=\"18\" y=\"" << (kTop + kHeight - kBottom) / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << (kTop + kHeight - kBottom) / 2
      << ")\">" << y_label << "</text>\n";

  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof kPalette / sizeof kPalette[0])];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
    for (size_t i = 0; i < series[s].x.size(); ++i) {
      if (i > 0) svg << ' ';
      svg << sx(series[s].x[i]) << ',' << sy(series[s].y[i]);
    }
    svg << "\"/>\n";
    const double ly = kTop + 16 + 16 * static_cast<double>(s);
    svg << "<line x1=\"" << kLeft + 10 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + 34 << "\" y2=\""
        << ly << "\" stroke=\"" << color << "\" stroke-width=\"1.6\"/>\n";
    svg << "<text x=\"" << kLeft + 40 << "\" y=\"" << ly + 4 << "\">" << series[s].label
        << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << svg.str();
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

}  // namespace prlc::io
