#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <variant>
#include <vector>

#include "prlc/mdp.hpp"
#include "prlc/rl.hpp"
#include "prlc/sim.hpp"

// Serialization of run artifacts: policies and training checkpoints as
// JSON, measurements as schema-stable CSV, and an optional vector-graphics
// rendering of per-generation curves.  CSV is the plotting contract; the
// drawing is a convenience.
namespace prlc::io {

// Policy artifact.  The embedded fingerprint ties it to the scenario it
// was planned for; loaders must compare it before use.
struct PolicyFile {
  mdp::Policy policy;
  std::string scheme;
};

void write_policy(const std::string& path, const mdp::Policy& policy, const std::string& scheme);
PolicyFile read_policy(const std::string& path);

// Training snapshot; resuming from it is byte-identical to never pausing.
void write_checkpoint(const std::string& path, const rl::TrainerCheckpoint& checkpoint);
rl::TrainerCheckpoint read_checkpoint(const std::string& path);

// CSV schemas.  Every writer emits exactly one documented header and typed
// rows; validate_csv re-reads a document and fails on any drift.
struct CsvColumn {
  std::string name;
  char type = 's';  // 'i' integer, 'f' floating point, 's' string
};

struct CsvSchema {
  std::string kind;
  std::vector<CsvColumn> columns;
};

// generation, mean_delta, stderr_delta
const CsvSchema& trace_schema();
// scenario, scheme, runs, generations, delta_bar, delta_bar_se, fluctuation, late_packets
const CsvSchema& summary_schema();
// axis, value, scheme, seed, episodes, delta_bar, fluctuation
const CsvSchema& sweep_schema();
// episode, mean_reward
const CsvSchema& curve_schema();

std::string csv_header(const CsvSchema& schema);

using CsvValue = std::variant<std::int64_t, double, std::string>;

// Type-checks every row against the schema and writes the whole document
// at close.  Destruction closes too, except during exception unwinding,
// so a failed run leaves no partial file.  Strings must not contain
// separators or line breaks.
class CsvWriter {
 public:
  CsvWriter(std::string path, const CsvSchema& schema);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<CsvValue>& cells);
  void close();

 private:
  std::string path_;
  const CsvSchema* schema_;
  std::string body_;
  bool closed_ = false;
  int uncaught_at_open_ = 0;
};

// Returns the number of data rows; throws when the header or any cell
// disagrees with the schema.
size_t validate_csv(std::istream& in, const CsvSchema& schema);
size_t validate_csv_file(const std::string& path, const CsvSchema& schema);

// Per-generation curve of one experiment.
void write_trace_csv(const std::string& path, const sim::ExperimentSummary& summary);

// One polyline per scheme over a shared horizontal axis.
struct CurveSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

void write_curve_svg(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<CurveSeries>& series);

}  // namespace prlc::io
