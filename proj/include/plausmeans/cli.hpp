#pragma once

// Command layer behind the plausmeans executable: input parsing, the five
// commands, and JSON/CSV writers. Kept in the library so tests can drive it
// without a subprocess.

#include <cstdint>
#include <exception>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "plausmeans/core.hpp"
#include "plausmeans/nlp_opt.hpp"
#include "plausmeans/simulate.hpp"

namespace plausmeans {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

struct RunConfig {
  std::string command;  // estimate | intervals | adaptive | simulate | real-data
  std::string input;    // empty: stdin (real-data: bundled data)
  std::string output;   // empty: stdout
  std::string kind = "eb";
  Index K = 200;
  double nu = kDefaultNu;
  double c_n = 0.6667;
  double alpha = 1.0 - std::sqrt(0.95);
  double pi = 1.0 - std::sqrt(0.95);
  int mc_samples = kDefaultQuantileSamples;
  int m = 10;
  int reps = 200;
  std::uint64_t seed = 0;
  std::vector<std::string> methods;
  std::string format = "json";

  // simulate
  std::string scenario = "single_mode";
  Index n = 10;
  std::string study = "mse";
  int M = 50;
  std::vector<double> levels;  // nominal coverage rows; empty means the table rows
  bool paper_scale = false;

  // adaptive / real-data
  double target = 0.95;

  // Optional side outputs.
  std::string plot_output;    // per-index figure CSV
  std::string ladder_output;  // adaptive ladder CSV

  OptimizerConfig optimizer;

  void validate() const;
};

// Parsed data file: one real per line, or a `y,s` header followed by pairs,
// in which case x = y / s.
struct InputData {
  Vector x;
  std::optional<Vector> y;
  std::optional<Vector> s;

  bool scaled() const { return s.has_value(); }
};

InputData parse_input(std::istream& in);
InputData read_input(const std::string& path);

// Bundled SAT coaching data (8 schools).
InputData rubin_data();
// Order-sensitive checksum of the bundled table, stable across platforms.
std::uint64_t data_checksum(const InputData& data);

// Runs one command; diagnostics go to err. Returns the exit status.
int run_command(const RunConfig& config, std::ostream& err);

// Prints the failure to err and returns its exit status.
int report_failure(std::exception_ptr error, std::ostream& err);

nlohmann::json report_to_json(const ReplicationReport& report);
ReplicationReport report_from_json(const nlohmann::json& j);

// One RFC 4180 field.
std::string csv_field(const std::string& value);
std::string csv_field(double value);

}  // namespace plausmeans
