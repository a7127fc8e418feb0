#pragma once

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wtl/ingest.hpp"
#include "wtl/spatial.hpp"
#include "wtlstrike/config.hpp"

namespace wtlstrike {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNotConverged = 3 };

/// Problem with the input data rather than the configuration (exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Inputs {
  std::vector<wtl::ingest::StrokeRecord> strokes;
  std::vector<wtl::ingest::TurbineRecord> turbines;
  wtl::ingest::RejectionReport stroke_report;
  wtl::ingest::RejectionReport turbine_report;
  std::vector<wtl::spatial::MatchedPair> pairs;
  bool pairs_from_file = false;
};

struct Outcome {
  int exit_code = kExitOk;
  std::vector<std::string> warnings;
  std::vector<std::filesystem::path> outputs;
  nlohmann::json summary = nlohmann::json::object();
};

struct RunOptions {
  std::ostream* log = nullptr;  // progress messages when set
};

/// Ingests strokes and turbines and matches them, or reads the configured
/// pair file instead of matching.
Inputs load_inputs(const RunConfig& config, std::vector<std::string>& warnings);

/// Runs one command end to end: validation, work, output tables, manifest.
/// Throws ConfigError / DataError / wtl::ingest::IngestError; non-convergence
/// is reported through Outcome::exit_code.
Outcome run_command(Command command, const RunConfig& config, const RunOptions& options = {});

/// Lowercase hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

/// Shortest decimal form that parses back to the same double; "nan" for NaN.
std::string format_double(double v);

}  // namespace wtlstrike
