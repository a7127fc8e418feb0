#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wtl/analysis.hpp"
#include "wtl/histogram.hpp"
#include "wtl/ingest.hpp"
#include "wtl/model.hpp"
#include "wtl/synth.hpp"

namespace wtlstrike {

/// Invalid or inconsistent configuration (exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Command { kMatch, kFit, kSweep, kTurbines, kSeasonal, kSynth };

const char* to_string(Command c);

struct RunConfig {
  std::filesystem::path strokes_path;
  std::filesystem::path turbines_path;
  std::optional<std::filesystem::path> pairs_path;
  wtl::ingest::StrokeSchema stroke_schema;
  wtl::ingest::TurbineSchema turbine_schema;
  std::optional<wtl::analysis::Window> window;
  double match_radius_km = 2.0;
  wtl::hist::Geometry geometry;
  int n_iter = 3;
  double convergence_tol = 1e-3;
  bool poisson_weighted = false;
  std::vector<wtl::ingest::HeightCategory> categories = wtl::ingest::default_height_categories();
  std::size_t min_pairs = 10'000;
  std::string season = "all";
  double d0_km = 0.09;
  double annulus_inner_km = 1.0;
  double annulus_outer_km = 2.0;
  wtl::model::ConversionFactors conversion;
  double ul_scale = 2.0;
  double grid_cell_deg = 2.5;
  double grid_min_turbine_years = 80.0;
  std::filesystem::path output_dir = "out";
  unsigned workers = 0;
  std::uint64_t seed = 1;
  std::optional<wtl::synth::SynthConfig> synth;

  /// Resolved configuration as JSON (paths absolute); used in manifests.
  nlohmann::json to_json() const;
};

/// Parses and validates a config document. Relative paths are resolved
/// against `base_dir`. Unknown keys are errors.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Reads `path` and calls parse_config with its directory.
RunConfig load_config(const std::filesystem::path& path);

/// Checks what `command` needs (input files exist, synth block present).
void validate_for(const RunConfig& config, Command command);

}  // namespace wtlstrike
