#pragma once

// Synthetic stroke fields with known truth: a homogeneous Poisson background,
// nearest-turbine capture, upward strokes at each turbine, and Gaussian
// location error. Also the radial smearing Monte Carlo for the well profile.

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wtl/ingest.hpp"
#include "wtl/spatial.hpp"
#include "wtl/timeutil.hpp"

namespace wtl::synth {

struct TruthParams {
  double beta = 0.5;
  double sigma_km = 0.045;
  double lambda_km = 0.1;
};

struct TurbineSpec {
  double x_km = 0.0;  // east of the reference point
  double y_km = 0.0;  // north of the reference point
  double tip_height_m = 100.0;
  int operational_year = 2010;
};

enum class FieldRegion {
  kDisk,          // disk of domain_radius_km around the reference point
  kTurbineDisks,  // union of disks of domain_radius_km around each turbine
};

using MonthWeights = std::array<double, 12>;  // January first

struct SynthConfig {
  std::uint64_t rng_seed = 1;
  /// Aggregate background stroke density over the whole window, strokes/km^2.
  double background_density = 140.0;
  spatial::LatLon reference{35.0, -100.0};
  std::vector<TurbineSpec> turbines{TurbineSpec{}};
  TruthParams truth;
  /// Overrides `truth` per turbine when non-empty (same length as turbines).
  std::vector<TruthParams> turbine_truth;
  double domain_radius_km = 2.5;
  FieldRegion region = FieldRegion::kDisk;
  double ul_detection_efficiency = 1.0;
  Timestamp window_start = year_start(2015);
  Timestamp window_end = year_start(2022);
  MonthWeights field_months{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  MonthWeights ul_months{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};

  const TruthParams& truth_for(std::size_t turbine) const;
  /// Throws std::invalid_argument.
  void validate() const;

  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
};

enum class Label : std::uint8_t { kGround = 0, kCaptured = 1, kUpward = 2 };

struct StrokeTruth {
  Label label = Label::kGround;
  std::uint64_t turbine = spatial::kUnknownRef;  // set for captured and upward
};

struct TurbineTruth {
  std::uint64_t captured = 0;
  std::uint64_t upward_generated = 0;
  std::uint64_t upward_detected = 0;
};

struct SynthOutput {
  std::vector<ingest::StrokeRecord> strokes;
  std::vector<StrokeTruth> labels;  // parallel to strokes
  std::vector<ingest::TurbineRecord> turbines;
  std::vector<TurbineTruth> turbine_truth;
  std::uint64_t field_points = 0;  // background points before capture
  double field_area_km2 = 0.0;

  nlohmann::json truth_json(const SynthConfig& config) const;
};

/// Deterministic in (config); `workers` does not change the output.
SynthOutput generate(const SynthConfig& config, unsigned workers = 1);

/// Writes strokes.csv, turbines.csv and truth.json into `dir`.
void write_dataset(const std::filesystem::path& dir, const SynthConfig& config, const SynthOutput& out);

/// Local tangent-plane offset (km east, km north) to lat/lon, azimuthal
/// equidistant about `reference`.
spatial::LatLon plane_to_latlon(spatial::LatLon reference, double x_km, double y_km);

/// Independent generator keyed by (seed, phase, stream).
std::mt19937_64 keyed_engine(std::uint64_t seed, std::uint64_t phase, std::uint64_t stream);

// --- smearing Monte Carlo ---------------------------------------------------

struct MonteCarloOptions {
  std::uint64_t seed = 1;
  std::size_t n_samples = 1'000'000;
  double domain_radius_km = 0.5;  // profiled disk
  double bin_width_km = 0.05;
  /// Points are drawn on a disk of domain_radius_km + guard_sigmas * sigma.
  double guard_sigmas = 5.0;
};

struct RadialProfile {
  double sigma_km = 0.0;
  std::vector<double> radius_km;  // bin centres
  std::vector<double> lower_km;   // bin lower edges
  std::vector<double> density;    // relative to the far-field density
  std::vector<double> stderr_;    // Poisson error of density
  std::vector<double> expected;   // bin average of 1 - exp(-r/lambda)
  double floor = 0.0;             // density inside r < sigma/2
  double floor_stderr = 0.0;
};

/// Draws n_samples points with density proportional to 1 - exp(-r/lambda)
/// on the domain disk widened by the guard band, scatters each by N(0, sigma^2) per axis and bins the
/// result radially. Densities are normalised so an unsmeared draw reproduces
/// 1 - exp(-r/lambda).
std::vector<RadialProfile> monte_carlo_well(const std::vector<double>& sigma_values_km, double lambda_km,
                                            const MonteCarloOptions& options = {});

}  // namespace wtl::synth
