#pragma once

// Studies built on matched pairs and fits: height-category sweeps, season
// splits, per-turbine proximity statistics and regional cold-season grids.

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wtl/fit.hpp"
#include "wtl/ingest.hpp"
#include "wtl/model.hpp"
#include "wtl/spatial.hpp"
#include "wtl/timeutil.hpp"

namespace wtl::analysis {

/// Raised when a study lacks the data it needs (e.g. too few pairs).
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SeasonLabel { kAll, kWarm, kCold, kCustom };

struct SeasonFilter {
  std::set<int> months;  // 1..12
  SeasonLabel label = SeasonLabel::kAll;

  static SeasonFilter all();
  static SeasonFilter warm();  // May-Aug
  static SeasonFilter cold();  // Nov-Feb
  static SeasonFilter custom(std::set<int> months);
  /// "all", "warm" or "cold".
  static SeasonFilter parse(const std::string& name);

  bool contains(Timestamp t) const;
  std::string name() const;
};

/// Half-open analysis window [start, end).
struct Window {
  Timestamp start;
  Timestamp end;

  bool contains(Timestamp t) const { return t >= start && t < end; }
  /// Smallest window holding every stroke time.
  static Window covering(std::span<const ingest::StrokeRecord> strokes);
};

/// Years the turbine is operational inside the window.
double exposure_years(const ingest::TurbineRecord& t, const Window& w);

struct PairFilter {
  SeasonFilter season = SeasonFilter::all();
  std::optional<Window> window;
  /// Keep only pairs whose turbine falls in categories[category].
  std::optional<std::size_t> category;
  std::vector<ingest::HeightCategory> categories;
};

/// Subset of pairs (order preserved). Neighbour information on each pair is
/// left untouched, so turbines outside the subset still redistribute weight.
std::vector<spatial::MatchedPair> filter_pairs(std::span<const spatial::MatchedPair> pairs,
                                               std::span<const ingest::StrokeRecord> strokes,
                                               std::span<const ingest::TurbineRecord> turbines,
                                               const PairFilter& filter);

// --- category sweep -------------------------------------------------------

struct SweepOptions {
  fit::IterativeOptions fit;
  std::size_t min_pairs = 10'000;
  model::ConversionFactors conversion;
  double ul_scale = 2.0;  // detection-efficiency scaling of the UL term
  std::optional<Window> window;
};

struct CategoryResult {
  ingest::HeightCategory category;
  double midpoint_m = 0.0;
  std::size_t n_pairs = 0;
  std::size_t n_turbines = 0;
  double turbine_years = 0.0;
  fit::IterativeFit fit;
  model::CollectionAreas areas;
  model::AttractionRadii radii;
  double scaled_total_strike_point_km = 0.0;
};

/// Iterative fit per category on season-filtered pairs. Throws
/// InsufficientData naming the first category below min_pairs.
std::vector<CategoryResult> category_sweep(std::span<const spatial::MatchedPair> pairs,
                                           std::span<const ingest::StrokeRecord> strokes,
                                           std::span<const ingest::TurbineRecord> turbines,
                                           std::span<const ingest::HeightCategory> categories,
                                           const SeasonFilter& season, const SweepOptions& options = {});

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  std::vector<double> residuals;
};

/// Ordinary least squares y = intercept + slope * x. Needs >= 2 distinct x.
LinearFit regression_fit(std::span<const double> x, std::span<const double> y);

struct RadiusRegressions {
  LinearFit cg;   // CG strike-point radius (m) vs midpoint height (m)
  LinearFit tul;  // upward strike-point radius (m) vs midpoint height (m)
};

RadiusRegressions radius_regressions(std::span<const CategoryResult> results);

// --- per-turbine statistics -------------------------------------------------

struct PerTurbineOptions {
  double d0_km = 0.09;
  double annulus_inner_km = 1.0;
  double annulus_outer_km = 2.0;
  model::ConversionFactors conversion;
  SeasonFilter season = SeasonFilter::all();
  std::optional<Window> window;
  std::vector<ingest::HeightCategory> categories = ingest::default_height_categories();
};

struct PerTurbineStats {
  std::size_t turbine_ref = 0;
  std::optional<std::size_t> category;
  std::uint64_t n_inner = 0;
  std::uint64_t annulus_count = 0;
  double annulus_density = 0.0;  // strokes / km^2 / year
  double r_total_sp_km = 0.0;    // NaN for outliers
  double exposure_years = 0.0;
  /// Inner strokes but an empty annulus: radius undefined.
  bool outlier = false;
};

struct CdfPoint {
  double radius_km = 0.0;
  double fraction = 0.0;
};

struct CategoryCdf {
  ingest::HeightCategory category;
  std::size_t n_turbines = 0;  // excluding outliers
  std::size_t n_outliers = 0;
  std::vector<CdfPoint> points;  // step function, right-continuous, ends at 1
  std::uint64_t pooled_inner = 0;
  std::uint64_t pooled_annulus = 0;
  double pooled_radius_km = 0.0;
  /// Fraction of turbines with radius <= pooled radius.
  double pooled_percentile = 0.0;
};

struct PerTurbineReport {
  std::vector<PerTurbineStats> turbines;
  std::vector<CategoryCdf> categories;
};

/// sqrt(alpha) * sqrt(n_inner / (pi * rho)) with rho = annulus_count / annulus area.
double total_strike_point_radius(std::uint64_t n_inner, std::uint64_t annulus_count, double annulus_area_km2,
                                 const model::ConversionFactors& conv);

/// Counts come from the pairs, which must have been matched with a radius of
/// at least annulus_outer_km. Annulus strokes within d0 of another matched
/// turbine are excluded.
PerTurbineReport per_turbine_stats(std::span<const spatial::MatchedPair> pairs,
                                   std::span<const ingest::StrokeRecord> strokes,
                                   std::span<const ingest::TurbineRecord> turbines,
                                   const PerTurbineOptions& options = {});

/// Share of a structure's total collection that a d0 disk gathers by chance
/// from the ground-stroke field.
double chance_inclusion_bound(double d0_km, const model::ModelParams& params);

/// 1 - exp(-d0^2 / (2 sigma^2)).
double capture_fraction(double d0_km, double sigma_km);

// --- cold-season grid -------------------------------------------------------

struct GridOptions {
  double cell_deg = 2.5;
  double min_turbine_years = 80.0;
  double d0_km = 0.09;
  double annulus_inner_km = 1.0;
  double annulus_outer_km = 2.0;
  std::optional<Window> window;
};

struct GridCell {
  int lat_index = 0;  // floor((lat + 90) / cell)
  int lon_index = 0;  // floor((lon + 180) / cell)
  double lat_south = 0.0;
  double lon_west = 0.0;
  std::size_t n_turbines = 0;
  double turbine_years = 0.0;
  std::uint64_t warm_annulus = 0, cold_annulus = 0;
  std::uint64_t warm_inner = 0, cold_inner = 0;
  double cold_density_frac = 0.0;  // NaN when no annulus strokes
  double cold_strike_frac = 0.0;   // NaN when no inner strokes
  double ratio = 0.0;              // NaN unless has_ratio
  bool has_ratio = false;
  /// A zero denominator prevented a fraction or the ratio.
  bool flagged = false;
};

std::vector<GridCell> seasonal_grid(std::span<const spatial::MatchedPair> pairs,
                                    std::span<const ingest::StrokeRecord> strokes,
                                    std::span<const ingest::TurbineRecord> turbines,
                                    const GridOptions& options = {});

}  // namespace wtl::analysis
