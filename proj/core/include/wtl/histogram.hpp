#pragma once

// Distance histograms of matched strokes and the nearest-turbine
// redistribution weights.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wtl/model.hpp"
#include "wtl/spatial.hpp"

namespace wtl::hist {

struct Provenance {
  std::string filter = "all";
  int iteration = 0;
};

/// Weighted counts in bins [i*dr, (i+1)*dr) over [0, max_radius).
///
/// Weighted mass is held in 32.32 fixed point, so accumulation is exactly
/// associative: any partition of the pairs merges to the same bits.
class WeightedHistogram {
 public:
  static constexpr double kFixedScale = 4294967296.0;  // 2^32

  explicit WeightedHistogram(double bin_width_km = 0.02, double max_radius_km = 2.0);

  std::size_t size() const { return raw_.size(); }
  double bin_width_km() const { return bin_width_; }
  double max_radius_km() const { return max_radius_; }
  double bin_center(std::size_t i) const { return (static_cast<double>(i) + 0.5) * bin_width_; }
  /// 2*pi*r_i*dr at the bin centre.
  double bin_area(std::size_t i) const;

  /// Adds `weight` (0 < weight, finite) at `distance_km`; returns false and
  /// counts a skip when the distance is outside [0, max_radius).
  bool add(double distance_km, double weight = 1.0);

  double count(std::size_t i) const { return static_cast<double>(fixed_[i]) / kFixedScale; }
  std::vector<double> counts() const;
  std::uint64_t raw_count(std::size_t i) const { return raw_[i]; }
  std::span<const std::uint64_t> raw_counts() const { return raw_; }
  std::size_t nonzero_bins() const;
  std::uint64_t skipped() const { return skipped_; }

  double turbine_years = 0.0;
  Provenance provenance;

  bool same_geometry(const WeightedHistogram& other) const;
  /// Adds `other` bin-wise (turbine_years too). Throws on geometry mismatch.
  void merge(const WeightedHistogram& other);

  nlohmann::json to_json() const;
  static WeightedHistogram from_json(const nlohmann::json& j);

  friend bool operator==(const WeightedHistogram& a, const WeightedHistogram& b) {
    return a.bin_width_ == b.bin_width_ && a.max_radius_ == b.max_radius_ && a.fixed_ == b.fixed_ &&
           a.raw_ == b.raw_ && a.skipped_ == b.skipped_ && a.turbine_years == b.turbine_years;
  }

 private:
  double bin_width_;
  double max_radius_;
  std::vector<std::int64_t> fixed_;
  std::vector<std::uint64_t> raw_;
  std::uint64_t skipped_ = 0;
};

/// w(d) = 1 / rho-tilde(d) from the previous iteration's fit, or the unit
/// weight before any fit exists.
class WeightFunction {
 public:
  WeightFunction() = default;
  explicit WeightFunction(const model::ModelParams& params);

  bool is_unit() const { return unit_; }
  const model::ModelParams& params() const { return params_; }

  double operator()(double nearest_distance_km) const;

  /// 1 when the pair's turbine is (one of) the nearest, else w(d_nearest).
  double pair_weight(const spatial::MatchedPair& pair) const;

 private:
  bool unit_ = true;
  model::ModelParams params_{};
};

struct Geometry {
  double bin_width_km = 0.02;
  double max_radius_km = 2.0;
};

/// Bins every pair at floor(d_k / dr) with its redistribution weight. Raw
/// counts always increase by one per in-range pair.
WeightedHistogram accumulate(std::span<const spatial::MatchedPair> pairs, const WeightFunction& weights,
                             const Geometry& geometry = {}, unsigned workers = 1);

/// counts_i / amplitude (km^2).
std::vector<double> normalized_counts(const WeightedHistogram& h, const model::ModelParams& params);

struct DerivedViews {
  std::vector<double> radius_km;
  std::vector<double> normalized;          // N_i / amplitude
  std::vector<double> density;             // N_i / (A_i * amplitude)
  std::vector<double> surplus;             // N_i / amplitude - A_i
  std::vector<double> cumulative_surplus;  // prefix sum of surplus
};

DerivedViews derived_views(const WeightedHistogram& h, const model::ModelParams& params);

}  // namespace wtl::hist
