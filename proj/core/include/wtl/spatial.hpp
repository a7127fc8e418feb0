#pragma once

// Great-circle distances, a turbine neighbourhood index, and stroke-turbine
// matching.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "wtl/ingest.hpp"
#include "wtl/kdtree.hpp"
#include "wtl/timeutil.hpp"

namespace wtl::spatial {

inline constexpr double kEarthRadiusKm = 6371.0088;

struct LatLon {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
};

/// Haversine distance on a sphere of radius kEarthRadiusKm. Exactly
/// symmetric in its arguments.
double geodesic_distance(LatLon a, LatLon b);

/// Turbine k is operational from Jan 1 00:00 UTC of its operational year.
bool is_operational(const ingest::TurbineRecord& t, Timestamp when);

/// Tie-break order on turbine ids: all-digit ids compare numerically,
/// anything else lexicographically.
bool id_less(const std::string& a, const std::string& b);

struct Neighbor {
  std::size_t index = 0;
  double distance_km = 0.0;
};

/// Immutable index over a turbine set; safe to share across threads.
class TurbineIndex {
 public:
  /// Throws std::invalid_argument on an empty turbine set.
  explicit TurbineIndex(std::span<const ingest::TurbineRecord> turbines);

  std::size_t size() const { return turbines_.size(); }
  const ingest::TurbineRecord& turbine(std::size_t i) const { return turbines_[i]; }
  std::span<const ingest::TurbineRecord> turbines() const { return turbines_; }

  /// Indices (ascending) of turbines with geodesic distance <= radius_km.
  std::vector<Neighbor> within(LatLon q, double radius_km) const;

  /// Calls visit(index, distance_km) for each turbine within radius_km, in
  /// unspecified order.
  template <typename Visit>
  void for_each_within(LatLon q, double radius_km, Visit&& visit) const {
    const auto p = to_point(q);
    tree_.for_each_within(p, search_radius2(radius_km), [&](std::size_t i) {
      const double d = geodesic_distance(q, coords_[i]);
      if (d <= radius_km) visit(i, d);
    });
  }

  /// Nearest turbine (ties: lowest id); only turbines operational at `when`
  /// are considered when it is given.
  std::optional<Neighbor> nearest(LatLon q, std::optional<Timestamp> when = std::nullopt) const;

 private:
  using Point = KdTree<3>::Point;
  static Point to_point(LatLon q);
  static double search_radius2(double radius_km);

  std::vector<ingest::TurbineRecord> turbines_;
  std::vector<LatLon> coords_;
  std::vector<Timestamp> operational_from_;
  KdTree<3> tree_;
};

inline constexpr std::uint64_t kUnknownRef = std::numeric_limits<std::uint64_t>::max();

/// One stroke-turbine association. `nearest_*` refer to the closest turbine
/// operational at stroke time (which may be this one).
struct MatchedPair {
  std::uint64_t stroke_ref = 0;
  std::uint64_t turbine_ref = 0;
  double distance_km = 0.0;
  std::uint64_t nearest_turbine_ref = kUnknownRef;
  double nearest_distance_km = 0.0;

  /// True when no operational turbine is strictly closer to the stroke.
  bool is_nearest() const { return distance_km <= nearest_distance_km; }

  friend bool operator==(const MatchedPair&, const MatchedPair&) = default;
};

struct MatchOptions {
  double radius_km = 2.0;
  unsigned workers = 0;  // 0: hardware concurrency
};

/// Pairs every stroke with each turbine within radius that was operational at
/// the stroke time. Output is ordered by (stroke_ref, turbine_ref) regardless
/// of worker count.
std::vector<MatchedPair> match_strokes(std::span<const ingest::StrokeRecord> strokes,
                                       const TurbineIndex& index, const MatchOptions& options = {});

struct AnnulusOptions {
  double r_in_km = 1.0;
  double r_out_km = 2.0;
  double exclusion_d0_km = 0.09;
  /// Count only strokes while the turbine itself was operational.
  bool require_operational = true;
};

/// Strokes with r_in <= d < r_out from turbine `turbine`, excluding strokes
/// within exclusion_d0 of any other turbine operational at the stroke time.
std::size_t annulus_counts(std::span<const ingest::StrokeRecord> strokes, std::size_t turbine,
                           const TurbineIndex& index, const AnnulusOptions& options = {});

// --- matched-pair run file --------------------------------------------------
//
// Layout (little-endian): 8-byte magic "WTLPAIR1", u64 record count, then per
// record: u64 stroke index, u64 turbine index, f64 distance_km,
// f64 nearest_distance_km. The nearest turbine index is not stored; on read it
// is set to turbine_ref when the two distances are equal and kUnknownRef
// otherwise.

void write_pairs(std::ostream& out, std::span<const MatchedPair> pairs);
std::vector<MatchedPair> read_pairs(std::istream& in);
void write_pairs_file(const std::filesystem::path& path, std::span<const MatchedPair> pairs);
std::vector<MatchedPair> read_pairs_file(const std::filesystem::path& path);

}  // namespace wtl::spatial
