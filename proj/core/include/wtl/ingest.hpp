#pragma once

// Delimited-text ingestion of LLS stroke exports and turbine databases.
//
// Column names are configuration (a schema maps field -> header name), so an
// NLDN-like export and a USWTDB extract load without code changes. Every input
// row ends up in exactly one of: records, filtered, rejected.

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wtl/timeutil.hpp"

namespace wtl::ingest {

/// Fatal ingestion problem: unreadable source or a mapped column missing from
/// the header. Per-row problems are reported, not thrown.
class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EventType { kCgStroke, kOther };

struct StrokeRecord {
  Timestamp time{};
  double latitude = 0.0;
  double longitude = 0.0;
  double peak_current_ka = 0.0;  // carried through; NaN when the cell is empty
  EventType event_type = EventType::kCgStroke;
};

struct TurbineRecord {
  std::string turbine_id;
  double latitude = 0.0;
  double longitude = 0.0;
  double tip_height_m = 0.0;
  int operational_year = 0;
  int location_confidence = 0;
};

struct StrokeSchema {
  char delimiter = ',';
  std::string time = "time";
  std::string lat = "lat";
  std::string lon = "lon";
  std::string peak_current = "peak_current";
  std::string type = "type";
  /// Values of the type column that denote a CG stroke (case-sensitive).
  std::vector<std::string> cg_type_values{"G", "CG"};

  static StrokeSchema from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct TurbineSchema {
  char delimiter = ',';
  std::string id = "id";
  std::string lat = "lat";
  std::string lon = "lon";
  std::string total_height_m = "total_height_m";
  std::string p_year = "p_year";
  std::string loc_conf = "loc_conf";
  int min_location_confidence = 3;

  /// Column names used by the US Wind Turbine Database CSV release.
  static TurbineSchema uswtdb();
  static TurbineSchema from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

enum class RejectReason { kColumns, kMissing, kParse, kRange, kTime };

const char* to_string(RejectReason r);

struct RejectionReport {
  struct Sample {
    std::size_t line = 0;  // 1-based line in the source, header is line 1
    std::string text;
  };
  struct Entry {
    std::size_t count = 0;
    std::vector<Sample> samples;  // first kMaxSamples rows
  };
  static constexpr std::size_t kMaxSamples = 10;

  std::size_t rows = 0;
  std::size_t accepted = 0;
  std::size_t filtered = 0;
  std::size_t rejected = 0;
  std::map<std::string, Entry> reasons;

  void reject(RejectReason reason, std::size_t line, std::string_view text);
  nlohmann::json to_json() const;
};

template <typename Record>
struct ParseResult {
  std::vector<Record> records;
  RejectionReport report;
};

ParseResult<StrokeRecord> parse_strokes(std::istream& in, const StrokeSchema& schema = {});
ParseResult<TurbineRecord> parse_turbines(std::istream& in, const TurbineSchema& schema = {});

ParseResult<StrokeRecord> parse_strokes_file(const std::filesystem::path& path,
                                             const StrokeSchema& schema = {});
ParseResult<TurbineRecord> parse_turbines_file(const std::filesystem::path& path,
                                               const TurbineSchema& schema = {});

/// Writes records in `schema`'s column layout. Coordinates use the shortest
/// round-trip decimal form, so parse(write(x)) reproduces x bit-exactly.
void write_strokes(std::ostream& out, std::span<const StrokeRecord> strokes,
                   const StrokeSchema& schema = {});
void write_turbines(std::ostream& out, std::span<const TurbineRecord> turbines,
                    const TurbineSchema& schema = {});

// --- height categories ----------------------------------------------------

/// Half-open tip-height interval [lo_m, hi_m).
struct HeightCategory {
  std::string label;
  double lo_m = 0.0;
  double hi_m = 0.0;
};

/// H1..H5; note the 140-145 m gap between H3 and H4.
std::vector<HeightCategory> default_height_categories();

/// Throws std::invalid_argument unless each interval has lo < hi and the
/// intervals are strictly increasing and non-overlapping.
void validate_categories(std::span<const HeightCategory> categories);

/// Index of the category containing h, or nullopt (UNBINNED).
std::optional<std::size_t> height_category(double tip_height_m,
                                           std::span<const HeightCategory> categories);

/// Splits one delimited line, honouring double-quoted fields ("" escapes).
std::vector<std::string> split_delimited(std::string_view line, char delimiter);

}  // namespace wtl::ingest
