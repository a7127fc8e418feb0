#include "wtl/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

namespace wtl::ingest {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

std::optional<int> to_int(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    // USWTDB stores some integer columns as "2012.0"
    auto d = to_double(s);
    if (d && *d == std::floor(*d) && std::abs(*d) < 1e9) return static_cast<int>(*d);
    return std::nullopt;
  }
  return v;
}

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string quote_if_needed(const std::string& s, char delimiter) {
  if (s.find(delimiter) == std::string::npos && s.find('"') == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// Reads the header and resolves each mapped field to a column index.
class ColumnMap {
 public:
  ColumnMap(std::istream& in, char delimiter, const std::vector<std::pair<std::string, std::string>>& fields) {
    std::string header;
    if (!std::getline(in, header)) throw IngestError("input has no header row");
    if (header.size() >= 3 && static_cast<unsigned char>(header[0]) == 0xEF &&
        static_cast<unsigned char>(header[1]) == 0xBB && static_cast<unsigned char>(header[2]) == 0xBF) {
      header.erase(0, 3);
    }
    const auto cols = split_delimited(header, delimiter);
    width_ = cols.size();
    std::unordered_map<std::string, std::size_t> by_name;
    for (std::size_t i = 0; i < cols.size(); ++i) by_name.emplace(std::string(trim(cols[i])), i);
    std::string missing;
    for (const auto& [field, column] : fields) {
      auto it = by_name.find(column);
      if (it == by_name.end()) {
        missing += (missing.empty() ? "" : ", ") + column + " (" + field + ")";
      } else {
        index_[field] = it->second;
      }
    }
    if (!missing.empty()) throw IngestError("missing mapped column(s): " + missing);
  }

  std::size_t operator[](const std::string& field) const { return index_.at(field); }
  std::size_t width() const { return width_; }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t width_ = 0;
};

template <typename RowFn>
void for_each_row(std::istream& in, RejectionReport& report, RowFn&& fn) {
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++report.rows;
    fn(line, line_no);
  }
  if (in.bad()) throw IngestError("read error while parsing input");
}

}  // namespace

const char* to_string(RejectReason r) {
  switch (r) {
    case RejectReason::kColumns: return "COLUMNS";
    case RejectReason::kMissing: return "MISSING";
    case RejectReason::kParse: return "PARSE";
    case RejectReason::kRange: return "RANGE";
    case RejectReason::kTime: return "TIME";
  }
  return "UNKNOWN";
}

void RejectionReport::reject(RejectReason reason, std::size_t line, std::string_view text) {
  ++rejected;
  Entry& e = reasons[to_string(reason)];
  ++e.count;
  if (e.samples.size() < kMaxSamples) e.samples.push_back({line, std::string(text)});
}

nlohmann::json RejectionReport::to_json() const {
  nlohmann::json j;
  j["rows"] = rows;
  j["accepted"] = accepted;
  j["filtered"] = filtered;
  j["rejected"] = rejected;
  j["reasons"] = nlohmann::json::object();
  for (const auto& [name, entry] : reasons) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : entry.samples) samples.push_back({{"line", s.line}, {"text", s.text}});
    j["reasons"][name] = {{"count", entry.count}, {"samples", samples}};
  }
  return j;
}

std::vector<std::string> split_delimited(std::string_view line, char delimiter) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delimiter) {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r' || i + 1 != line.size()) {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

StrokeSchema StrokeSchema::from_json(const nlohmann::json& j) {
  StrokeSchema s;
  if (j.contains("delimiter")) {
    const auto d = j.at("delimiter").get<std::string>();
    if (d.size() != 1) throw std::invalid_argument("delimiter must be a single character");
    s.delimiter = d[0];
  }
  s.time = j.value("time", s.time);
  s.lat = j.value("lat", s.lat);
  s.lon = j.value("lon", s.lon);
  s.peak_current = j.value("peak_current", s.peak_current);
  s.type = j.value("type", s.type);
  s.cg_type_values = j.value("cg_type_values", s.cg_type_values);
  return s;
}

nlohmann::json StrokeSchema::to_json() const {
  return {{"delimiter", std::string(1, delimiter)}, {"time", time}, {"lat", lat}, {"lon", lon},
          {"peak_current", peak_current}, {"type", type}, {"cg_type_values", cg_type_values}};
}

TurbineSchema TurbineSchema::uswtdb() {
  TurbineSchema s;
  s.id = "case_id";
  s.lat = "ylat";
  s.lon = "xlong";
  s.total_height_m = "t_ttlh";
  s.p_year = "p_year";
  s.loc_conf = "t_conf_loc";
  return s;
}

TurbineSchema TurbineSchema::from_json(const nlohmann::json& j) {
  TurbineSchema s = j.value("preset", std::string{}) == "uswtdb" ? uswtdb() : TurbineSchema{};
  if (j.contains("delimiter")) {
    const auto d = j.at("delimiter").get<std::string>();
    if (d.size() != 1) throw std::invalid_argument("delimiter must be a single character");
    s.delimiter = d[0];
  }
  s.id = j.value("id", s.id);
  s.lat = j.value("lat", s.lat);
  s.lon = j.value("lon", s.lon);
  s.total_height_m = j.value("total_height_m", s.total_height_m);
  s.p_year = j.value("p_year", s.p_year);
  s.loc_conf = j.value("loc_conf", s.loc_conf);
  s.min_location_confidence = j.value("min_location_confidence", s.min_location_confidence);
  return s;
}

nlohmann::json TurbineSchema::to_json() const {
  return {{"delimiter", std::string(1, delimiter)}, {"id", id}, {"lat", lat}, {"lon", lon},
          {"total_height_m", total_height_m}, {"p_year", p_year}, {"loc_conf", loc_conf},
          {"min_location_confidence", min_location_confidence}};
}

ParseResult<StrokeRecord> parse_strokes(std::istream& in, const StrokeSchema& schema) {
  if (!in) throw IngestError("stroke source is not readable");
  const ColumnMap cols(in, schema.delimiter,
                       {{"time", schema.time}, {"lat", schema.lat}, {"lon", schema.lon},
                        {"peak_current", schema.peak_current}, {"type", schema.type}});
  const std::size_t c_time = cols["time"], c_lat = cols["lat"], c_lon = cols["lon"],
                    c_peak = cols["peak_current"], c_type = cols["type"];

  ParseResult<StrokeRecord> result;
  auto& report = result.report;
  for_each_row(in, report, [&](const std::string& line, std::size_t line_no) {
    const auto f = split_delimited(line, schema.delimiter);
    if (f.size() != cols.width()) return report.reject(RejectReason::kColumns, line_no, line);
    const auto time_s = trim(f[c_time]), lat_s = trim(f[c_lat]), lon_s = trim(f[c_lon]),
               type_s = trim(f[c_type]);
    if (time_s.empty() || lat_s.empty() || lon_s.empty() || type_s.empty()) {
      return report.reject(RejectReason::kMissing, line_no, line);
    }
    const auto t = parse_iso8601(time_s);
    if (!t) return report.reject(RejectReason::kTime, line_no, line);
    const auto lat = to_double(lat_s);
    const auto lon = to_double(lon_s);
    double peak = std::numeric_limits<double>::quiet_NaN();
    if (!trim(f[c_peak]).empty()) {
      const auto p = to_double(f[c_peak]);
      if (!p) return report.reject(RejectReason::kParse, line_no, line);
      peak = *p;
    }
    if (!lat || !lon) return report.reject(RejectReason::kParse, line_no, line);
    if (std::abs(*lat) > 90.0 || std::abs(*lon) > 180.0) {
      return report.reject(RejectReason::kRange, line_no, line);
    }
    const bool cg = std::find(schema.cg_type_values.begin(), schema.cg_type_values.end(), type_s) !=
                    schema.cg_type_values.end();
    if (!cg) {
      ++report.filtered;
      return;
    }
    result.records.push_back({*t, *lat, *lon, peak, EventType::kCgStroke});
    ++report.accepted;
  });
  return result;
}

ParseResult<TurbineRecord> parse_turbines(std::istream& in, const TurbineSchema& schema) {
  if (!in) throw IngestError("turbine source is not readable");
  const ColumnMap cols(in, schema.delimiter,
                       {{"id", schema.id}, {"lat", schema.lat}, {"lon", schema.lon},
                        {"total_height_m", schema.total_height_m}, {"p_year", schema.p_year},
                        {"loc_conf", schema.loc_conf}});
  const std::size_t c_id = cols["id"], c_lat = cols["lat"], c_lon = cols["lon"],
                    c_h = cols["total_height_m"], c_year = cols["p_year"], c_conf = cols["loc_conf"];

  ParseResult<TurbineRecord> result;
  auto& report = result.report;
  for_each_row(in, report, [&](const std::string& line, std::size_t line_no) {
    const auto f = split_delimited(line, schema.delimiter);
    if (f.size() != cols.width()) return report.reject(RejectReason::kColumns, line_no, line);
    for (std::size_t c : {c_id, c_lat, c_lon, c_h, c_year, c_conf}) {
      if (trim(f[c]).empty()) return report.reject(RejectReason::kMissing, line_no, line);
    }
    const auto lat = to_double(f[c_lat]);
    const auto lon = to_double(f[c_lon]);
    const auto h = to_double(f[c_h]);
    const auto year = to_int(f[c_year]);
    const auto conf = to_int(f[c_conf]);
    if (!lat || !lon || !h || !year || !conf) {
      return report.reject(RejectReason::kParse, line_no, line);
    }
    if (std::abs(*lat) > 90.0 || std::abs(*lon) > 180.0 || *h <= 0.0 || *conf < 0 || *conf > 3) {
      return report.reject(RejectReason::kRange, line_no, line);
    }
    if (*conf < schema.min_location_confidence) {
      ++report.filtered;
      return;
    }
    result.records.push_back({std::string(trim(f[c_id])), *lat, *lon, *h, *year, *conf});
    ++report.accepted;
  });
  return result;
}

ParseResult<StrokeRecord> parse_strokes_file(const std::filesystem::path& path,
                                             const StrokeSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open stroke file: " + path.string());
  return parse_strokes(in, schema);
}

ParseResult<TurbineRecord> parse_turbines_file(const std::filesystem::path& path,
                                               const TurbineSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open turbine file: " + path.string());
  return parse_turbines(in, schema);
}

void write_strokes(std::ostream& out, std::span<const StrokeRecord> strokes,
                   const StrokeSchema& schema) {
  const char d = schema.delimiter;
  const std::string cg = schema.cg_type_values.empty() ? "G" : schema.cg_type_values.front();
  out << schema.time << d << schema.lat << d << schema.lon << d << schema.peak_current << d
      << schema.type << '\n';
  for (const auto& s : strokes) {
    out << format_iso8601(s.time) << d << shortest(s.latitude) << d << shortest(s.longitude) << d;
    if (!std::isnan(s.peak_current_ka)) out << shortest(s.peak_current_ka);
    out << d << (s.event_type == EventType::kCgStroke ? cg : std::string("C")) << '\n';
  }
}

void write_turbines(std::ostream& out, std::span<const TurbineRecord> turbines,
                    const TurbineSchema& schema) {
  const char d = schema.delimiter;
  out << schema.id << d << schema.lat << d << schema.lon << d << schema.total_height_m << d
      << schema.p_year << d << schema.loc_conf << '\n';
  for (const auto& t : turbines) {
    out << quote_if_needed(t.turbine_id, d) << d << shortest(t.latitude) << d
        << shortest(t.longitude) << d << shortest(t.tip_height_m) << d << t.operational_year << d
        << t.location_confidence << '\n';
  }
}

std::vector<HeightCategory> default_height_categories() {
  return {{"H1", 85.0, 115.0},
          {"H2", 115.0, 130.0},
          {"H3", 130.0, 140.0},
          {"H4", 145.0, 160.0},
          {"H5", 160.0, 200.0}};
}

void validate_categories(std::span<const HeightCategory> categories) {
  for (std::size_t i = 0; i < categories.size(); ++i) {
    const auto& c = categories[i];
    if (!(std::isfinite(c.lo_m) && std::isfinite(c.hi_m) && c.lo_m < c.hi_m)) {
      throw std::invalid_argument("category " + c.label + " must satisfy lo < hi");
    }
    if (i > 0 && c.lo_m < categories[i - 1].hi_m) {
      throw std::invalid_argument("categories must be increasing and non-overlapping at " + c.label);
    }
  }
}

std::optional<std::size_t> height_category(double tip_height_m,
                                           std::span<const HeightCategory> categories) {
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (tip_height_m >= categories[i].lo_m && tip_height_m < categories[i].hi_m) return i;
  }
  return std::nullopt;
}

}  // namespace wtl::ingest
