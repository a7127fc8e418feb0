#include "wtl/spatial.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace wtl::spatial {
namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
constexpr std::size_t kMatchChunk = 1 << 14;
constexpr char kPairMagic[8] = {'W', 'T', 'L', 'P', 'A', 'I', 'R', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("truncated pair file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

double geodesic_distance(LatLon a, LatLon b) {
  const double phi1 = a.lat_deg * kDegToRad;
  const double phi2 = b.lat_deg * kDegToRad;
  const double sdphi = std::sin((phi2 - phi1) / 2.0);
  const double sdlam = std::sin((b.lon_deg - a.lon_deg) * kDegToRad / 2.0);
  const double h = sdphi * sdphi + std::cos(phi1) * std::cos(phi2) * sdlam * sdlam;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

bool is_operational(const ingest::TurbineRecord& t, Timestamp when) {
  return when >= year_start(t.operational_year);
}

bool id_less(const std::string& a, const std::string& b) {
  const auto digits = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (digits(a) && digits(b)) {
    const auto strip = [](const std::string& s) {
      const auto nz = s.find_first_not_of('0');
      return nz == std::string::npos ? std::string("0") : s.substr(nz);
    };
    const std::string x = strip(a), y = strip(b);
    if (x.size() != y.size()) return x.size() < y.size();
    return x < y;
  }
  return a < b;
}

TurbineIndex::TurbineIndex(std::span<const ingest::TurbineRecord> turbines)
    : turbines_(turbines.begin(), turbines.end()) {
  if (turbines_.empty()) throw std::invalid_argument("turbine index needs at least one turbine");
  std::vector<Point> pts;
  pts.reserve(turbines_.size());
  coords_.reserve(turbines_.size());
  operational_from_.reserve(turbines_.size());
  for (const auto& t : turbines_) {
    coords_.push_back({t.latitude, t.longitude});
    pts.push_back(to_point(coords_.back()));
    operational_from_.push_back(year_start(t.operational_year));
  }
  tree_ = KdTree<3>(std::move(pts));
}

TurbineIndex::Point TurbineIndex::to_point(LatLon q) {
  const double phi = q.lat_deg * kDegToRad;
  const double lam = q.lon_deg * kDegToRad;
  return {kEarthRadiusKm * std::cos(phi) * std::cos(lam),
          kEarthRadiusKm * std::cos(phi) * std::sin(lam), kEarthRadiusKm * std::sin(phi)};
}

double TurbineIndex::search_radius2(double radius_km) {
  if (!(radius_km >= 0.0)) throw std::invalid_argument("radius must be >= 0");
  const double half_angle = std::min(radius_km / (2.0 * kEarthRadiusKm), 3.14159265358979323846 / 2);
  // The tree prunes on chord length; the slack keeps it a superset of the
  // geodesic test applied afterwards.
  const double chord = 2.0 * kEarthRadiusKm * std::sin(half_angle) + 1e-9;
  return chord * chord;
}

std::vector<Neighbor> TurbineIndex::within(LatLon q, double radius_km) const {
  std::vector<Neighbor> out;
  for_each_within(q, radius_km, [&](std::size_t i, double d) { out.push_back({i, d}); });
  std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) { return a.index < b.index; });
  return out;
}

std::optional<Neighbor> TurbineIndex::nearest(LatLon q, std::optional<Timestamp> when) const {
  const auto p = to_point(q);
  const auto accept = [&](std::size_t i) { return !when || *when >= operational_from_[i]; };
  const auto better = [&](std::size_t a, double, std::size_t b, double) {
    const double da = geodesic_distance(q, coords_[a]);
    const double db = geodesic_distance(q, coords_[b]);
    if (da != db) return da < db;
    return id_less(turbines_[a].turbine_id, turbines_[b].turbine_id);
  };
  const std::size_t best = tree_.nearest(p, accept, better, 1e-9);
  if (best == SIZE_MAX) return std::nullopt;
  return Neighbor{best, geodesic_distance(q, coords_[best])};
}

std::vector<MatchedPair> match_strokes(std::span<const ingest::StrokeRecord> strokes,
                                       const TurbineIndex& index, const MatchOptions& options) {
  if (!(options.radius_km > 0.0)) throw std::invalid_argument("match radius must be > 0");
  const std::size_t n_chunks = (strokes.size() + kMatchChunk - 1) / kMatchChunk;
  std::vector<std::vector<MatchedPair>> chunks(n_chunks);
  std::atomic<std::size_t> next{0};

  const auto work = [&] {
    std::vector<Neighbor> hits;
    for (std::size_t c = next++; c < n_chunks; c = next++) {
      auto& out = chunks[c];
      const std::size_t end = std::min(strokes.size(), (c + 1) * kMatchChunk);
      for (std::size_t s = c * kMatchChunk; s < end; ++s) {
        const auto& stroke = strokes[s];
        hits.clear();
        index.for_each_within({stroke.latitude, stroke.longitude}, options.radius_km,
                              [&](std::size_t i, double d) {
                                if (is_operational(index.turbine(i), stroke.time)) hits.push_back({i, d});
                              });
        if (hits.empty()) continue;
        std::sort(hits.begin(), hits.end(),
                  [](const Neighbor& a, const Neighbor& b) { return a.index < b.index; });
        const Neighbor* best = &hits.front();
        for (const auto& h : hits) {
          if (h.distance_km < best->distance_km ||
              (h.distance_km == best->distance_km &&
               id_less(index.turbine(h.index).turbine_id, index.turbine(best->index).turbine_id))) {
            best = &h;
          }
        }
        for (const auto& h : hits) {
          out.push_back({s, h.index, h.distance_km, best->index, best->distance_km});
        }
      }
    }
  };

  const unsigned n_workers = std::min<std::size_t>(resolve_workers(options.workers), std::max<std::size_t>(n_chunks, 1));
  if (n_workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(work);
  }

  std::size_t total = 0;
  for (const auto& c : chunks) total += c.size();
  std::vector<MatchedPair> pairs;
  pairs.reserve(total);
  for (auto& c : chunks) pairs.insert(pairs.end(), c.begin(), c.end());
  return pairs;
}

std::size_t annulus_counts(std::span<const ingest::StrokeRecord> strokes, std::size_t turbine,
                           const TurbineIndex& index, const AnnulusOptions& options) {
  if (!(options.r_in_km >= 0.0 && options.r_in_km < options.r_out_km)) {
    throw std::invalid_argument("annulus needs 0 <= r_in < r_out");
  }
  if (turbine >= index.size()) throw std::out_of_range("turbine index out of range");
  const auto& t = index.turbine(turbine);
  const LatLon centre{t.latitude, t.longitude};
  std::size_t count = 0;
  for (const auto& s : strokes) {
    if (options.require_operational && !is_operational(t, s.time)) continue;
    const LatLon at{s.latitude, s.longitude};
    const double d = geodesic_distance(centre, at);
    if (d < options.r_in_km || d >= options.r_out_km) continue;
    bool excluded = false;
    if (options.exclusion_d0_km > 0.0) {
      index.for_each_within(at, options.exclusion_d0_km, [&](std::size_t j, double dj) {
        if (j != turbine && dj < options.exclusion_d0_km && is_operational(index.turbine(j), s.time)) {
          excluded = true;
        }
      });
    }
    if (!excluded) ++count;
  }
  return count;
}

void write_pairs(std::ostream& out, std::span<const MatchedPair> pairs) {
  out.write(kPairMagic, sizeof kPairMagic);
  put_u64(out, pairs.size());
  for (const auto& p : pairs) {
    put_u64(out, p.stroke_ref);
    put_u64(out, p.turbine_ref);
    put_u64(out, std::bit_cast<std::uint64_t>(p.distance_km));
    put_u64(out, std::bit_cast<std::uint64_t>(p.nearest_distance_km));
  }
  if (!out) throw std::runtime_error("failed writing pair records");
}

std::vector<MatchedPair> read_pairs(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kPairMagic)) {
    throw std::runtime_error("not a matched-pair run file (bad magic)");
  }
  const std::uint64_t n = get_u64(in);
  std::vector<MatchedPair> pairs;
  pairs.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 24)));
  for (std::uint64_t i = 0; i < n; ++i) {
    MatchedPair p;
    p.stroke_ref = get_u64(in);
    p.turbine_ref = get_u64(in);
    p.distance_km = std::bit_cast<double>(get_u64(in));
    p.nearest_distance_km = std::bit_cast<double>(get_u64(in));
    p.nearest_turbine_ref = p.distance_km == p.nearest_distance_km ? p.turbine_ref : kUnknownRef;
    pairs.push_back(p);
  }
  return pairs;
}

void write_pairs_file(const std::filesystem::path& path, std::span<const MatchedPair> pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write pair file: " + path.string());
  write_pairs(out, pairs);
}

std::vector<MatchedPair> read_pairs_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open pair file: " + path.string());
  return read_pairs(in);
}

}  // namespace wtl::spatial
