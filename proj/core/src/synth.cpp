#include "wtl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "parallel.hpp"
#include "wtl/kdtree.hpp"
#include "wtl/model.hpp"

namespace wtl::synth {
namespace {

using model::kPi;

constexpr std::size_t kBlock = std::size_t{1} << 16;

enum Phase : std::uint64_t { kPhaseCount = 1, kPhaseField = 2, kPhaseUpward = 3, kPhaseWell = 4 };

struct MonthSlot {
  Timestamp begin;
  Timestamp end;
};

// Calendar months overlapping [start, end), clipped, with sampling weights.
class TimeSampler {
 public:
  TimeSampler(Timestamp start, Timestamp end, const MonthWeights& weights) {
    using namespace std::chrono;
    const year_month_day first{floor<days>(start)};
    year_month ym{first.year(), first.month()};
    std::vector<double> w;
    for (;;) {
      const Timestamp a = sys_days{ym / 1};
      if (a >= end) break;
      const year_month next = ym + months{1};
      const Timestamp b = sys_days{next / 1};
      const Timestamp lo = std::max(a, start);
      const Timestamp hi = std::min(b, end);
      const double mw = weights[static_cast<unsigned>(ym.month()) - 1];
      if (hi > lo && mw > 0.0) {
        slots_.push_back({lo, hi});
        w.push_back(mw * static_cast<double>((hi - lo).count()));
      }
      ym = next;
    }
    if (slots_.empty()) throw std::invalid_argument("month weights select no time inside the window");
    pick_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }

  Timestamp operator()(std::mt19937_64& rng) const {
    const MonthSlot& s = slots_[pick_(rng)];
    std::uniform_int_distribution<std::int64_t> ms(0, (s.end - s.begin).count() - 1);
    return s.begin + std::chrono::milliseconds{ms(rng)};
  }

 private:
  std::vector<MonthSlot> slots_;
  mutable std::discrete_distribution<std::size_t> pick_;
};

double peak_current(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(5.0, 40.0);
  return -std::round(u(rng) * 10.0) / 10.0;
}

MonthWeights weights_from_json(const nlohmann::json& j) {
  MonthWeights w{};
  if (!j.is_array() || j.size() != 12) throw std::invalid_argument("month weights need 12 entries");
  for (std::size_t i = 0; i < 12; ++i) w[i] = j.at(i).get<double>();
  return w;
}

struct Block {
  std::vector<ingest::StrokeRecord> strokes;
  std::vector<StrokeTruth> labels;
  std::vector<std::uint64_t> captured;  // per turbine
};

}  // namespace

std::mt19937_64 keyed_engine(std::uint64_t seed, std::uint64_t phase, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(phase), static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

spatial::LatLon plane_to_latlon(spatial::LatLon reference, double x_km, double y_km) {
  const double rho = std::hypot(x_km, y_km);
  if (rho == 0.0) return reference;
  const double c = rho / spatial::kEarthRadiusKm;
  const double az = std::atan2(x_km, y_km);
  const double phi0 = reference.lat_deg * kPi / 180.0;
  const double lam0 = reference.lon_deg * kPi / 180.0;
  const double phi = std::asin(std::sin(phi0) * std::cos(c) + std::cos(phi0) * std::sin(c) * std::cos(az));
  const double lam = lam0 + std::atan2(std::sin(az) * std::sin(c) * std::cos(phi0),
                                       std::cos(c) - std::sin(phi0) * std::sin(phi));
  double lon = lam * 180.0 / kPi;
  if (lon > 180.0) lon -= 360.0;
  if (lon < -180.0) lon += 360.0;
  return {phi * 180.0 / kPi, lon};
}

const TruthParams& SynthConfig::truth_for(std::size_t turbine) const {
  return turbine_truth.empty() ? truth : turbine_truth.at(turbine);
}

void SynthConfig::validate() const {
  const auto fail = [](const std::string& m) { throw std::invalid_argument("synth config: " + m); };
  if (!(background_density > 0.0) || !std::isfinite(background_density)) fail("background_density must be > 0");
  if (!(domain_radius_km > 0.0) || !std::isfinite(domain_radius_km)) fail("domain_radius_km must be > 0");
  if (!(ul_detection_efficiency >= 0.0 && ul_detection_efficiency <= 1.0)) {
    fail("ul_detection_efficiency must be in [0, 1]");
  }
  if (turbines.empty()) fail("at least one turbine is required");
  if (!turbine_truth.empty() && turbine_truth.size() != turbines.size()) {
    fail("turbine_truth must have one entry per turbine");
  }
  const auto check_truth = [&](const TruthParams& t) {
    if (!(t.beta >= 0.0) || !(t.sigma_km >= 0.0) || !(t.lambda_km >= 0.0) || !std::isfinite(t.beta) ||
        !std::isfinite(t.sigma_km) || !std::isfinite(t.lambda_km)) {
      fail("truth parameters must be finite and >= 0");
    }
  };
  check_truth(truth);
  for (const auto& t : turbine_truth) check_truth(t);
  for (const auto& t : turbines) {
    if (!(t.tip_height_m > 0.0) || !std::isfinite(t.x_km) || !std::isfinite(t.y_km)) fail("invalid turbine");
  }
  if (window_end <= window_start) fail("window_end must be after window_start");
  for (const auto* w : {&field_months, &ul_months}) {
    if (std::any_of(w->begin(), w->end(), [](double v) { return !(v >= 0.0) || !std::isfinite(v); })) {
      fail("month weights must be finite and >= 0");
    }
  }
  if (std::abs(reference.lat_deg) > 85.0 || std::abs(reference.lon_deg) > 180.0) fail("invalid reference point");
}

nlohmann::json SynthConfig::to_json() const {
  const auto truth_json = [](const TruthParams& t) {
    return nlohmann::json{{"beta", t.beta}, {"sigma_km", t.sigma_km}, {"lambda_km", t.lambda_km}};
  };
  nlohmann::json tj = nlohmann::json::array();
  for (const auto& t : turbines) {
    tj.push_back({{"x_km", t.x_km}, {"y_km", t.y_km}, {"tip_height_m", t.tip_height_m},
                  {"operational_year", t.operational_year}});
  }
  nlohmann::json per = nlohmann::json::array();
  for (const auto& t : turbine_truth) per.push_back(truth_json(t));
  return {{"rng_seed", rng_seed},
          {"background_density", background_density},
          {"reference", {{"lat", reference.lat_deg}, {"lon", reference.lon_deg}}},
          {"turbines", tj},
          {"truth", truth_json(truth)},
          {"turbine_truth", per},
          {"domain_radius_km", domain_radius_km},
          {"region", region == FieldRegion::kDisk ? "disk" : "turbine_disks"},
          {"ul_detection_efficiency", ul_detection_efficiency},
          {"window_start", format_iso8601(window_start)},
          {"window_end", format_iso8601(window_end)},
          {"field_months", field_months},
          {"ul_months", ul_months}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  const auto truth_from = [](const nlohmann::json& t, TruthParams base) {
    base.beta = t.value("beta", base.beta);
    base.sigma_km = t.value("sigma_km", base.sigma_km);
    base.lambda_km = t.value("lambda_km", base.lambda_km);
    return base;
  };
  c.rng_seed = j.value("rng_seed", c.rng_seed);
  c.background_density = j.value("background_density", c.background_density);
  if (j.contains("reference")) {
    c.reference = {j.at("reference").at("lat").get<double>(), j.at("reference").at("lon").get<double>()};
  }
  if (j.contains("turbines")) {
    c.turbines.clear();
    for (const auto& t : j.at("turbines")) {
      TurbineSpec s;
      s.x_km = t.value("x_km", 0.0);
      s.y_km = t.value("y_km", 0.0);
      s.tip_height_m = t.value("tip_height_m", s.tip_height_m);
      s.operational_year = t.value("operational_year", s.operational_year);
      c.turbines.push_back(s);
    }
  }
  if (j.contains("truth")) c.truth = truth_from(j.at("truth"), c.truth);
  if (j.contains("turbine_truth")) {
    for (const auto& t : j.at("turbine_truth")) c.turbine_truth.push_back(truth_from(t, c.truth));
  }
  c.domain_radius_km = j.value("domain_radius_km", c.domain_radius_km);
  if (j.contains("region")) {
    const auto r = j.at("region").get<std::string>();
    if (r == "disk") {
      c.region = FieldRegion::kDisk;
    } else if (r == "turbine_disks") {
      c.region = FieldRegion::kTurbineDisks;
    } else {
      throw std::invalid_argument("synth config: unknown region '" + r + "'");
    }
  }
  c.ul_detection_efficiency = j.value("ul_detection_efficiency", c.ul_detection_efficiency);
  const auto instant = [&](const char* key, Timestamp def) {
    if (!j.contains(key)) return def;
    auto t = parse_iso8601(j.at(key).get<std::string>());
    if (!t) throw std::invalid_argument(std::string("synth config: bad timestamp in ") + key);
    return *t;
  };
  c.window_start = instant("window_start", c.window_start);
  c.window_end = instant("window_end", c.window_end);
  if (j.contains("field_months")) c.field_months = weights_from_json(j.at("field_months"));
  if (j.contains("ul_months")) c.ul_months = weights_from_json(j.at("ul_months"));
  c.validate();
  return c;
}

SynthOutput generate(const SynthConfig& config, unsigned workers) {
  config.validate();
  const std::size_t nt = config.turbines.size();
  const double rd = config.domain_radius_km;

  std::vector<spatial::KdTree<2>::Point> pts;
  for (const auto& t : config.turbines) pts.push_back({t.x_km, t.y_km});
  const spatial::KdTree<2> tree(pts);

  // sampling region: disk, or the bounding box of the turbine disks
  double x0 = -rd, x1 = rd, y0 = -rd, y1 = rd;
  double area = kPi * rd * rd;
  if (config.region == FieldRegion::kTurbineDisks) {
    x0 = y0 = std::numeric_limits<double>::infinity();
    x1 = y1 = -std::numeric_limits<double>::infinity();
    for (const auto& t : config.turbines) {
      x0 = std::min(x0, t.x_km - rd);
      x1 = std::max(x1, t.x_km + rd);
      y0 = std::min(y0, t.y_km - rd);
      y1 = std::max(y1, t.y_km + rd);
    }
    area = (x1 - x0) * (y1 - y0);
  }
  const auto inside_region = [&](double x, double y) {
    bool hit = false;
    tree.for_each_within({x, y}, rd * rd, [&](std::size_t) { hit = true; });
    return hit;
  };

  auto count_rng = keyed_engine(config.rng_seed, kPhaseCount, 0);
  std::poisson_distribution<std::uint64_t> count_dist(config.background_density * area);
  const std::uint64_t n_candidates = count_dist(count_rng);

  const TimeSampler field_time(config.window_start, config.window_end, config.field_months);
  const TimeSampler ul_time(config.window_start, config.window_end, config.ul_months);

  const auto nearest_turbine = [&](double x, double y, double& d) {
    const std::size_t k = tree.nearest(
        {x, y}, [](std::size_t) { return true; },
        [](std::size_t a, double da, std::size_t b, double db) { return da < db || (da == db && a < b); });
    d = std::sqrt(spatial::KdTree<2>::dist2(pts[k], {x, y}));
    return k;
  };

  const std::size_t n_blocks = (n_candidates + kBlock - 1) / kBlock;
  std::vector<Block> blocks(n_blocks);
  std::vector<std::uint64_t> kept(n_blocks, 0);
  detail::parallel_for(n_blocks, workers, [&](std::size_t b) {
    auto rng = keyed_engine(config.rng_seed, kPhaseField, b);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Block& out = blocks[b];
    out.captured.assign(nt, 0);
    const std::uint64_t lo = b * kBlock;
    const std::uint64_t n = std::min<std::uint64_t>(kBlock, n_candidates - lo);
    for (std::uint64_t i = 0; i < n; ++i) {
      double x, y;
      if (config.region == FieldRegion::kDisk) {
        const double r = rd * std::sqrt(u01(rng));
        const double th = 2.0 * kPi * u01(rng);
        x = r * std::cos(th);
        y = r * std::sin(th);
      } else {
        x = x0 + (x1 - x0) * u01(rng);
        y = y0 + (y1 - y0) * u01(rng);
        if (!inside_region(x, y)) continue;
      }
      ++kept[b];
      double d = 0.0;
      const std::size_t k = nearest_turbine(x, y, d);
      const TruthParams& tp = config.truth_for(k);
      StrokeTruth label;
      const double capture = tp.lambda_km > 0.0 ? std::exp(-d / tp.lambda_km) : 0.0;
      if (u01(rng) < capture) {
        x = pts[k][0];
        y = pts[k][1];
        label = {Label::kCaptured, k};
        ++out.captured[k];
      }
      x += tp.sigma_km * gauss(rng);
      y += tp.sigma_km * gauss(rng);
      ingest::StrokeRecord s;
      const auto ll = plane_to_latlon(config.reference, x, y);
      s.latitude = ll.lat_deg;
      s.longitude = ll.lon_deg;
      s.time = field_time(rng);
      s.peak_current_ka = peak_current(rng);
      out.strokes.push_back(s);
      out.labels.push_back(label);
    }
  });

  SynthOutput result;
  result.field_area_km2 = config.region == FieldRegion::kDisk ? area : 0.0;
  result.turbine_truth.assign(nt, {});
  for (auto& b : blocks) {
    result.strokes.insert(result.strokes.end(), b.strokes.begin(), b.strokes.end());
    result.labels.insert(result.labels.end(), b.labels.begin(), b.labels.end());
    for (std::size_t k = 0; k < nt; ++k) result.turbine_truth[k].captured += b.captured[k];
  }
  for (auto v : kept) result.field_points += v;

  // upward strokes, one stream per turbine
  std::vector<Block> ul(nt);
  detail::parallel_for(nt, workers, [&](std::size_t k) {
    auto rng = keyed_engine(config.rng_seed, kPhaseUpward, k);
    const TruthParams& tp = config.truth_for(k);
    const double mean = tp.beta * 2.0 * kPi * tp.lambda_km * tp.lambda_km * config.background_density;
    std::uint64_t n = 0;
    if (mean > 0.0) n = std::poisson_distribution<std::uint64_t>(mean)(rng);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Block& out = ul[k];
    out.captured.assign(1, n);
    for (std::uint64_t i = 0; i < n; ++i) {
      const bool detected = u01(rng) < config.ul_detection_efficiency;
      const double x = pts[k][0] + tp.sigma_km * gauss(rng);
      const double y = pts[k][1] + tp.sigma_km * gauss(rng);
      const Timestamp t = ul_time(rng);
      const double ipk = peak_current(rng);
      if (!detected) continue;
      ingest::StrokeRecord s;
      const auto ll = plane_to_latlon(config.reference, x, y);
      s.latitude = ll.lat_deg;
      s.longitude = ll.lon_deg;
      s.time = t;
      s.peak_current_ka = ipk;
      out.strokes.push_back(s);
      out.labels.push_back({Label::kUpward, k});
    }
  });
  for (std::size_t k = 0; k < nt; ++k) {
    result.turbine_truth[k].upward_generated = ul[k].captured[0];
    result.turbine_truth[k].upward_detected = ul[k].strokes.size();
    result.strokes.insert(result.strokes.end(), ul[k].strokes.begin(), ul[k].strokes.end());
    result.labels.insert(result.labels.end(), ul[k].labels.begin(), ul[k].labels.end());
  }

  for (std::size_t k = 0; k < nt; ++k) {
    const auto& t = config.turbines[k];
    const auto ll = plane_to_latlon(config.reference, t.x_km, t.y_km);
    ingest::TurbineRecord r;
    r.turbine_id = std::to_string(k + 1);
    r.latitude = ll.lat_deg;
    r.longitude = ll.lon_deg;
    r.tip_height_m = t.tip_height_m;
    r.operational_year = t.operational_year;
    r.location_confidence = 3;
    result.turbines.push_back(r);
  }
  return result;
}

nlohmann::json SynthOutput::truth_json(const SynthConfig& config) const {
  std::vector<int> label_codes;
  std::vector<std::int64_t> label_turbines;
  label_codes.reserve(labels.size());
  label_turbines.reserve(labels.size());
  for (const auto& l : labels) {
    label_codes.push_back(static_cast<int>(l.label));
    label_turbines.push_back(l.turbine == spatial::kUnknownRef ? -1 : static_cast<std::int64_t>(l.turbine));
  }
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t k = 0; k < turbine_truth.size(); ++k) {
    const auto& tp = config.truth_for(k);
    per.push_back({{"turbine_id", turbines[k].turbine_id},
                   {"captured", turbine_truth[k].captured},
                   {"upward_generated", turbine_truth[k].upward_generated},
                   {"upward_detected", turbine_truth[k].upward_detected},
                   {"expected_captured", config.background_density * 2.0 * kPi * tp.lambda_km * tp.lambda_km}});
  }
  return {{"config", config.to_json()},
          {"field_points", field_points},
          {"label_legend", {{"0", "ground"}, {"1", "captured"}, {"2", "upward"}}},
          {"labels", label_codes},
          {"label_turbine", label_turbines},
          {"turbines", per}};
}

void write_dataset(const std::filesystem::path& dir, const SynthConfig& config, const SynthOutput& out) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "strokes.csv", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir / "strokes.csv").string());
    ingest::write_strokes(f, out.strokes);
  }
  {
    std::ofstream f(dir / "turbines.csv", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir / "turbines.csv").string());
    ingest::write_turbines(f, out.turbines);
  }
  std::ofstream f(dir / "truth.json", std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + (dir / "truth.json").string());
  f << out.truth_json(config).dump() << '\n';
}

std::vector<RadialProfile> monte_carlo_well(const std::vector<double>& sigma_values_km, double lambda_km,
                                            const MonteCarloOptions& options) {
  if (!(lambda_km > 0.0)) throw std::invalid_argument("lambda must be > 0");
  if (options.n_samples < 100'000) throw std::invalid_argument("monte_carlo_well needs n_samples >= 1e5");
  const double rd = options.domain_radius_km;
  const double dr = options.bin_width_km;
  if (!(rd > 0.0) || !(dr > 0.0) || dr > rd || !(options.guard_sigmas >= 0.0)) throw std::invalid_argument("invalid Monte Carlo geometry");
  const auto n_bins = static_cast<std::size_t>(std::floor(rd / dr + 1e-9));
  const double lam = lambda_km;

  // integral of (1 - exp(-r/lambda)) dA over [a, b]
  const auto well_integral = [&](double a, double b) {
    const auto prim = [&](double r) { return kPi * r * r + 2.0 * kPi * lam * std::exp(-r / lam) * (r + lam); };
    return prim(b) - prim(a);
  };
  const double n = static_cast<double>(options.n_samples);

  std::vector<RadialProfile> out;
  for (std::size_t si = 0; si < sigma_values_km.size(); ++si) {
    const double sigma = sigma_values_km[si];
    if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
    // sample beyond the profiled disk so scatter across its edge is balanced
    const double rs = rd + options.guard_sigmas * sigma;
    const double total = well_integral(0.0, rs);
    auto rng = keyed_engine(options.seed, kPhaseWell, si);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::uint64_t> counts(n_bins, 0);
    std::uint64_t inner = 0;
    const double floor_r = 0.5 * sigma;
    for (std::size_t i = 0; i < options.n_samples;) {
      const double r = rs * std::sqrt(u01(rng));
      const double th = 2.0 * kPi * u01(rng);
      if (u01(rng) >= -std::expm1(-r / lam)) continue;
      ++i;
      const double x = r * std::cos(th) + sigma * gauss(rng);
      const double y = r * std::sin(th) + sigma * gauss(rng);
      const double rr = std::hypot(x, y);
      if (rr < floor_r) ++inner;
      const auto bin = static_cast<std::size_t>(rr / dr);
      if (bin < n_bins) ++counts[bin];
    }
    RadialProfile p;
    p.sigma_km = sigma;
    for (std::size_t b = 0; b < n_bins; ++b) {
      const double a = static_cast<double>(b) * dr;
      const double c = a + dr;
      const double ring = kPi * (c * c - a * a);
      const double scale = total / (n * ring);  // counts -> density relative to far field
      p.lower_km.push_back(a);
      p.radius_km.push_back(a + 0.5 * dr);
      p.density.push_back(static_cast<double>(counts[b]) * scale);
      p.stderr_.push_back(std::sqrt(static_cast<double>(counts[b])) * scale);
      p.expected.push_back(well_integral(a, c) / ring);
    }
    if (floor_r > 0.0) {
      const double scale = total / (n * kPi * floor_r * floor_r);
      p.floor = static_cast<double>(inner) * scale;
      p.floor_stderr = std::sqrt(static_cast<double>(inner)) * scale;
    } else {
      p.floor = p.density.empty() ? 0.0 : p.density.front();
      p.floor_stderr = p.stderr_.empty() ? 0.0 : p.stderr_.front();
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace wtl::synth
