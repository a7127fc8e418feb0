#include "wtl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace wtl::analysis {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Calls fn(first, last) for each run of pairs sharing a stroke_ref.
template <typename Fn>
void for_each_stroke(std::span<const spatial::MatchedPair> pairs, Fn&& fn) {
  std::size_t i = 0;
  while (i < pairs.size()) {
    std::size_t j = i + 1;
    while (j < pairs.size() && pairs[j].stroke_ref == pairs[i].stroke_ref) ++j;
    fn(pairs.subspan(i, j - i));
    i = j;
  }
}

const ingest::StrokeRecord& stroke_of(std::span<const ingest::StrokeRecord> strokes,
                                      const spatial::MatchedPair& p) {
  if (p.stroke_ref >= strokes.size()) throw std::out_of_range("pair refers to a missing stroke");
  return strokes[p.stroke_ref];
}

void check_turbine_ref(std::span<const ingest::TurbineRecord> turbines, const spatial::MatchedPair& p) {
  if (p.turbine_ref >= turbines.size()) throw std::out_of_range("pair refers to a missing turbine");
}

struct RingCounts {
  std::vector<std::uint64_t> inner;
  std::vector<std::uint64_t> annulus;
};

// Inner (d <= d0) and annulus (r_in <= d < r_out, no other turbine within d0)
// counts per turbine over the strokes accepted by `keep`.
template <typename Keep>
RingCounts ring_counts(std::span<const spatial::MatchedPair> pairs, std::span<const ingest::StrokeRecord> strokes,
                       std::span<const ingest::TurbineRecord> turbines, double d0, double r_in, double r_out,
                       Keep&& keep) {
  RingCounts rc{std::vector<std::uint64_t>(turbines.size(), 0), std::vector<std::uint64_t>(turbines.size(), 0)};
  for_each_stroke(pairs, [&](std::span<const spatial::MatchedPair> group) {
    if (!keep(stroke_of(strokes, group.front()))) return;
    for (const auto& p : group) {
      check_turbine_ref(turbines, p);
      if (p.distance_km <= d0) ++rc.inner[p.turbine_ref];
      if (p.distance_km >= r_in && p.distance_km < r_out) {
        const bool excluded = std::any_of(group.begin(), group.end(), [&](const spatial::MatchedPair& q) {
          return q.turbine_ref != p.turbine_ref && q.distance_km < d0;
        });
        if (!excluded) ++rc.annulus[p.turbine_ref];
      }
    }
  });
  return rc;
}

void check_ring(double d0, double r_in, double r_out) {
  if (!(d0 > 0.0)) throw std::invalid_argument("d0 must be > 0");
  if (!(r_in >= 0.0 && r_in < r_out)) throw std::invalid_argument("annulus needs 0 <= r_in < r_out");
}

}  // namespace

SeasonFilter SeasonFilter::all() { return {{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}, SeasonLabel::kAll}; }
SeasonFilter SeasonFilter::warm() { return {{5, 6, 7, 8}, SeasonLabel::kWarm}; }
SeasonFilter SeasonFilter::cold() { return {{11, 12, 1, 2}, SeasonLabel::kCold}; }

SeasonFilter SeasonFilter::custom(std::set<int> months) {
  for (int m : months) {
    if (m < 1 || m > 12) throw std::invalid_argument("month out of range: " + std::to_string(m));
  }
  return {std::move(months), SeasonLabel::kCustom};
}

SeasonFilter SeasonFilter::parse(const std::string& name) {
  if (name == "all") return all();
  if (name == "warm") return warm();
  if (name == "cold") return cold();
  throw std::invalid_argument("unknown season '" + name + "' (expected all, warm or cold)");
}

bool SeasonFilter::contains(Timestamp t) const {
  return label == SeasonLabel::kAll || months.count(month_of(t)) > 0;
}

std::string SeasonFilter::name() const {
  switch (label) {
    case SeasonLabel::kAll: return "all";
    case SeasonLabel::kWarm: return "warm";
    case SeasonLabel::kCold: return "cold";
    case SeasonLabel::kCustom: break;
  }
  std::string s = "months:";
  for (int m : months) s += std::to_string(m) + (m == *months.rbegin() ? "" : ",");
  return s;
}

Window Window::covering(std::span<const ingest::StrokeRecord> strokes) {
  if (strokes.empty()) return {Timestamp{}, Timestamp{}};
  const auto [lo, hi] = std::minmax_element(strokes.begin(), strokes.end(),
                                            [](const auto& a, const auto& b) { return a.time < b.time; });
  return {lo->time, hi->time + std::chrono::milliseconds{1}};
}

double exposure_years(const ingest::TurbineRecord& t, const Window& w) {
  return years_between(std::max(w.start, year_start(t.operational_year)), w.end);
}

std::vector<spatial::MatchedPair> filter_pairs(std::span<const spatial::MatchedPair> pairs,
                                               std::span<const ingest::StrokeRecord> strokes,
                                               std::span<const ingest::TurbineRecord> turbines,
                                               const PairFilter& filter) {
  std::vector<std::optional<std::size_t>> cat;
  if (filter.category) {
    ingest::validate_categories(filter.categories);
    if (*filter.category >= filter.categories.size()) throw std::out_of_range("category index out of range");
    for (const auto& t : turbines) cat.push_back(ingest::height_category(t.tip_height_m, filter.categories));
  }
  std::vector<spatial::MatchedPair> out;
  for (const auto& p : pairs) {
    const auto& s = stroke_of(strokes, p);
    if (!filter.season.contains(s.time)) continue;
    if (filter.window && !filter.window->contains(s.time)) continue;
    if (filter.category) {
      check_turbine_ref(turbines, p);
      if (cat[p.turbine_ref] != filter.category) continue;
    }
    out.push_back(p);
  }
  return out;
}

std::vector<CategoryResult> category_sweep(std::span<const spatial::MatchedPair> pairs,
                                           std::span<const ingest::StrokeRecord> strokes,
                                           std::span<const ingest::TurbineRecord> turbines,
                                           std::span<const ingest::HeightCategory> categories,
                                           const SeasonFilter& season, const SweepOptions& options) {
  ingest::validate_categories(categories);
  const Window window = options.window.value_or(Window::covering(strokes));
  std::vector<CategoryResult> out;
  for (std::size_t c = 0; c < categories.size(); ++c) {
    PairFilter pf;
    pf.season = season;
    pf.window = options.window;
    pf.category = c;
    pf.categories.assign(categories.begin(), categories.end());
    auto subset = filter_pairs(pairs, strokes, turbines, pf);
    if (subset.size() < options.min_pairs) {
      throw InsufficientData("category " + categories[c].label + " has " + std::to_string(subset.size()) +
                             " pairs, needs " + std::to_string(options.min_pairs));
    }
    CategoryResult r;
    r.category = categories[c];
    r.midpoint_m = 0.5 * (categories[c].lo_m + categories[c].hi_m);
    r.n_pairs = subset.size();
    for (const auto& t : turbines) {
      if (ingest::height_category(t.tip_height_m, categories) == c) {
        ++r.n_turbines;
        r.turbine_years += exposure_years(t, window);
      }
    }
    auto fo = options.fit;
    fo.turbine_years = r.turbine_years;
    fo.filter = categories[c].label + "/" + season.name();
    r.fit = fit::iterative_fit(subset, fo);
    r.areas = model::collection_areas(r.fit.result.params);
    r.radii = model::attraction_radii(r.fit.result.params, options.conversion);
    r.scaled_total_strike_point_km =
        model::scaled_total_strike_point_radius(r.fit.result.params, options.conversion, options.ul_scale);
    out.push_back(std::move(r));
  }
  return out;
}

LinearFit regression_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("regression needs equal-length x and y");
  if (x.size() < 2) throw std::invalid_argument("regression needs at least 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("regression needs at least 2 distinct x values");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i) f.residuals.push_back(y[i] - (f.intercept + f.slope * x[i]));
  return f;
}

RadiusRegressions radius_regressions(std::span<const CategoryResult> results) {
  std::vector<double> h, cg, ul;
  for (const auto& r : results) {
    h.push_back(r.midpoint_m);
    cg.push_back(r.radii.cg_strike_point_km * 1000.0);
    ul.push_back(r.radii.ul_strike_point_km * 1000.0);
  }
  return {regression_fit(h, cg), regression_fit(h, ul)};
}

double total_strike_point_radius(std::uint64_t n_inner, std::uint64_t annulus_count, double annulus_area_km2,
                                 const model::ConversionFactors& conv) {
  if (n_inner == 0) return 0.0;
  if (annulus_count == 0) return kNaN;
  const double rho = static_cast<double>(annulus_count) / annulus_area_km2;
  return std::sqrt(conv.strokes_per_strike_point) * std::sqrt(static_cast<double>(n_inner) / (model::kPi * rho));
}

PerTurbineReport per_turbine_stats(std::span<const spatial::MatchedPair> pairs,
                                   std::span<const ingest::StrokeRecord> strokes,
                                   std::span<const ingest::TurbineRecord> turbines,
                                   const PerTurbineOptions& options) {
  check_ring(options.d0_km, options.annulus_inner_km, options.annulus_outer_km);
  model::validate(options.conversion);
  ingest::validate_categories(options.categories);
  const Window window = options.window.value_or(Window::covering(strokes));
  const double ring_area = model::kPi * (options.annulus_outer_km * options.annulus_outer_km -
                                         options.annulus_inner_km * options.annulus_inner_km);

  const auto rc = ring_counts(pairs, strokes, turbines, options.d0_km, options.annulus_inner_km,
                              options.annulus_outer_km, [&](const ingest::StrokeRecord& s) {
                                return window.contains(s.time) && options.season.contains(s.time);
                              });

  PerTurbineReport report;
  for (std::size_t k = 0; k < turbines.size(); ++k) {
    PerTurbineStats st;
    st.turbine_ref = k;
    st.category = ingest::height_category(turbines[k].tip_height_m, options.categories);
    st.n_inner = rc.inner[k];
    st.annulus_count = rc.annulus[k];
    st.exposure_years = exposure_years(turbines[k], window);
    st.annulus_density =
        st.exposure_years > 0.0 ? static_cast<double>(st.annulus_count) / (ring_area * st.exposure_years) : 0.0;
    st.r_total_sp_km = total_strike_point_radius(st.n_inner, st.annulus_count, ring_area, options.conversion);
    st.outlier = std::isnan(st.r_total_sp_km);
    report.turbines.push_back(st);
  }

  for (std::size_t c = 0; c < options.categories.size(); ++c) {
    CategoryCdf cdf;
    cdf.category = options.categories[c];
    std::vector<double> radii;
    for (const auto& st : report.turbines) {
      if (st.category != c) continue;
      if (st.outlier) {
        ++cdf.n_outliers;
        continue;
      }
      radii.push_back(st.r_total_sp_km);
      cdf.pooled_inner += st.n_inner;
      cdf.pooled_annulus += st.annulus_count;
    }
    std::sort(radii.begin(), radii.end());
    cdf.n_turbines = radii.size();
    for (std::size_t i = 0; i < radii.size(); ++i) {
      if (i + 1 < radii.size() && radii[i + 1] == radii[i]) continue;
      cdf.points.push_back({radii[i], static_cast<double>(i + 1) / static_cast<double>(radii.size())});
    }
    cdf.pooled_radius_km =
        total_strike_point_radius(cdf.pooled_inner, cdf.pooled_annulus, ring_area, options.conversion);
    if (!radii.empty() && !std::isnan(cdf.pooled_radius_km)) {
      const auto at = std::upper_bound(radii.begin(), radii.end(), cdf.pooled_radius_km);
      cdf.pooled_percentile = static_cast<double>(at - radii.begin()) / static_cast<double>(radii.size());
    } else {
      cdf.pooled_percentile = kNaN;
    }
    report.categories.push_back(std::move(cdf));
  }
  return report;
}

double chance_inclusion_bound(double d0_km, const model::ModelParams& params) {
  model::validate(params);
  if (!(d0_km >= 0.0)) throw std::invalid_argument("d0 must be >= 0");
  const double lam = params.lambda;
  // d0^2 + 2 lam e^{-d0/lam} (d0 + lam) - 2 lam^2, rearranged to avoid
  // cancellation at small d0
  const double x = d0_km / lam;
  const double bracket = 2.0 * lam * lam * (0.5 * x * x + std::exp(-x) * (x + 1.0) - 1.0);
  const double small = x < 1e-3 ? lam * lam * (x * x * x * (2.0 / 3.0) - x * x * x * x / 4.0) : bracket;
  return small / (2.0 * lam * lam * (1.0 + params.beta));
}

double capture_fraction(double d0_km, double sigma_km) {
  if (!(sigma_km > 0.0)) throw std::invalid_argument("sigma must be > 0");
  if (!(d0_km >= 0.0)) throw std::invalid_argument("d0 must be >= 0");
  if (std::isinf(d0_km)) return 1.0;
  return -std::expm1(-d0_km * d0_km / (2.0 * sigma_km * sigma_km));
}

std::vector<GridCell> seasonal_grid(std::span<const spatial::MatchedPair> pairs,
                                    std::span<const ingest::StrokeRecord> strokes,
                                    std::span<const ingest::TurbineRecord> turbines,
                                    const GridOptions& options) {
  check_ring(options.d0_km, options.annulus_inner_km, options.annulus_outer_km);
  if (!(options.cell_deg > 0.0)) throw std::invalid_argument("cell size must be > 0");
  if (!(options.min_turbine_years >= 0.0)) throw std::invalid_argument("min_turbine_years must be >= 0");
  const Window window = options.window.value_or(Window::covering(strokes));
  const auto warm = SeasonFilter::warm();
  const auto cold = SeasonFilter::cold();
  const auto counts_for = [&](const SeasonFilter& s) {
    return ring_counts(pairs, strokes, turbines, options.d0_km, options.annulus_inner_km, options.annulus_outer_km,
                       [&](const ingest::StrokeRecord& r) { return window.contains(r.time) && s.contains(r.time); });
  };
  const RingCounts w = counts_for(warm);
  const RingCounts c = counts_for(cold);

  std::map<std::pair<int, int>, GridCell> cells;
  for (std::size_t k = 0; k < turbines.size(); ++k) {
    const int li = static_cast<int>(std::floor((turbines[k].latitude + 90.0) / options.cell_deg));
    const int lo = static_cast<int>(std::floor((turbines[k].longitude + 180.0) / options.cell_deg));
    GridCell& g = cells[{li, lo}];
    g.lat_index = li;
    g.lon_index = lo;
    g.lat_south = -90.0 + li * options.cell_deg;
    g.lon_west = -180.0 + lo * options.cell_deg;
    ++g.n_turbines;
    g.turbine_years += exposure_years(turbines[k], window);
    g.warm_annulus += w.annulus[k];
    g.cold_annulus += c.annulus[k];
    g.warm_inner += w.inner[k];
    g.cold_inner += c.inner[k];
  }

  std::vector<GridCell> out;
  for (auto& [key, g] : cells) {
    const auto da = g.warm_annulus + g.cold_annulus;
    const auto di = g.warm_inner + g.cold_inner;
    g.cold_density_frac = da > 0 ? static_cast<double>(g.cold_annulus) / static_cast<double>(da) : kNaN;
    g.cold_strike_frac = di > 0 ? static_cast<double>(g.cold_inner) / static_cast<double>(di) : kNaN;
    g.flagged = da == 0 || di == 0 || g.cold_annulus == 0;
    g.has_ratio = !g.flagged && g.turbine_years >= options.min_turbine_years;
    g.ratio = g.has_ratio ? g.cold_strike_frac / g.cold_density_frac : kNaN;
    out.push_back(g);
  }
  return out;
}

}  // namespace wtl::analysis
