#include "wtlstrike/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "wtl/analysis.hpp"
#include "wtl/fit.hpp"
#include "wtl/histogram.hpp"
#include "wtl/synth.hpp"

#ifndef WTL_VERSION
#define WTL_VERSION "0.0.0"
#endif

namespace wtlstrike {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void say(const RunOptions& o, const std::string& msg) {
  if (o.log) *o.log << msg << '\n';
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot write " + p.string());
  return f;
}

class Csv {
 public:
  explicit Csv(const fs::path& p) : out_(open_out(p)) {}

  template <typename... T>
  void row(const T&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
  }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(bool b) { return b ? "1" : "0"; }
  template <typename I>
    requires std::is_integral_v<I>
  static std::string cell(I v) {
    return std::to_string(v);
  }

  std::ofstream out_;
};

void write_json(const fs::path& p, const json& j) {
  auto f = open_out(p);
  f << j.dump(2) << '\n';
}

wtl::ingest::ParseResult<wtl::ingest::StrokeRecord> read_strokes(const RunConfig& c,
                                                                  std::vector<std::string>& warnings) {
  if (fs::exists(c.strokes_path) && fs::file_size(c.strokes_path) == 0) {
    warnings.push_back("stroke file is empty: " + c.strokes_path.string());
    return {};
  }
  auto r = wtl::ingest::parse_strokes_file(c.strokes_path, c.stroke_schema);
  if (r.records.empty()) warnings.push_back("no CG strokes accepted from " + c.strokes_path.string());
  return r;
}

json fit_document(const wtl::fit::IterativeFit& f, const RunConfig& c, const std::string& filter,
                  std::size_t n_pairs) {
  json filt{{"season", c.season}, {"selection", filter}, {"n_pairs", n_pairs}};
  if (c.window) {
    filt["window"] = {{"start", wtl::format_iso8601(c.window->start)}, {"end", wtl::format_iso8601(c.window->end)}};
  }
  json doc = wtl::fit::to_json(f.result, c.conversion, c.ul_scale, filt);
  json hs = json::array();
  for (const auto& h : f.histograms) hs.push_back(h.to_json());
  doc["histograms"] = hs;
  return doc;
}

void write_views(const fs::path& p, const wtl::fit::IterativeFit& f) {
  Csv csv(p);
  csv.row("iteration", "radius_km", "count", "raw_count", "model", "normalized", "density", "surplus",
          "cumulative_surplus");
  for (std::size_t k = 0; k < f.histograms.size(); ++k) {
    const auto& h = f.histograms[k];
    const auto& params = f.passes[k].params;
    const auto v = wtl::hist::derived_views(h, params);
    for (std::size_t i = 0; i < h.size(); ++i) {
      csv.row(k, v.radius_km[i], h.count(i), h.raw_count(i),
              wtl::model::ring_counts(h.bin_center(i), h.bin_width_km(), params), v.normalized[i], v.density[i],
              v.surplus[i], v.cumulative_surplus[i]);
    }
  }
}

wtl::fit::IterativeOptions fit_options(const RunConfig& c) {
  wtl::fit::IterativeOptions o;
  o.n_iter = c.n_iter;
  o.convergence_tol = c.convergence_tol;
  o.lm.poisson_weighted = c.poisson_weighted;
  o.geometry = c.geometry;
  o.workers = c.workers;
  return o;
}

double turbine_years_total(const std::vector<wtl::ingest::TurbineRecord>& ts, const wtl::analysis::Window& w) {
  double y = 0.0;
  for (const auto& t : ts) y += wtl::analysis::exposure_years(t, w);
  return y;
}

// Each command below fills `out` and returns the files it wrote.

void cmd_match(const RunConfig& c, const RunOptions& o, Outcome& out) {
  auto in = load_inputs(c, out.warnings);
  const auto pairs_file = c.output_dir / "pairs.bin";
  wtl::spatial::write_pairs_file(pairs_file, in.pairs);
  out.outputs.push_back(pairs_file);
  say(o, "matched " + std::to_string(in.pairs.size()) + " pairs");
  out.summary = {{"pairs", in.pairs.size()},
                 {"strokes", in.strokes.size()},
                 {"turbines", in.turbines.size()},
                 {"stroke_ingest", in.stroke_report.to_json()},
                 {"turbine_ingest", in.turbine_report.to_json()}};
  const auto summary_file = c.output_dir / "match_summary.json";
  write_json(summary_file, out.summary);
  out.outputs.push_back(summary_file);
}

void cmd_fit(const RunConfig& c, const RunOptions& o, Outcome& out) {
  auto in = load_inputs(c, out.warnings);
  wtl::analysis::PairFilter pf;
  pf.season = wtl::analysis::SeasonFilter::parse(c.season);
  pf.window = c.window;
  const auto subset = wtl::analysis::filter_pairs(in.pairs, in.strokes, in.turbines, pf);
  if (subset.empty()) throw DataError("no matched pairs after filtering");
  auto opts = fit_options(c);
  opts.filter = "all/" + c.season;
  opts.turbine_years = turbine_years_total(in.turbines, c.window.value_or(wtl::analysis::Window::covering(in.strokes)));
  wtl::fit::IterativeFit f;
  try {
    f = wtl::fit::iterative_fit(subset, opts);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("fit: ") + e.what());
  }
  say(o, "fit " + std::string(f.result.converged ? "converged" : "did not converge"));
  const auto fit_file = c.output_dir / "fit.json";
  write_json(fit_file, fit_document(f, c, "all", subset.size()));
  const auto views_file = c.output_dir / "views.csv";
  write_views(views_file, f);
  out.outputs = {fit_file, views_file};
  out.summary = {{"pairs", subset.size()}, {"converged", f.result.converged}};
  if (!f.result.converged) {
    out.exit_code = kExitNotConverged;
    out.warnings.push_back(std::string("fit did not converge (") + wtl::fit::to_string(f.result.status) + ")");
  }
}

void cmd_sweep(const RunConfig& c, const RunOptions& o, Outcome& out) {
  auto in = load_inputs(c, out.warnings);
  wtl::analysis::SweepOptions so;
  so.fit = fit_options(c);
  so.min_pairs = c.min_pairs;
  so.conversion = c.conversion;
  so.ul_scale = c.ul_scale;
  so.window = c.window;
  std::vector<wtl::analysis::CategoryResult> results;
  try {
    results = wtl::analysis::category_sweep(in.pairs, in.strokes, in.turbines, c.categories,
                                            wtl::analysis::SeasonFilter::parse(c.season), so);
  } catch (const wtl::analysis::InsufficientData& e) {
    throw DataError(e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("sweep: ") + e.what());
  }
  const auto table = c.output_dir / "categories.csv";
  {
    Csv csv(table);
    csv.row("category", "lo_m", "hi_m", "midpoint_m", "n_pairs", "n_turbines", "turbine_years", "amplitude", "beta",
            "sigma_km", "lambda_km", "upward_fraction", "eriksson_upward_fraction", "area_cg_km2", "area_ul_km2",
            "area_total_km2", "r_cg_stroke_km", "r_ul_stroke_km", "r_cg_sp_km", "r_ul_sp_km", "r_total_sp_km",
            "r_total_sp_scaled_km", "converged");
    for (const auto& r : results) {
      const auto& p = r.fit.result.params;
      const double eriksson = r.midpoint_m > 78.0 ? wtl::model::eriksson_upward_fraction(r.midpoint_m) / 100.0
                                                  : std::numeric_limits<double>::quiet_NaN();
      csv.row(r.category.label, r.category.lo_m, r.category.hi_m, r.midpoint_m, r.n_pairs, r.n_turbines,
              r.turbine_years, p.amplitude, p.beta, p.sigma, p.lambda, p.beta / (1.0 + p.beta), eriksson,
              r.areas.cg_km2, r.areas.ul_km2, r.areas.total_km2, r.radii.cg_stroke_km, r.radii.ul_stroke_km,
              r.radii.cg_strike_point_km, r.radii.ul_strike_point_km, r.radii.total_strike_point_km,
              r.scaled_total_strike_point_km, r.fit.result.converged);
    }
  }
  json fits = json::array();
  bool all_converged = true;
  for (const auto& r : results) {
    fits.push_back({{"category", r.category.label},
                    {"lo_m", r.category.lo_m},
                    {"hi_m", r.category.hi_m},
                    {"fit", fit_document(r.fit, c, r.category.label, r.n_pairs)}});
    all_converged = all_converged && r.fit.result.converged;
  }
  json reg = nullptr;
  if (results.size() >= 2) {
    const auto rr = wtl::analysis::radius_regressions(results);
    reg = {{"cg_sp_m", {{"intercept", rr.cg.intercept}, {"slope", rr.cg.slope}, {"residuals", rr.cg.residuals}}},
           {"ul_sp_m", {{"intercept", rr.tul.intercept}, {"slope", rr.tul.slope}, {"residuals", rr.tul.residuals}}}};
  }
  const auto sweep_file = c.output_dir / "sweep.json";
  write_json(sweep_file, {{"season", c.season}, {"categories", fits}, {"regression", reg}});
  out.outputs = {table, sweep_file};
  out.summary = {{"categories", results.size()}, {"converged", all_converged}};
  say(o, "swept " + std::to_string(results.size()) + " categories");
  if (!all_converged) {
    out.exit_code = kExitNotConverged;
    out.warnings.push_back("at least one category fit did not converge");
  }
}

void cmd_turbines(const RunConfig& c, const RunOptions& o, Outcome& out) {
  auto in = load_inputs(c, out.warnings);
  wtl::analysis::PerTurbineOptions po;
  po.d0_km = c.d0_km;
  po.annulus_inner_km = c.annulus_inner_km;
  po.annulus_outer_km = c.annulus_outer_km;
  po.conversion = c.conversion;
  po.season = wtl::analysis::SeasonFilter::parse(c.season);
  po.window = c.window;
  po.categories = c.categories;
  const auto rep = wtl::analysis::per_turbine_stats(in.pairs, in.strokes, in.turbines, po);

  const auto per_file = c.output_dir / "per_turbine.csv";
  {
    Csv csv(per_file);
    csv.row("turbine_id", "latitude", "longitude", "tip_height_m", "category", "n_inner", "annulus_count",
            "annulus_density", "r_total_sp_km", "exposure_years", "outlier");
    for (const auto& s : rep.turbines) {
      const auto& t = in.turbines[s.turbine_ref];
      csv.row(t.turbine_id, t.latitude, t.longitude, t.tip_height_m,
              s.category ? c.categories[*s.category].label : std::string("UNBINNED"), s.n_inner, s.annulus_count,
              s.annulus_density, s.r_total_sp_km, s.exposure_years, s.outlier);
    }
  }
  const auto cdf_file = c.output_dir / "cdf.csv";
  const auto pooled_file = c.output_dir / "pooled.csv";
  {
    Csv cdf(cdf_file);
    Csv pooled(pooled_file);
    cdf.row("category", "radius_km", "cumulative_fraction");
    pooled.row("category", "n_turbines", "n_outliers", "pooled_inner", "pooled_annulus", "pooled_radius_km",
               "pooled_percentile");
    for (const auto& k : rep.categories) {
      for (const auto& pt : k.points) cdf.row(k.category.label, pt.radius_km, pt.fraction);
      pooled.row(k.category.label, k.n_turbines, k.n_outliers, k.pooled_inner, k.pooled_annulus, k.pooled_radius_km,
                 k.pooled_percentile);
    }
  }
  std::size_t outliers = 0;
  for (const auto& s : rep.turbines) outliers += s.outlier;
  if (outliers > 0) out.warnings.push_back(std::to_string(outliers) + " turbine(s) with inner strokes but an empty annulus");
  out.outputs = {per_file, cdf_file, pooled_file};
  out.summary = {{"turbines", rep.turbines.size()}, {"outliers", outliers}};
  say(o, "per-turbine statistics for " + std::to_string(rep.turbines.size()) + " turbines");
}

void cmd_seasonal(const RunConfig& c, const RunOptions& o, Outcome& out) {
  auto in = load_inputs(c, out.warnings);
  wtl::analysis::GridOptions go;
  go.cell_deg = c.grid_cell_deg;
  go.min_turbine_years = c.grid_min_turbine_years;
  go.d0_km = c.d0_km;
  go.annulus_inner_km = c.annulus_inner_km;
  go.annulus_outer_km = c.annulus_outer_km;
  go.window = c.window;
  const auto cells = wtl::analysis::seasonal_grid(in.pairs, in.strokes, in.turbines, go);
  const auto grid_file = c.output_dir / "grid.csv";
  {
    Csv csv(grid_file);
    csv.row("lat_south", "lon_west", "lat_index", "lon_index", "n_turbines", "turbine_years", "warm_annulus",
            "cold_annulus", "warm_inner", "cold_inner", "cold_density_frac", "cold_strike_frac", "ratio", "has_ratio",
            "flagged");
    for (const auto& g : cells) {
      csv.row(g.lat_south, g.lon_west, g.lat_index, g.lon_index, g.n_turbines, g.turbine_years, g.warm_annulus,
              g.cold_annulus, g.warm_inner, g.cold_inner, g.cold_density_frac, g.cold_strike_frac, g.ratio,
              g.has_ratio, g.flagged);
    }
  }
  out.outputs = {grid_file};
  out.summary = {{"cells", cells.size()}};
  say(o, "grid with " + std::to_string(cells.size()) + " occupied cells");
}

void cmd_synth(const RunConfig& c, const RunOptions& o, Outcome& out) {
  const auto data = wtl::synth::generate(*c.synth, c.workers);
  wtl::synth::write_dataset(c.output_dir, *c.synth, data);
  out.outputs = {c.output_dir / "strokes.csv", c.output_dir / "turbines.csv", c.output_dir / "truth.json"};
  out.summary = {{"strokes", data.strokes.size()}, {"field_points", data.field_points}};
  say(o, "generated " + std::to_string(data.strokes.size()) + " strokes");
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

Inputs load_inputs(const RunConfig& c, std::vector<std::string>& warnings) {
  Inputs in;
  auto strokes = read_strokes(c, warnings);
  in.strokes = std::move(strokes.records);
  in.stroke_report = std::move(strokes.report);
  auto turbines = wtl::ingest::parse_turbines_file(c.turbines_path, c.turbine_schema);
  in.turbines = std::move(turbines.records);
  in.turbine_report = std::move(turbines.report);
  if (in.turbines.empty()) throw DataError("no usable turbines in " + c.turbines_path.string());

  if (c.pairs_path) {
    in.pairs = wtl::spatial::read_pairs_file(*c.pairs_path);
    in.pairs_from_file = true;
    for (const auto& p : in.pairs) {
      if (p.stroke_ref >= in.strokes.size() || p.turbine_ref >= in.turbines.size()) {
        throw DataError("pair file " + c.pairs_path->string() + " does not belong to these inputs");
      }
    }
  } else {
    const wtl::spatial::TurbineIndex index(in.turbines);
    in.pairs = wtl::spatial::match_strokes(in.strokes, index, {c.match_radius_km, c.workers});
  }
  if (in.pairs.empty()) warnings.push_back("no stroke lies within the match radius of a turbine");
  return in;
}

Outcome run_command(Command command, const RunConfig& config, const RunOptions& options) {
  validate_for(config, command);
  fs::create_directories(config.output_dir);
  Outcome out;
  try {
    switch (command) {
      case Command::kMatch: cmd_match(config, options, out); break;
      case Command::kFit: cmd_fit(config, options, out); break;
      case Command::kSweep: cmd_sweep(config, options, out); break;
      case Command::kTurbines: cmd_turbines(config, options, out); break;
      case Command::kSeasonal: cmd_seasonal(config, options, out); break;
      case Command::kSynth: cmd_synth(config, options, out); break;
    }
  } catch (const wtl::ingest::IngestError& e) {
    throw DataError(e.what());
  }

  json inputs = json::object();
  if (command != Command::kSynth) {
    inputs[config.strokes_path.string()] = sha256_file(config.strokes_path);
    inputs[config.turbines_path.string()] = sha256_file(config.turbines_path);
    if (config.pairs_path) inputs[config.pairs_path->string()] = sha256_file(*config.pairs_path);
  }
  json outputs = json::object();
  for (const auto& p : out.outputs) outputs[p.filename().string()] = sha256_file(p);
  const json manifest{{"artifact", {{"name", "wtlstrike"}, {"version", WTL_VERSION}}},
                      {"command", to_string(command)},
                      {"config", config.to_json()},
                      {"inputs", inputs},
                      {"outputs", outputs},
                      {"summary", out.summary},
                      {"warnings", out.warnings},
                      {"exit_code", out.exit_code}};
  const auto manifest_file = config.output_dir / (std::string(to_string(command)) + "_manifest.json");
  write_json(manifest_file, manifest);
  out.outputs.push_back(manifest_file);
  return out;
}

}  // namespace wtlstrike
