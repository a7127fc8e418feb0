#include "wtlstrike/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace wtlstrike {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Typed access to one JSON object that rejects keys it was not asked about.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  Section section(const std::string& key) { return Section(raw(key), path_ + "." + key); }

  double number(const std::string& key, double def) {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(where(key) + " must be finite");
    return d;
  }

  double positive(const std::string& key, double def) {
    const double d = number(key, def);
    if (!(d > 0.0)) throw ConfigError(where(key) + " must be > 0");
    return d;
  }

  std::int64_t integer(const std::string& key, std::int64_t def, std::int64_t lo, std::int64_t hi) {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(where(key) + " must be an integer");
    const auto i = v.get<std::int64_t>();
    if (i < lo || i > hi) {
      throw ConfigError(where(key) + " must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return i;
  }

  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    if (!j_.at(key).is_boolean()) throw ConfigError(where(key) + " must be true or false");
    return j_.at(key).get<bool>();
  }

  std::string string(const std::string& key, const std::string& def) {
    if (!has(key)) return def;
    if (!j_.at(key).is_string()) throw ConfigError(where(key) + " must be a string");
    return j_.at(key).get<std::string>();
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown key " + where(k));
    }
  }

  std::string where(const std::string& key = "") const { return key.empty() ? path_ : path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

wtl::Timestamp instant(Section& s, const std::string& key) {
  const auto text = s.string(key, "");
  const auto t = wtl::parse_iso8601(text);
  if (!t) throw ConfigError(s.where(key) + " must be an ISO-8601 instant with a UTC offset");
  return *t;
}

}  // namespace

const char* to_string(Command c) {
  switch (c) {
    case Command::kMatch: return "match";
    case Command::kFit: return "fit";
    case Command::kSweep: return "sweep";
    case Command::kTurbines: return "turbines";
    case Command::kSeasonal: return "seasonal";
    case Command::kSynth: return "synth";
  }
  return "unknown";
}

RunConfig parse_config(const json& j, const fs::path& base_dir) {
  RunConfig c;
  Section root(j, "config");
  try {
    if (root.has("inputs")) {
      auto in = root.section("inputs");
      if (in.has("strokes")) c.strokes_path = resolve(base_dir, in.string("strokes", ""));
      if (in.has("turbines")) c.turbines_path = resolve(base_dir, in.string("turbines", ""));
      if (in.has("pairs")) c.pairs_path = resolve(base_dir, in.string("pairs", ""));
      in.finish();
    }
    if (root.has("schema")) {
      auto sc = root.section("schema");
      if (sc.has("strokes")) c.stroke_schema = wtl::ingest::StrokeSchema::from_json(sc.raw("strokes"));
      if (sc.has("turbines")) c.turbine_schema = wtl::ingest::TurbineSchema::from_json(sc.raw("turbines"));
      sc.finish();
    }
    if (root.has("window")) {
      auto w = root.section("window");
      wtl::analysis::Window win{instant(w, "start"), instant(w, "end")};
      if (win.end <= win.start) throw ConfigError("config.window.end must be after start");
      c.window = win;
      w.finish();
    }
    if (root.has("match")) {
      auto m = root.section("match");
      c.match_radius_km = m.positive("radius_km", c.match_radius_km);
      m.finish();
    }
    if (root.has("histogram")) {
      auto h = root.section("histogram");
      c.geometry.bin_width_km = h.positive("bin_width_km", c.geometry.bin_width_km);
      c.geometry.max_radius_km = h.positive("max_radius_km", c.geometry.max_radius_km);
      h.finish();
    }
    if (root.has("fit")) {
      auto f = root.section("fit");
      c.n_iter = static_cast<int>(f.integer("n_iter", c.n_iter, 0, 100));
      c.convergence_tol = f.positive("convergence_tol", c.convergence_tol);
      c.poisson_weighted = f.boolean("poisson_weighted", c.poisson_weighted);
      c.min_pairs = static_cast<std::size_t>(f.integer("min_pairs", static_cast<std::int64_t>(c.min_pairs), 1,
                                                       std::numeric_limits<std::int64_t>::max()));
      f.finish();
    }
    if (root.has("categories")) {
      const json& cats = root.raw("categories");
      if (!cats.is_array() || cats.empty()) throw ConfigError("config.categories must be a non-empty array");
      c.categories.clear();
      for (std::size_t i = 0; i < cats.size(); ++i) {
        Section s(cats[i], "config.categories[" + std::to_string(i) + "]");
        c.categories.push_back({s.string("label", "C" + std::to_string(i + 1)), s.number("lo_m", 0.0),
                                s.number("hi_m", 0.0)});
        s.finish();
      }
    }
    c.season = root.string("season", c.season);
    c.d0_km = root.positive("d0_km", c.d0_km);
    if (root.has("annulus")) {
      auto a = root.section("annulus");
      c.annulus_inner_km = a.number("inner_km", c.annulus_inner_km);
      c.annulus_outer_km = a.positive("outer_km", c.annulus_outer_km);
      a.finish();
    }
    if (root.has("conversion")) {
      auto cv = root.section("conversion");
      c.conversion.strokes_per_strike_point =
          cv.positive("strokes_per_strike_point", c.conversion.strokes_per_strike_point);
      c.conversion.strike_points_per_flash =
          cv.positive("strike_points_per_flash", c.conversion.strike_points_per_flash);
      cv.finish();
    }
    c.ul_scale = root.number("ul_scale", c.ul_scale);
    if (root.has("grid")) {
      auto g = root.section("grid");
      c.grid_cell_deg = g.positive("cell_deg", c.grid_cell_deg);
      c.grid_min_turbine_years = g.number("min_turbine_years", c.grid_min_turbine_years);
      g.finish();
    }
    c.output_dir = resolve(base_dir, root.string("output", c.output_dir.string()));
    c.workers = static_cast<unsigned>(root.integer("workers", 0, 0, 4096));
    c.seed = static_cast<std::uint64_t>(root.integer("seed", 1, 0, std::numeric_limits<std::int64_t>::max()));
    if (root.has("synth")) {
      json s = root.raw("synth");
      if (!s.is_object()) throw ConfigError("config.synth must be an object");
      s["rng_seed"] = c.seed;
      c.synth = wtl::synth::SynthConfig::from_json(s);
    }
    root.finish();

    wtl::analysis::SeasonFilter::parse(c.season);
    wtl::ingest::validate_categories(c.categories);
    wtl::model::validate(c.conversion);
    wtl::hist::WeightedHistogram probe(c.geometry.bin_width_km, c.geometry.max_radius_km);
    if (c.geometry.max_radius_km > c.match_radius_km) {
      throw ConfigError("histogram.max_radius_km exceeds match.radius_km");
    }
    if (!(c.annulus_inner_km >= 0.0 && c.annulus_inner_km < c.annulus_outer_km)) {
      throw ConfigError("annulus needs 0 <= inner_km < outer_km");
    }
    if (c.annulus_outer_km > c.match_radius_km) throw ConfigError("annulus.outer_km exceeds match.radius_km");
    if (!(c.ul_scale >= 0.0)) throw ConfigError("ul_scale must be >= 0");
    if (!(c.grid_min_turbine_years >= 0.0)) throw ConfigError("grid.min_turbine_years must be >= 0");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j, fs::absolute(path).parent_path());
}

void validate_for(const RunConfig& config, Command command) {
  const auto need = [](const fs::path& p, const char* what) {
    if (p.empty()) throw ConfigError(std::string("config.inputs.") + what + " is required");
    if (!fs::exists(p)) throw ConfigError(std::string(what) + " file does not exist: " + p.string());
  };
  if (command == Command::kSynth) {
    if (!config.synth) throw ConfigError("config.synth is required for the synth command");
    return;
  }
  need(config.strokes_path, "strokes");
  need(config.turbines_path, "turbines");
}

json RunConfig::to_json() const {
  json cats = json::array();
  for (const auto& k : categories) cats.push_back({{"label", k.label}, {"lo_m", k.lo_m}, {"hi_m", k.hi_m}});
  json j{{"inputs", {{"strokes", strokes_path.string()}, {"turbines", turbines_path.string()}}},
         {"schema", {{"strokes", stroke_schema.to_json()}, {"turbines", turbine_schema.to_json()}}},
         {"match", {{"radius_km", match_radius_km}}},
         {"histogram", {{"bin_width_km", geometry.bin_width_km}, {"max_radius_km", geometry.max_radius_km}}},
         {"fit",
          {{"n_iter", n_iter},
           {"convergence_tol", convergence_tol},
           {"poisson_weighted", poisson_weighted},
           {"min_pairs", min_pairs}}},
         {"categories", cats},
         {"season", season},
         {"d0_km", d0_km},
         {"annulus", {{"inner_km", annulus_inner_km}, {"outer_km", annulus_outer_km}}},
         {"conversion",
          {{"strokes_per_strike_point", conversion.strokes_per_strike_point},
           {"strike_points_per_flash", conversion.strike_points_per_flash}}},
         {"ul_scale", ul_scale},
         {"grid", {{"cell_deg", grid_cell_deg}, {"min_turbine_years", grid_min_turbine_years}}},
         {"output", output_dir.string()},
         {"workers", workers},
         {"seed", seed}};
  if (pairs_path) j["inputs"]["pairs"] = pairs_path->string();
  if (window) {
    j["window"] = {{"start", wtl::format_iso8601(window->start)}, {"end", wtl::format_iso8601(window->end)}};
  }
  if (synth) j["synth"] = synth->to_json();
  return j;
}

}  // namespace wtlstrike
