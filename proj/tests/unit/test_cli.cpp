#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>
#include <sys/wait.h>

#include "wtl/analysis.hpp"
#include "wtl/fit.hpp"
#include "wtl/ingest.hpp"
#include "wtl/spatial.hpp"
#include "wtlstrike/config.hpp"
#include "wtlstrike/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wtl;

namespace {

struct Run {
  int code = -1;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Run run(const std::string& args, const fs::path& scratch) {
  const auto err_file = scratch / "stderr.txt";
  const std::string cmd = std::string(WTLSTRIKE_EXE) + " " + args + " 2> " + err_file.string() + " > /dev/null";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err_file);
  return r;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream f(p);
  f << j.dump(2);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) rows.push_back(ingest::split_delimited(line, ','));
  return rows;
}

json synth_block() {
  json turbines = json::array();
  const double heights[] = {100, 100, 110, 175, 180, 190};
  for (int i = 0; i < 6; ++i) {
    turbines.push_back({{"x_km", 5.0 * i}, {"y_km", 0.0}, {"tip_height_m", heights[i]}, {"operational_year", 2010}});
  }
  json truth = json::array();
  for (int i = 0; i < 6; ++i) {
    truth.push_back({{"beta", i < 3 ? 0.22 : 1.31}, {"sigma_km", 0.045}, {"lambda_km", 0.1}});
  }
  return {{"background_density", 4000.0}, {"domain_radius_km", 2.25}, {"region", "turbine_disks"},
          {"turbines", turbines},          {"turbine_truth", truth},   {"window_start", "2015-01-01T00:00:00Z"},
          {"window_end", "2022-01-01T00:00:00Z"}};
}

json base_config(const fs::path& data) {
  return {{"inputs", {{"strokes", (data / "strokes.csv").string()}, {"turbines", (data / "turbines.csv").string()}}},
          {"categories", json::array({{{"label", "low"}, {"lo_m", 85}, {"hi_m", 115}},
                                      {{"label", "high"}, {"lo_m", 160}, {"hi_m", 200}}})},
          {"fit", {{"min_pairs", 1000}}},
          {"grid", {{"min_turbine_years", 10}}},
          {"workers", 2},
          {"seed", 17},
          {"synth", synth_block()}};
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "wtl_cli_tests";
    fs::remove_all(root_);
    fs::create_directories(root_);
    json cfg = base_config(root_ / "data");
    cfg["output"] = (root_ / "data").string();
    write_json(root_ / "synth.json", cfg);
    const auto r = run("synth --config " + (root_ / "synth.json").string(), root_);
    ASSERT_EQ(r.code, 0) << r.err;
  }

  static fs::path config_with(const std::string& name, json cfg) {
    if (!cfg.contains("output")) cfg["output"] = (root_ / name).string();
    const auto p = root_ / (name + ".json");
    write_json(p, cfg);
    return p;
  }

  static fs::path root_;
};

fs::path Cli::root_;

}  // namespace

TEST_F(Cli, SynthDatasetReingestsCleanly) {
  const auto s = ingest::parse_strokes_file(root_ / "data" / "strokes.csv");
  const auto t = ingest::parse_turbines_file(root_ / "data" / "turbines.csv");
  EXPECT_EQ(s.report.rejected, 0u);
  EXPECT_EQ(t.report.rejected, 0u);
  EXPECT_EQ(t.records.size(), 6u);
  EXPECT_GT(s.records.size(), 100000u);
}

TEST_F(Cli, SynthSeedReproducible) {
  json cfg = base_config(root_ / "data");
  cfg["output"] = (root_ / "data2").string();
  cfg["workers"] = 1;
  const auto r = run("synth --config " + config_with("synth2", cfg).string(), root_);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(root_ / "data" / "strokes.csv"), slurp(root_ / "data2" / "strokes.csv"));
  EXPECT_EQ(slurp(root_ / "data" / "truth.json"), slurp(root_ / "data2" / "truth.json"));
}

TEST_F(Cli, FitMatchesLibrary) {
  const auto cfg_path = config_with("fit", base_config(root_ / "data"));
  const auto r = run("fit --config " + cfg_path.string(), root_);
  ASSERT_TRUE(r.code == 0 || r.code == 3) << r.err;
  std::ifstream in(root_ / "fit" / "fit.json");
  const json doc = json::parse(in);

  const auto s = ingest::parse_strokes_file(root_ / "data" / "strokes.csv");
  const auto t = ingest::parse_turbines_file(root_ / "data" / "turbines.csv");
  const auto pairs = spatial::match_strokes(s.records, spatial::TurbineIndex(t.records), {2.0, 1});
  const auto f = fit::iterative_fit(pairs);
  EXPECT_EQ(doc["params"]["amplitude"].get<double>(), f.result.params.amplitude);
  EXPECT_EQ(doc["params"]["beta"].get<double>(), f.result.params.beta);
  EXPECT_EQ(doc["params"]["sigma_km"].get<double>(), f.result.params.sigma);
  EXPECT_EQ(doc["params"]["lambda_km"].get<double>(), f.result.params.lambda);
  EXPECT_EQ(doc["converged"].get<bool>(), f.result.converged);
  EXPECT_EQ(r.code, f.result.converged ? 0 : 3);
  EXPECT_EQ(doc["histograms"].size(), 4u);

  const auto views = read_csv(root_ / "fit" / "views.csv");
  ASSERT_EQ(views.size(), 1u + 4u * 100u);
  EXPECT_EQ(views[0][0], "iteration");
  EXPECT_EQ(std::stod(views[1][2]), f.histograms[0].count(0));
}

TEST_F(Cli, FitOutputValidatesAgainstSchema) {
  const auto cfg_path = config_with("fit_schema", base_config(root_ / "data"));
  const auto r = run("fit --config " + cfg_path.string(), root_);
  ASSERT_TRUE(r.code == 0 || r.code == 3) << r.err;
  if (std::system("python3 -c 'import jsonschema' > /dev/null 2>&1") != 0) GTEST_SKIP() << "jsonschema unavailable";
  const std::string cmd = "python3 -c 'import json,sys,jsonschema; jsonschema.validate(json.load(open(sys.argv[1])), "
                          "json.load(open(sys.argv[2])))' " +
                          (root_ / "fit_schema" / "fit.json").string() + " " WTL_SCHEMA_DIR "/fit_result.schema.json";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
}

TEST_F(Cli, WorkerCountDoesNotChangeOutputs) {
  json a = base_config(root_ / "data");
  const auto r1 = run("fit --workers 1 --config " + config_with("w1", a).string(), root_);
  const auto r8 = run("fit --workers 8 --config " + config_with("w8", a).string(), root_);
  ASSERT_EQ(r1.code, r8.code);
  EXPECT_EQ(slurp(root_ / "w1" / "fit.json"), slurp(root_ / "w8" / "fit.json"));
  EXPECT_EQ(slurp(root_ / "w1" / "views.csv"), slurp(root_ / "w8" / "views.csv"));
}

TEST_F(Cli, SweepMatchesLibrary) {
  const auto cfg_path = config_with("sweep", base_config(root_ / "data"));
  const auto r = run("sweep --config " + cfg_path.string(), root_);
  ASSERT_TRUE(r.code == 0 || r.code == 3) << r.err;
  std::ifstream in(root_ / "sweep" / "sweep.json");
  const json doc = json::parse(in);

  const auto cfg = wtlstrike::load_config(cfg_path);
  const auto s = ingest::parse_strokes_file(cfg.strokes_path);
  const auto t = ingest::parse_turbines_file(cfg.turbines_path);
  const auto pairs = spatial::match_strokes(s.records, spatial::TurbineIndex(t.records), {2.0, 1});
  analysis::SweepOptions so;
  so.min_pairs = 1000;
  const auto res = analysis::category_sweep(pairs, s.records, t.records, cfg.categories,
                                            analysis::SeasonFilter::all(), so);
  ASSERT_EQ(doc["categories"].size(), res.size());
  for (std::size_t c = 0; c < res.size(); ++c) {
    const auto& p = doc["categories"][c]["fit"]["params"];
    EXPECT_EQ(p["beta"].get<double>(), res[c].fit.result.params.beta);
    EXPECT_EQ(p["lambda_km"].get<double>(), res[c].fit.result.params.lambda);
    EXPECT_EQ(p["amplitude"].get<double>(), res[c].fit.result.params.amplitude);
  }
  EXPECT_LT(res[0].fit.result.params.beta, res[1].fit.result.params.beta);

  std::ifstream mf(root_ / "sweep" / "sweep_manifest.json");
  const json manifest = json::parse(mf);
  EXPECT_EQ(manifest["config"]["categories"][1]["lo_m"].get<double>(), 160.0);
  EXPECT_EQ(manifest["command"], "sweep");
  EXPECT_TRUE(manifest["outputs"].contains("categories.csv"));
  EXPECT_EQ(manifest["outputs"]["categories.csv"], wtlstrike::sha256_file(root_ / "sweep" / "categories.csv"));
  EXPECT_EQ(manifest["inputs"][cfg.strokes_path.string()], wtlstrike::sha256_file(cfg.strokes_path));
}

TEST_F(Cli, SweepFailsWithoutEnoughPairs) {
  json cfg = base_config(root_ / "data");
  cfg["fit"]["min_pairs"] = 100000000;
  const auto r = run("sweep --config " + config_with("sweep_short", cfg).string(), root_);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("low"), std::string::npos) << r.err;
}

TEST_F(Cli, TurbinesMatchLibrary) {
  const auto cfg_path = config_with("turbines", base_config(root_ / "data"));
  const auto r = run("turbines --config " + cfg_path.string(), root_);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto cfg = wtlstrike::load_config(cfg_path);
  const auto s = ingest::parse_strokes_file(cfg.strokes_path);
  const auto t = ingest::parse_turbines_file(cfg.turbines_path);
  const auto pairs = spatial::match_strokes(s.records, spatial::TurbineIndex(t.records), {2.0, 1});
  analysis::PerTurbineOptions po;
  po.categories = cfg.categories;
  const auto rep = analysis::per_turbine_stats(pairs, s.records, t.records, po);

  const auto pooled = read_csv(root_ / "turbines" / "pooled.csv");
  ASSERT_EQ(pooled.size(), 3u);
  EXPECT_EQ(std::stod(pooled[1][5]), rep.categories[0].pooled_radius_km);
  EXPECT_EQ(std::stod(pooled[2][5]), rep.categories[1].pooled_radius_km);
  const auto per = read_csv(root_ / "turbines" / "per_turbine.csv");
  ASSERT_EQ(per.size(), 7u);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(std::stod(per[k + 1][8]), rep.turbines[k].r_total_sp_km);

  const auto cdf = read_csv(root_ / "turbines" / "cdf.csv");
  for (std::size_t i = 2; i < cdf.size(); ++i) {
    if (cdf[i][0] == cdf[i - 1][0]) {
      EXPECT_GT(std::stod(cdf[i][2]), std::stod(cdf[i - 1][2]));
    }
  }
}

TEST_F(Cli, ZeroStrikeTurbineReportsZeroRadius) {
  // a turbine far outside the synthetic field sees nothing
  const auto dir = root_ / "lonely";
  fs::create_directories(dir);
  fs::copy_file(root_ / "data" / "strokes.csv", dir / "strokes.csv", fs::copy_options::overwrite_existing);
  {
    std::ofstream f(dir / "turbines.csv");
    f << "id,lat,lon,total_height_m,p_year,loc_conf\n1,10.0,10.0,100,2010,3\n";
  }
  json cfg = base_config(dir);
  const auto r = run("turbines --config " + config_with("lonely_out", cfg).string(), root_);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto per = read_csv(root_ / "lonely_out" / "per_turbine.csv");
  ASSERT_EQ(per.size(), 2u);
  EXPECT_EQ(per[1][5], "0");
  EXPECT_EQ(std::stod(per[1][8]), 0.0);
}

TEST_F(Cli, SeasonalDeterministicAndMatchesLibrary) {
  const auto cfg_path = config_with("seasonal", base_config(root_ / "data"));
  ASSERT_EQ(run("seasonal --config " + cfg_path.string(), root_).code, 0);
  const auto first = slurp(root_ / "seasonal" / "grid.csv");
  ASSERT_EQ(run("seasonal --config " + cfg_path.string(), root_).code, 0);
  EXPECT_EQ(first, slurp(root_ / "seasonal" / "grid.csv"));

  const auto cfg = wtlstrike::load_config(cfg_path);
  const auto s = ingest::parse_strokes_file(cfg.strokes_path);
  const auto t = ingest::parse_turbines_file(cfg.turbines_path);
  const auto pairs = spatial::match_strokes(s.records, spatial::TurbineIndex(t.records), {2.0, 1});
  analysis::GridOptions go;
  go.min_turbine_years = 10;
  const auto cells = analysis::seasonal_grid(pairs, s.records, t.records, go);
  const auto grid = read_csv(root_ / "seasonal" / "grid.csv");
  ASSERT_EQ(grid.size(), cells.size() + 1);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    EXPECT_EQ(std::stoull(grid[i + 1][6]), cells[i].warm_annulus);
    EXPECT_EQ(std::stoull(grid[i + 1][9]), cells[i].cold_inner);
    EXPECT_EQ(grid[i + 1][13], cells[i].has_ratio ? "1" : "0");
  }
}

TEST_F(Cli, MatchWritesPairsReusableByFit) {
  const auto r = run("match --config " + config_with("match", base_config(root_ / "data")).string(), root_);
  ASSERT_EQ(r.code, 0) << r.err;
  json cfg = base_config(root_ / "data");
  cfg["inputs"]["pairs"] = (root_ / "match" / "pairs.bin").string();
  const auto r2 = run("fit --config " + config_with("fit_from_pairs", cfg).string(), root_);
  ASSERT_TRUE(r2.code == 0 || r2.code == 3) << r2.err;
  const auto direct = run("fit --config " + config_with("fit_direct", base_config(root_ / "data")).string(), root_);
  EXPECT_EQ(slurp(root_ / "fit_from_pairs" / "fit.json"), slurp(root_ / "fit_direct" / "fit.json"));
}

TEST_F(Cli, EmptyStrokeFileIsCleanRun) {
  const auto dir = root_ / "empty";
  fs::create_directories(dir);
  { std::ofstream f(dir / "strokes.csv"); }
  fs::copy_file(root_ / "data" / "turbines.csv", dir / "turbines.csv", fs::copy_options::overwrite_existing);
  const auto r = run("match --config " + config_with("empty_out", base_config(dir)).string(), root_);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  std::ifstream in(root_ / "empty_out" / "match_summary.json");
  EXPECT_EQ(json::parse(in)["pairs"].get<int>(), 0);
}

TEST_F(Cli, MissingTurbineFileNamesPath) {
  json cfg = base_config(root_ / "data");
  cfg["inputs"]["turbines"] = (root_ / "nowhere" / "turbines.csv").string();
  const auto r = run("match --config " + config_with("missing", cfg).string(), root_);
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find((root_ / "nowhere" / "turbines.csv").string()), std::string::npos) << r.err;
}

TEST_F(Cli, ConfigErrorsAreUsageErrors) {
  json cfg = base_config(root_ / "data");
  cfg["fit"]["bogus"] = 1;
  auto r = run("fit --config " + config_with("bad1", cfg).string(), root_);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("bogus"), std::string::npos) << r.err;

  cfg = base_config(root_ / "data");
  cfg["annulus"] = {{"inner_km", 2.0}, {"outer_km", 1.0}};
  EXPECT_EQ(run("fit --config " + config_with("bad2", cfg).string(), root_).code, 1);

  cfg = base_config(root_ / "data");
  cfg["season"] = "spring";
  EXPECT_EQ(run("fit --config " + config_with("bad3", cfg).string(), root_).code, 1);

  EXPECT_EQ(run("fit --config " + (root_ / "absent.json").string(), root_).code, 1);
  EXPECT_EQ(run("fit", root_).code, 1);
  EXPECT_EQ(run("frobnicate --config x", root_).code, 1);
  EXPECT_EQ(run("fit --season spring --config " + (root_ / "fit.json").string(), root_).code, 1);
}

TEST_F(Cli, ManifestContents) {
  const auto cfg_path = config_with("manifest", base_config(root_ / "data"));
  const auto r = run("turbines --config " + cfg_path.string(), root_);
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(root_ / "manifest" / "turbines_manifest.json");
  const json m = json::parse(in);
  for (const char* k : {"artifact", "command", "config", "inputs", "outputs", "summary", "warnings", "exit_code"}) {
    EXPECT_TRUE(m.contains(k)) << k;
  }
  EXPECT_EQ(m["inputs"].size(), 2u);
  EXPECT_EQ(m["outputs"].size(), 3u);
  EXPECT_EQ(m["config"]["seed"], 17);
  // re-running from the echoed config reproduces the outputs
  json echoed = m["config"];
  echoed["output"] = (root_ / "manifest_rerun").string();
  const auto r2 = run("turbines --config " + config_with("manifest_rerun", echoed).string(), root_);
  ASSERT_EQ(r2.code, 0) << r2.err;
  std::ifstream in2(root_ / "manifest_rerun" / "turbines_manifest.json");
  EXPECT_EQ(json::parse(in2)["outputs"], m["outputs"]);
}

TEST(FormatDouble, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 2.5e-300, 123456.789}) EXPECT_EQ(std::stod(wtlstrike::format_double(v)), v);
  EXPECT_EQ(wtlstrike::format_double(std::nan("")), "nan");
}

TEST(Sha256, KnownDigest) {
  const auto p = fs::temp_directory_path() / "wtl_sha_probe.txt";
  {
    std::ofstream f(p, std::ios::binary);
    f << "abc";
  }
  EXPECT_EQ(wtlstrike::sha256_file(p), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  fs::remove(p);
}
