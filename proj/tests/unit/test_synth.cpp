#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>

#include "wtl/ingest.hpp"
#include "wtl/spatial.hpp"
#include "wtl/synth.hpp"

using namespace wtl;
using namespace wtl::synth;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Smeared-well bin averages from adaptive quadrature of the exact
// convolution (Rician kernel) of 1 - exp(-r/0.1) with a 2-D Gaussian of the
// given sigma, averaged over 50 m annuli; floor is the average over r < sigma/2.
struct SmearOracle {
  double sigma;
  double floor;
  std::array<double, 10> bins;
};

const SmearOracle kSmear[] = {
    {0.02, 0.22085592496952675,
     {0.324051, 0.540083, 0.714357, 0.825054, 0.893322, 0.935078, 0.960531, 0.976020, 0.985437, 0.991158}},
    {0.045, 0.4161768480273269,
     {0.448257, 0.571058, 0.713778, 0.819881, 0.888737, 0.931764, 0.958303, 0.974573, 0.984515, 0.990578}},
    {0.08, 0.5948283846308988,
     {0.600152, 0.653429, 0.734845, 0.815318, 0.878899, 0.923209, 0.952134, 0.970428, 0.981822, 0.988862}},
};

bool same(const SynthOutput& a, const SynthOutput& b) {
  if (a.strokes.size() != b.strokes.size()) return false;
  for (std::size_t i = 0; i < a.strokes.size(); ++i) {
    const auto &x = a.strokes[i], &y = b.strokes[i];
    if (x.time != y.time || x.latitude != y.latitude || x.longitude != y.longitude ||
        x.peak_current_ka != y.peak_current_ka || a.labels[i].label != b.labels[i].label ||
        a.labels[i].turbine != b.labels[i].turbine)
      return false;
  }
  return a.field_points == b.field_points;
}

}  // namespace

TEST(Synth, ReproducibleAndWorkerInvariant) {
  SynthConfig cfg;
  cfg.background_density = 30000.0;  // > 2^16 points, several blocks
  cfg.turbines = {{0, 0, 100, 2010}, {0.5, 0.3, 120, 2012}, {-0.4, 0.2, 90, 2018}};
  const auto a = generate(cfg, 1);
  const auto b = generate(cfg, 1);
  const auto c = generate(cfg, 4);
  EXPECT_GT(a.field_points, 1u << 17);
  EXPECT_TRUE(same(a, b));
  EXPECT_TRUE(same(a, c));
  cfg.rng_seed = 2;
  EXPECT_FALSE(same(a, generate(cfg, 1)));
}

TEST(Synth, BackgroundCountIsPoisson) {
  // Pure Poisson: no capture (lambda tiny), no upward strokes.
  SynthConfig cfg;
  cfg.truth = {0.0, 0.045, 1e-9};
  cfg.background_density = 50.0;
  cfg.domain_radius_km = 2.0;
  const double mean = 50.0 * kPi * 4.0;
  double sum = 0.0;
  const int n = 100;
  for (int s = 1; s <= n; ++s) {
    cfg.rng_seed = static_cast<std::uint64_t>(s);
    const auto out = generate(cfg);
    EXPECT_EQ(out.strokes.size(), out.field_points);
    sum += static_cast<double>(out.field_points);
  }
  EXPECT_NEAR(sum / n, mean, 3.0 * std::sqrt(mean / n));
}

TEST(Synth, CaptureAndUpwardMeans) {
  SynthConfig cfg;
  cfg.background_density = 5000.0;
  cfg.domain_radius_km = 1.5;
  cfg.truth = {0.5, 0.045, 0.1};
  cfg.ul_detection_efficiency = 0.5;
  // captured strokes: integral of exp(-r/lambda) over the plane
  const double cap_mean = 5000.0 * 2 * kPi * 0.01;
  const double ul_mean = 0.5 * cap_mean;
  double cap = 0.0, gen = 0.0, det = 0.0;
  const int n = 60;
  for (int s = 1; s <= n; ++s) {
    cfg.rng_seed = static_cast<std::uint64_t>(s);
    const auto out = generate(cfg);
    cap += static_cast<double>(out.turbine_truth[0].captured);
    gen += static_cast<double>(out.turbine_truth[0].upward_generated);
    det += static_cast<double>(out.turbine_truth[0].upward_detected);
    std::size_t labelled = 0;
    for (const auto& l : out.labels) labelled += l.label == Label::kUpward;
    EXPECT_EQ(labelled, out.turbine_truth[0].upward_detected);
  }
  EXPECT_NEAR(cap / n, cap_mean, 3.0 * std::sqrt(cap_mean / n));
  EXPECT_NEAR(gen / n, ul_mean, 3.0 * std::sqrt(ul_mean / n));
  // binomial thinning at 0.5
  EXPECT_NEAR(det / gen, 0.5, 3.0 * 0.5 / std::sqrt(gen));
}

TEST(Synth, TimesFollowMonthWeights) {
  SynthConfig cfg;
  cfg.background_density = 500.0;
  cfg.field_months = {0, 0, 0, 0, 1, 1, 1, 1, 0, 0, 0, 0};
  const auto out = generate(cfg);
  for (std::size_t i = 0; i < out.strokes.size(); ++i) {
    if (out.labels[i].label == Label::kUpward) continue;
    const int m = month_of(out.strokes[i].time);
    ASSERT_TRUE(m >= 5 && m <= 8) << m;
    ASSERT_GE(out.strokes[i].time, cfg.window_start);
    ASSERT_LT(out.strokes[i].time, cfg.window_end);
  }
}

TEST(Synth, TurbineDisksRegion) {
  SynthConfig cfg;
  cfg.background_density = 2000.0;
  cfg.domain_radius_km = 0.5;
  cfg.region = FieldRegion::kTurbineDisks;
  cfg.turbines = {{0, 0, 100, 2010}, {3.0, 0, 100, 2010}};
  const auto out = generate(cfg);
  const double mean = 2000.0 * 2 * kPi * 0.25;
  EXPECT_NEAR(static_cast<double>(out.field_points), mean, 4.0 * std::sqrt(mean));
  EXPECT_EQ(out.turbines.size(), 2u);
  EXPECT_EQ(out.turbines[1].turbine_id, "2");
}

TEST(PlaneToLatLon, PreservesDistanceFromReference) {
  const spatial::LatLon ref{35.0, -100.0};
  for (double d : {0.1, 1.0, 2.0, 5.0}) {
    for (double az : {0.0, 0.7, 2.0, 4.5}) {
      const auto p = plane_to_latlon(ref, d * std::sin(az), d * std::cos(az));
      EXPECT_NEAR(spatial::geodesic_distance(ref, p), d, 1e-9 * d);
    }
  }
  const auto north = plane_to_latlon(ref, 0.0, 1.0);
  EXPECT_NEAR(north.lon_deg, ref.lon_deg, 1e-12);
  EXPECT_GT(north.lat_deg, ref.lat_deg);
}

TEST(SynthConfigJson, RoundTripAndValidation) {
  SynthConfig cfg;
  cfg.rng_seed = 99;
  cfg.turbines = {{0.1, 0.2, 150, 2016}};
  cfg.turbine_truth = {{1.0, 0.05, 0.12}};
  cfg.region = FieldRegion::kTurbineDisks;
  const auto back = SynthConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());

  auto bad = cfg.to_json();
  bad["ul_detection_efficiency"] = 1.5;
  EXPECT_THROW(SynthConfig::from_json(bad), std::invalid_argument);
  bad = cfg.to_json();
  bad["background_density"] = -1;
  EXPECT_THROW(SynthConfig::from_json(bad), std::invalid_argument);
  bad = cfg.to_json();
  bad["turbine_truth"] = nlohmann::json::array({cfg.to_json()["truth"], cfg.to_json()["truth"]});
  EXPECT_THROW(SynthConfig::from_json(bad), std::invalid_argument);
}

TEST(SynthDataset, ReingestsWithoutRejections) {
  SynthConfig cfg;
  cfg.background_density = 200.0;
  const auto out = generate(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "wtl_synth_dataset";
  std::filesystem::remove_all(dir);
  write_dataset(dir, cfg, out);
  const auto s = ingest::parse_strokes_file(dir / "strokes.csv");
  const auto t = ingest::parse_turbines_file(dir / "turbines.csv");
  EXPECT_EQ(s.report.rejected, 0u);
  EXPECT_EQ(s.records.size(), out.strokes.size());
  EXPECT_EQ(t.records.size(), 1u);
  for (std::size_t i = 0; i < out.strokes.size(); ++i) {
    ASSERT_EQ(s.records[i].latitude, out.strokes[i].latitude);
    ASSERT_EQ(s.records[i].time, out.strokes[i].time);
  }
  std::ifstream truth(dir / "truth.json");
  const auto j = nlohmann::json::parse(truth);
  EXPECT_TRUE(j.contains("config"));
  std::filesystem::remove_all(dir);
}

TEST(MonteCarloWell, UnsmearedReproducesWell) {
  MonteCarloOptions opts;
  opts.n_samples = 400'000;
  const auto prof = monte_carlo_well({0.0}, 0.1, opts);
  ASSERT_EQ(prof.size(), 1u);
  ASSERT_EQ(prof[0].density.size(), 10u);
  for (std::size_t i = 0; i < prof[0].density.size(); ++i) {
    EXPECT_NEAR(prof[0].density[i], prof[0].expected[i], 4.0 * prof[0].stderr_[i]) << i;
  }
}

TEST(MonteCarloWell, MatchesQuadratureOracle) {
  MonteCarloOptions opts;
  opts.n_samples = 1'000'000;
  std::vector<double> sigmas;
  for (const auto& o : kSmear) sigmas.push_back(o.sigma);
  const auto prof = monte_carlo_well(sigmas, 0.1, opts);
  for (std::size_t s = 0; s < prof.size(); ++s) {
    const auto& o = kSmear[s];
    for (std::size_t i = 0; i < 10; ++i) {
      EXPECT_NEAR(prof[s].density[i], o.bins[i], 4.0 * prof[s].stderr_[i] + 2e-6) << o.sigma << " bin " << i;
    }
    EXPECT_NEAR(prof[s].floor, o.floor, 4.0 * prof[s].floor_stderr) << o.sigma;
  }
}

TEST(MonteCarloWell, RejectsBadInput) {
  EXPECT_THROW(monte_carlo_well({0.045}, 0.0), std::invalid_argument);
  EXPECT_THROW(monte_carlo_well({-0.01}, 0.1), std::invalid_argument);
  MonteCarloOptions few;
  few.n_samples = 10;
  EXPECT_THROW(monte_carlo_well({0.045}, 0.1, few), std::invalid_argument);
}
