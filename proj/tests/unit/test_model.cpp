#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "wtl/model.hpp"

using namespace wtl::model;

namespace {

// reference values evaluated at 30 significant digits
constexpr double kExpMinus20 = 2.06115362243855782796594038016e-9;
constexpr double kWell10 = 0.999954600070237515148464408484;
constexpr double kWellLambdaAmp2 = 1.26424111765711535680895245968;
constexpr double kComposite0 = 4.93827160493827160493827160494;
constexpr double kCompositeSigma = 6.35279811714497656960983221592;
constexpr double kRingInner = 0.0116995977682871927787477475097;
constexpr double kRingFar = 0.251327412287183459077011470662;
constexpr double kAreaCg = 0.0628318530717958647692528676656;
constexpr double kAreaTotalH5 = 0.145141580595848447616974124307;
constexpr double kAreaUlH1 = 0.0138230076757950902492356308864;
constexpr double kSurplusLimit = 0.0314159265358979323846264338328;
constexpr double kRcgSt = 0.141421356237309504880168872421;
constexpr double kRtotalSp = 0.252982212813470346559911483555;
constexpr double kRspFromGf = 0.238461538461538461538461538462;
constexpr double kEriksson100 = 13.1529858201712111436190072433;
constexpr double kEriksson200 = 49.7511569537363215108060874185;
constexpr double kEriksson7804 = 0.0612960318592600007406090184301;
constexpr double kAgf100 = 302142.098830600130501748985535;
constexpr double kAgf164 = 832992.574869823980819094211685;
constexpr double kIec100 = 0.282743338823081391461637904495;
constexpr double kIec150 = 2.54469004940773252315474114046;

void expect_rel(double actual, double expected, double tol = 1e-6) {
  EXPECT_NEAR(actual, expected, tol * std::abs(expected)) << "expected " << expected;
}

ModelParams params(double amp, double beta, double sigma, double lambda) { return {amp, beta, sigma, lambda}; }

double integrate(auto f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

}  // namespace

TEST(StrikeProbability, Values) {
  EXPECT_EQ(strike_probability(0.0, 0.1), 1.0);
  expect_rel(strike_probability(0.1, 0.1), std::exp(-1.0), 1e-15);
  expect_rel(strike_probability(2.0, 0.1), kExpMinus20);
}

TEST(StrikeProbability, RejectsBadInput) {
  EXPECT_THROW(strike_probability(-1.0, 0.1), std::invalid_argument);
  EXPECT_THROW(strike_probability(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(strike_probability(std::numeric_limits<double>::quiet_NaN(), 0.1), std::invalid_argument);
}

TEST(StrikeProbability, MonotoneAndIntegratesToCgArea) {
  for (double r = 0.0; r < 1.0; r += 0.01) {
    EXPECT_GE(strike_probability(r, 0.1), strike_probability(r + 0.01, 0.1));
  }
  for (double lam : {0.03, 0.1, 0.25}) {
    const double area = integrate([&](double r) { return 2 * kPi * r * strike_probability(r, lam); }, 0.0,
                                  std::numeric_limits<double>::infinity());
    expect_rel(area, 2 * kPi * lam * lam);
  }
}

TEST(WellDensity, Values) {
  EXPECT_EQ(well_density(0.0, params(3.0, 0.5, 0.045, 0.1)), 0.0);
  expect_rel(well_density(1.0, params(1.0, 0.0, 0.045, 0.1)), kWell10);
  expect_rel(well_density(0.1, params(2.0, 0.0, 0.045, 0.1)), kWellLambdaAmp2);
}

TEST(CompositeDensity, Values) {
  expect_rel(composite_density(0.0, params(1, 0, 0.045, 0.1)), kComposite0);
  expect_rel(composite_density(0.045, params(1, 1, 0.045, 0.1)), kCompositeSigma);
  EXPECT_THROW(composite_density(0.0, params(1, 0, 0.0, 0.1)), std::invalid_argument);
}

TEST(CompositeDensity, FarFieldAsymptote) {
  for (double sigma : {0.02, 0.045, 0.08}) {
    for (double lambda : {0.05, 0.1, 0.2}) {
      const auto p = params(7.0, 0.8, sigma, lambda);
      const double r = 20 * std::max(sigma, lambda);
      EXPECT_NEAR(composite_density(r, p) / 7.0, 1.0, 1e-6);
    }
  }
}

TEST(RingCounts, Values) {
  EXPECT_EQ(ring_counts(0.0, 0.02, params(1, 0.5, 0.045, 0.1)), 0.0);
  expect_rel(ring_counts(2.0, 0.02, params(1, 0, 0.045, 0.1)), kRingFar, 1e-8);
  expect_rel(ring_counts(0.02, 0.02, params(1, 0, 0.045, 0.1)), kRingInner);
}

TEST(RingCounts, MatchesDefinition) {
  const auto p = params(50, 0.7, 0.04, 0.12);
  for (double r = 0.01; r < 2.0; r += 0.02) {
    expect_rel(ring_counts(r, 0.02, p), 2 * kPi * composite_density(r, p) * r * 0.02, 1e-14);
  }
}

TEST(CumulativeSurplus, Limits) {
  EXPECT_NEAR(cumulative_surplus(0.0, params(1, 0.5, 0.045, 0.1)), 0.0, 1e-18);
  const double inf = std::numeric_limits<double>::infinity();
  expect_rel(cumulative_surplus(inf, params(1, 0.5, 0.045, 0.1)), kSurplusLimit);
  EXPECT_EQ(cumulative_surplus(inf, params(1, 0.0, 0.045, 0.1)), 0.0);
  expect_rel(cumulative_surplus(50.0, params(1, 0.5, 0.045, 0.1)), kSurplusLimit, 1e-12);
}

TEST(CumulativeSurplus, LimitIsTwoPiLambdaSquaredBeta) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> beta(0.0, 3.0), sigma(0.01, 0.1), lambda(0.02, 0.3);
  for (int i = 0; i < 200; ++i) {
    const auto p = params(1, beta(rng), sigma(rng), lambda(rng));
    EXPECT_NEAR(cumulative_surplus(std::numeric_limits<double>::infinity(), p),
                2 * kPi * p.lambda * p.lambda * p.beta, 1e-15);
  }
}

TEST(CumulativeSurplus, EqualsQuadratureOfSurplusDensity) {
  for (double beta : {0.0, 0.22, 1.31}) {
    for (double sigma : {0.02, 0.045, 0.08}) {
      for (double lambda : {0.05, 0.1, 0.2}) {
        const auto p = params(1, beta, sigma, lambda);
        const auto integrand = [&](double r) { return 2 * kPi * r * (composite_density(r, p) - 1.0); };
        for (double r : {sigma, lambda, 5 * lambda, 2.0}) {
          // split at the Gaussian scale so the quadrature resolves the peak
          const double mid = std::min(r, 4 * sigma);
          const double q = integrate(integrand, 0.0, mid) + (r > mid ? integrate(integrand, mid, r) : 0.0);
          const double closed = cumulative_surplus(r, p);
          EXPECT_NEAR(closed, q, 1e-6 * std::max(std::abs(q), 2 * kPi * lambda * lambda * 1e-3))
              << "beta " << beta << " sigma " << sigma << " lambda " << lambda << " r " << r;
        }
      }
    }
  }
}

TEST(CollectionAreas, Values) {
  const auto a0 = collection_areas(params(1, 0, 0.045, 0.1));
  expect_rel(a0.cg_km2, kAreaCg);
  EXPECT_EQ(a0.ul_km2, 0.0);
  expect_rel(a0.total_km2, kAreaCg);
  expect_rel(collection_areas(params(1, 1.31, 0.045, 0.1)).total_km2, kAreaTotalH5);
  expect_rel(collection_areas(params(1, 0.22, 0.045, 0.1)).ul_km2, kAreaUlH1);
}

TEST(CollectionAreas, TotalIsSumAndMonotone) {
  double prev_beta = 0, prev_lambda = 0;
  for (int i = 0; i <= 50; ++i) {
    const auto b = collection_areas(params(1, 0.05 * i, 0.045, 0.1));
    EXPECT_EQ(b.total_km2, b.cg_km2 + b.ul_km2);
    if (i > 0) {
      EXPECT_GT(b.total_km2, prev_beta);
    }
    prev_beta = b.total_km2;
    const auto l = collection_areas(params(1, 0.5, 0.045, 0.01 + 0.01 * i));
    if (i > 0) {
      EXPECT_GT(l.total_km2, prev_lambda);
    }
    prev_lambda = l.total_km2;
  }
}

TEST(AttractionRadii, Values) {
  const auto r0 = attraction_radii(params(1, 0, 0.045, 0.1), {1.0, 1.69});
  expect_rel(r0.cg_stroke_km, kRcgSt);
  EXPECT_EQ(r0.ul_stroke_km, 0.0);
  const auto r1 = attraction_radii(params(1, 1, 0.045, 0.1), {1.6, 1.69});
  expect_rel(r1.total_strike_point_km, kRtotalSp);
  expect_rel(flash_to_strike_point_radius(0.310, {1.6, 1.69}), kRspFromGf);
}

TEST(AttractionRadii, ConsistentWithAreas) {
  const auto p = params(1, 0.75, 0.045, 0.13);
  const ConversionFactors c{1.6, 1.69};
  const auto r = attraction_radii(p, c);
  const auto a = collection_areas(p);
  expect_rel(kPi * r.cg_stroke_km * r.cg_stroke_km, a.cg_km2, 1e-14);
  expect_rel(kPi * r.ul_stroke_km * r.ul_stroke_km, a.ul_km2, 1e-14);
  expect_rel(r.cg_strike_point_km, std::sqrt(1.6) * r.cg_stroke_km, 1e-14);
  expect_rel(r.total_strike_point_km, std::sqrt(1.6 * a.total_km2 / kPi), 1e-14);
  // unit detection-efficiency scale reproduces the plain total
  expect_rel(scaled_total_strike_point_radius(p, c, 1.0), r.total_strike_point_km, 1e-14);
}

TEST(Conversions, RoundTrip) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 3.0), r(0.01, 1.0);
  for (int i = 0; i < 100; ++i) {
    const ConversionFactors c{u(rng), u(rng)};
    const double x = r(rng);
    expect_rel(strike_point_to_stroke_radius(stroke_to_strike_point_radius(x, c), c), x, 1e-12);
    expect_rel(strike_point_to_flash_radius(flash_to_strike_point_radius(x, c), c), x, 1e-12);
  }
}

TEST(Validation, RejectsInvalidParams) {
  EXPECT_THROW(validate(params(-1, 0, 0.045, 0.1)), std::invalid_argument);
  EXPECT_THROW(validate(params(1, -0.1, 0.045, 0.1)), std::invalid_argument);
  EXPECT_THROW(validate(params(1, 0, 0.0, 0.1)), std::invalid_argument);
  EXPECT_THROW(validate(params(1, 0, 0.045, 0.0)), std::invalid_argument);
  EXPECT_THROW(validate(ConversionFactors{0.0, 1.69}), std::invalid_argument);
  EXPECT_NO_THROW(validate(ConversionFactors{}));
  EXPECT_EQ(ConversionFactors{}.strokes_per_strike_point, 1.6);
  EXPECT_EQ(ConversionFactors{}.strike_points_per_flash, 1.69);
}

TEST(Eriksson, UpwardFraction) {
  expect_rel(eriksson_upward_fraction(100.0), kEriksson100);
  expect_rel(eriksson_upward_fraction(200.0), kEriksson200);
  expect_rel(eriksson_upward_fraction(78.04), kEriksson7804);
  EXPECT_THROW(eriksson_upward_fraction(78.0), std::domain_error);
  EXPECT_THROW(eriksson_upward_fraction(50.0), std::domain_error);
  EXPECT_EQ(eriksson_upward_fraction(1e6), 100.0);
}

TEST(Eriksson, CollectionArea) {
  expect_rel(eriksson_collection_area(100.0), kAgf100);
  EXPECT_DOUBLE_EQ(eriksson_collection_area(1.0), 24.0);
  expect_rel(eriksson_collection_area(164.0), kAgf164);
}

TEST(Iec, StrikeRate) {
  expect_rel(iec_strike_rate({100.0, 1.0, 1.0, 1.0}), kIec100);
  EXPECT_EQ(iec_strike_rate({0.0, 1.0, 1.0, 1.0}), 0.0);
  expect_rel(iec_strike_rate({150.0, 2.0, 2.0, 1.0}), kIec150);
}

TEST(Regression, Radii) {
  const auto a = regression_radii(100.0);
  EXPECT_DOUBLE_EQ(a.cg_m, 171.0);
  EXPECT_DOUBLE_EQ(a.tul_m, 50.0);
  EXPECT_NEAR(regression_radii(300.0 / 3.5).tul_m, 0.0, 1e-12);
  EXPECT_EQ(regression_radii(60.0).tul_m, 0.0);
  const auto b = regression_radii(180.0);
  EXPECT_DOUBLE_EQ(b.cg_m, 299.0);
  EXPECT_DOUBLE_EQ(b.tul_m, 330.0);
}

TEST(Regression, StrikeRates) {
  const auto s = regression_strike_rates({100.0, 1.0, 2.0, 0.5});
  expect_rel(s.cg, kPi * 0.171 * 0.171 * 2.0, 1e-12);
  expect_rel(s.tul, 0.5 * kPi * 0.05 * 0.05 * 2.0, 1e-12);
}
