#pragma once

// Radial stroke-density model around a tall structure and the engineering
// reference curves it is compared against.
//
// Units: distances and radii in km, areas in km^2, unless a function name
// says otherwise (the reference curves take tip height in metres).

#include <array>

namespace wtl::model {

inline constexpr double kPi = 3.14159265358979323846;

/// Parameters of the composite density / ring-count model.
///
/// `amplitude` is the far-field stroke density (strokes per km^2 over the
/// accumulated exposure); `beta` the upward-to-downward discharge ratio;
/// `sigma` the LLS location scatter; `lambda` the capture e-folding length.
struct ModelParams {
  double amplitude = 1.0;
  double beta = 0.0;
  double sigma = 0.045;
  double lambda = 0.1;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Throws std::invalid_argument unless sigma > 0, lambda > 0, beta >= 0,
/// amplitude >= 0 and every field is finite.
void validate(const ModelParams& p);

struct ConversionFactors {
  double strokes_per_strike_point = 1.6;  // alpha SP->ST
  double strike_points_per_flash = 1.69;  // alpha GF->SP
};

void validate(const ConversionFactors& c);

struct ReferenceModelInputs {
  double tip_height_m = 100.0;
  double location_factor = 1.0;  // C_D
  double density_sp = 1.0;        // strike points / km^2 / yr
  double ul_scale = 1.0;          // xi, upward detection-efficiency correction
};

// --- density model --------------------------------------------------------

/// exp(-r/lambda): chance that a stroke which would have landed at distance r
/// attaches to the structure instead.
double strike_probability(double r_km, double lambda_km);

/// amplitude * (1 - exp(-r/lambda)); the depleted ground-stroke well.
double well_density(double r_km, const ModelParams& p);

/// Composite density normalised by amplitude (rho-tilde): Gaussian attachment
/// peak plus the unsmeared well.
double normalized_density(double r_km, const ModelParams& p);

double composite_density(double r_km, const ModelParams& p);

/// Expected counts in the ring [r - dr/2, r + dr/2): 2*pi*rho(r)*r*dr.
double ring_counts(double r_km, double dr_km, const ModelParams& p);

/// d ring_counts / d(amplitude, beta, sigma, lambda), in that order.
std::array<double, 4> ring_counts_gradient(double r_km, double dr_km, const ModelParams& p);

/// Closed-form integral of 2*pi*(rho/amplitude - 1)*r from 0 to r. Accepts
/// r = +infinity, where it returns 2*pi*lambda^2*beta.
double cumulative_surplus(double r_km, const ModelParams& p);

struct CollectionAreas {
  double cg_km2 = 0.0;
  double ul_km2 = 0.0;
  double total_km2 = 0.0;
};

CollectionAreas collection_areas(const ModelParams& p);

struct AttractionRadii {
  double cg_stroke_km = 0.0;
  double ul_stroke_km = 0.0;
  double cg_strike_point_km = 0.0;
  double ul_strike_point_km = 0.0;
  double total_strike_point_km = 0.0;
};

AttractionRadii attraction_radii(const ModelParams& p, const ConversionFactors& c);

/// Total strike-point radius with the upward area scaled by `ul_scale`
/// (detection-efficiency correction): sqrt(2*alpha*(1 + xi*beta)) * lambda.
double scaled_total_strike_point_radius(const ModelParams& p, const ConversionFactors& c,
                                        double ul_scale);

// Radius conversions between stroke (ST), strike-point (SP) and flash (GF)
// normalisations.
double stroke_to_strike_point_radius(double r_stroke, const ConversionFactors& c);
double strike_point_to_stroke_radius(double r_sp, const ConversionFactors& c);
double flash_to_strike_point_radius(double r_flash, const ConversionFactors& c);
double strike_point_to_flash_radius(double r_sp, const ConversionFactors& c);

// --- engineering reference curves -----------------------------------------

/// Upward-lightning percentage vs height (m). Throws std::domain_error for
/// h <= 78 m; result clamped to [0, 100].
double eriksson_upward_fraction(double tip_height_m);

/// Flash-referenced collection area in m^2.
double eriksson_collection_area(double tip_height_m);

/// IEC 61400-24 annual strike count with a 3H strike-point radius.
double iec_strike_rate(const ReferenceModelInputs& in);

struct RegressionRadii {
  double cg_m = 0.0;
  double tul_m = 0.0;
};

/// Warm-season strike-point radius regressions; the TUL line is clamped at 0.
RegressionRadii regression_radii(double tip_height_m);

struct StrikeRates {
  double cg = 0.0;
  double tul = 0.0;
};

/// Annual CG and triggered-UL strike counts from the regression radii and the
/// local strike-point density; TUL is scaled by ul_scale.
StrikeRates regression_strike_rates(const ReferenceModelInputs& in);

}  // namespace wtl::model
