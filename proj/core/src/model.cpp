#include "wtl/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace wtl::model {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

void require_distance(double r) {
  require(std::isfinite(r) && r >= 0.0, "distance must be finite and non-negative");
}

double gaussian_peak(double r, const ModelParams& p) {
  const double s2 = p.sigma * p.sigma;
  return (1.0 + p.beta) * (p.lambda * p.lambda / s2) * std::exp(-r * r / (2.0 * s2));
}

}  // namespace

void validate(const ModelParams& p) {
  require(std::isfinite(p.amplitude) && p.amplitude >= 0.0, "amplitude must be finite and >= 0");
  require(std::isfinite(p.beta) && p.beta >= 0.0, "beta must be finite and >= 0");
  require(std::isfinite(p.sigma) && p.sigma > 0.0, "sigma must be finite and > 0");
  require(std::isfinite(p.lambda) && p.lambda > 0.0, "lambda must be finite and > 0");
}

void validate(const ConversionFactors& c) {
  require(std::isfinite(c.strokes_per_strike_point) && c.strokes_per_strike_point > 0.0,
          "strokes_per_strike_point must be > 0");
  require(std::isfinite(c.strike_points_per_flash) && c.strike_points_per_flash > 0.0,
          "strike_points_per_flash must be > 0");
}

double strike_probability(double r_km, double lambda_km) {
  require_distance(r_km);
  require(std::isfinite(lambda_km) && lambda_km > 0.0, "lambda must be finite and > 0");
  return std::exp(-r_km / lambda_km);
}

double well_density(double r_km, const ModelParams& p) {
  require_distance(r_km);
  validate(p);
  return p.amplitude * -std::expm1(-r_km / p.lambda);
}

double normalized_density(double r_km, const ModelParams& p) {
  require_distance(r_km);
  validate(p);
  return gaussian_peak(r_km, p) - std::expm1(-r_km / p.lambda);
}

double composite_density(double r_km, const ModelParams& p) {
  return p.amplitude * normalized_density(r_km, p);
}

double ring_counts(double r_km, double dr_km, const ModelParams& p) {
  require(std::isfinite(dr_km) && dr_km > 0.0, "bin width must be finite and > 0");
  return 2.0 * kPi * composite_density(r_km, p) * r_km * dr_km;
}

std::array<double, 4> ring_counts_gradient(double r_km, double dr_km, const ModelParams& p) {
  require_distance(r_km);
  require(std::isfinite(dr_km) && dr_km > 0.0, "bin width must be finite and > 0");
  validate(p);
  const double ring = 2.0 * kPi * r_km * dr_km;
  const double s = p.sigma;
  const double l = p.lambda;
  const double g = std::exp(-r_km * r_km / (2.0 * s * s));
  const double e = std::exp(-r_km / l);
  const double shape = (1.0 + p.beta) * (l * l / (s * s)) * g - std::expm1(-r_km / l);

  std::array<double, 4> grad{};
  grad[0] = ring * shape;
  grad[1] = ring * p.amplitude * (l * l / (s * s)) * g;
  grad[2] = ring * p.amplitude * (1.0 + p.beta) * l * l * g *
            (-2.0 / (s * s * s) + r_km * r_km / (s * s * s * s * s));
  grad[3] = ring * p.amplitude *
            ((1.0 + p.beta) * (2.0 * l / (s * s)) * g - (r_km / (l * l)) * e);
  return grad;
}

double cumulative_surplus(double r_km, const ModelParams& p) {
  require(!std::isnan(r_km) && r_km >= 0.0, "distance must be non-negative");
  validate(p);
  const double area = 2.0 * kPi * p.lambda * p.lambda;
  if (std::isinf(r_km)) return area * p.beta;
  const double x = r_km / p.lambda;
  const double peak = (1.0 + p.beta) * -std::expm1(-r_km * r_km / (2.0 * p.sigma * p.sigma));
  // e^{-x}(x + 1) - 1, written to keep precision as x -> 0
  const double well = std::expm1(-x) + x * std::exp(-x);
  return area * (peak + well);
}

CollectionAreas collection_areas(const ModelParams& p) {
  validate(p);
  CollectionAreas a;
  a.cg_km2 = 2.0 * kPi * p.lambda * p.lambda;
  a.ul_km2 = a.cg_km2 * p.beta;
  a.total_km2 = a.cg_km2 + a.ul_km2;
  return a;
}

AttractionRadii attraction_radii(const ModelParams& p, const ConversionFactors& c) {
  validate(p);
  validate(c);
  AttractionRadii r;
  r.cg_stroke_km = std::sqrt(2.0) * p.lambda;
  r.ul_stroke_km = std::sqrt(2.0 * p.beta) * p.lambda;
  r.cg_strike_point_km = stroke_to_strike_point_radius(r.cg_stroke_km, c);
  r.ul_strike_point_km = stroke_to_strike_point_radius(r.ul_stroke_km, c);
  r.total_strike_point_km =
      std::sqrt(2.0 * c.strokes_per_strike_point * (1.0 + p.beta)) * p.lambda;
  return r;
}

double scaled_total_strike_point_radius(const ModelParams& p, const ConversionFactors& c,
                                        double ul_scale) {
  validate(p);
  validate(c);
  require(std::isfinite(ul_scale) && ul_scale > 0.0, "ul_scale must be > 0");
  return std::sqrt(2.0 * c.strokes_per_strike_point * (1.0 + ul_scale * p.beta)) * p.lambda;
}

double stroke_to_strike_point_radius(double r_stroke, const ConversionFactors& c) {
  require_distance(r_stroke);
  validate(c);
  return std::sqrt(c.strokes_per_strike_point) * r_stroke;
}

double strike_point_to_stroke_radius(double r_sp, const ConversionFactors& c) {
  require_distance(r_sp);
  validate(c);
  return r_sp / std::sqrt(c.strokes_per_strike_point);
}

double flash_to_strike_point_radius(double r_flash, const ConversionFactors& c) {
  require_distance(r_flash);
  validate(c);
  return r_flash / std::sqrt(c.strike_points_per_flash);
}

double strike_point_to_flash_radius(double r_sp, const ConversionFactors& c) {
  require_distance(r_sp);
  validate(c);
  return r_sp * std::sqrt(c.strike_points_per_flash);
}

double eriksson_upward_fraction(double tip_height_m) {
  if (!std::isfinite(tip_height_m)) throw std::invalid_argument("tip height must be finite");
  if (tip_height_m <= 78.0) {
    throw std::domain_error("upward-lightning curve defined only for H > 78 m, got " +
                            std::to_string(tip_height_m));
  }
  return std::clamp(52.8 * std::log(tip_height_m) - 230.0, 0.0, 100.0);
}

double eriksson_collection_area(double tip_height_m) {
  require(std::isfinite(tip_height_m) && tip_height_m > 0.0, "tip height must be > 0");
  return 24.0 * std::pow(tip_height_m, 2.05);
}

double iec_strike_rate(const ReferenceModelInputs& in) {
  require(std::isfinite(in.tip_height_m) && in.tip_height_m >= 0.0, "tip height must be >= 0");
  require(std::isfinite(in.location_factor) && in.location_factor > 0.0,
          "location factor must be > 0");
  require(std::isfinite(in.density_sp) && in.density_sp >= 0.0, "density must be >= 0");
  const double radius_km = 3.0 * in.tip_height_m / 1000.0;
  return in.density_sp * kPi * radius_km * radius_km * in.location_factor;
}

RegressionRadii regression_radii(double tip_height_m) {
  require(std::isfinite(tip_height_m) && tip_height_m > 0.0, "tip height must be > 0");
  RegressionRadii r;
  r.cg_m = 11.0 + 1.6 * tip_height_m;
  r.tul_m = std::max(0.0, -300.0 + 3.5 * tip_height_m);
  return r;
}

StrikeRates regression_strike_rates(const ReferenceModelInputs& in) {
  require(std::isfinite(in.density_sp) && in.density_sp >= 0.0, "density must be >= 0");
  require(std::isfinite(in.ul_scale) && in.ul_scale > 0.0, "ul_scale must be > 0");
  const RegressionRadii r = regression_radii(in.tip_height_m);
  const double cg_km = r.cg_m / 1000.0;
  const double tul_km = r.tul_m / 1000.0;
  return {kPi * cg_km * cg_km * in.density_sp,
          in.ul_scale * kPi * tul_km * tul_km * in.density_sp};
}

}  // namespace wtl::model
