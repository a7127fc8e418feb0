#include "wtl/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace wtl::fit {
namespace {

using Vec4 = Eigen::Matrix<double, 4, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;

constexpr double kMinLogParam = 1e-300;

model::ModelParams from_log(const Vec4& t) {
  return {std::exp(t[0]), std::exp(t[1]), std::exp(t[2]), std::exp(t[3])};
}

Vec4 to_log(const model::ModelParams& p) {
  return {std::log(std::max(p.amplitude, kMinLogParam)), std::log(std::max(p.beta, 1e-12)),
          std::log(p.sigma), std::log(p.lambda)};
}

std::vector<double> residual_weights(const hist::WeightedHistogram& h, bool poisson) {
  std::vector<double> w(h.size(), 1.0);
  if (poisson) {
    for (std::size_t i = 0; i < h.size(); ++i) w[i] = 1.0 / std::sqrt(std::max(h.count(i), 1.0));
  }
  return w;
}

struct Linearisation {
  Eigen::VectorXd residual;  // weighted y - f
  Eigen::MatrixXd jacobian;  // weighted df/dlog(p)
  double cost = 0.0;
};

bool finite_params(const model::ModelParams& p) {
  return std::isfinite(p.amplitude) && std::isfinite(p.beta) && std::isfinite(p.sigma) &&
         std::isfinite(p.lambda) && p.sigma > 0 && p.lambda > 0;
}

double cost_at(const hist::WeightedHistogram& h, const std::vector<double>& w, const model::ModelParams& p) {
  double c = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double r = w[i] * (h.count(i) - model::ring_counts(h.bin_center(i), h.bin_width_km(), p));
    c += r * r;
  }
  return c;
}

Linearisation linearise(const hist::WeightedHistogram& h, const std::vector<double>& w,
                        const model::ModelParams& p) {
  const auto m = static_cast<Eigen::Index>(h.size());
  Linearisation lin{Eigen::VectorXd(m), Eigen::MatrixXd(m, 4), 0.0};
  const std::array<double, 4> scale{p.amplitude, p.beta, p.sigma, p.lambda};
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto bin = static_cast<std::size_t>(i);
    const double r = h.bin_center(bin);
    const double f = model::ring_counts(r, h.bin_width_km(), p);
    const auto g = model::ring_counts_gradient(r, h.bin_width_km(), p);
    lin.residual[i] = w[bin] * (h.count(bin) - f);
    for (int k = 0; k < 4; ++k) lin.jacobian(i, k) = w[bin] * g[k] * scale[k];
  }
  lin.cost = lin.residual.squaredNorm();
  return lin;
}

Covariance covariance_of(const hist::WeightedHistogram& h, const std::vector<double>& w,
                         const model::ModelParams& p, double cost) {
  Covariance out;
  for (auto& row : out) row.fill(std::numeric_limits<double>::quiet_NaN());
  const std::size_t m = h.size();
  if (m <= 4) return out;
  Mat4 normal = Mat4::Zero();
  for (std::size_t i = 0; i < m; ++i) {
    const auto g = model::ring_counts_gradient(h.bin_center(i), h.bin_width_km(), p);
    const Vec4 row = w[i] * Vec4(g[0], g[1], g[2], g[3]);
    normal += row * row.transpose();
  }
  Eigen::FullPivLU<Mat4> lu(normal);
  if (!normal.allFinite() || !lu.isInvertible()) return out;
  const double s2 = cost / static_cast<double>(m - 4);
  const Mat4 inv = lu.inverse();
  const Mat4 cov = s2 * 0.5 * (inv + inv.transpose());
  if (!cov.allFinite()) return out;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) out[a][b] = cov(a, b);
  return out;
}

double max_relative_change(const model::ModelParams& a, const model::ModelParams& b) {
  const auto rel = [](double x, double y) { return std::abs(x - y) / std::max(std::abs(y), 1e-12); };
  return std::max({rel(a.amplitude, b.amplitude), rel(a.beta, b.beta), rel(a.sigma, b.sigma),
                   rel(a.lambda, b.lambda)});
}

}  // namespace

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kConverged: return "converged";
    case SolveStatus::kMaxIterations: return "max_iterations";
    case SolveStatus::kSingular: return "singular";
  }
  return "unknown";
}

model::ModelParams initial_guess(const hist::WeightedHistogram& h) {
  double counts = 0.0, area = 0.0;
  const double far = std::min(1.5, 0.75 * h.max_radius_km());
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h.bin_center(i) > far) {
      counts += h.count(i);
      area += h.bin_area(i);
    }
  }
  if (counts <= 0.0) {
    counts = area = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      counts += h.count(i);
      area += h.bin_area(i);
    }
  }
  return {area > 0.0 ? counts / area : 0.0, 0.5, 0.05, 0.1};
}

double residual_norm(const hist::WeightedHistogram& h, const model::ModelParams& p, bool poisson_weighted) {
  model::validate(p);
  return std::sqrt(cost_at(h, residual_weights(h, poisson_weighted), p));
}

FitResult solve_lm(const hist::WeightedHistogram& h, const model::ModelParams& initial,
                   const LmOptions& options) {
  model::validate(initial);
  if (h.nonzero_bins() < 10) {
    throw std::invalid_argument("fit needs at least 10 non-empty bins, have " +
                                std::to_string(h.nonzero_bins()));
  }
  if (!(initial.amplitude > 0.0)) throw std::invalid_argument("initial amplitude must be > 0");

  const auto w = residual_weights(h, options.poisson_weighted);
  Vec4 theta = to_log(initial);
  model::ModelParams p = from_log(theta);
  Linearisation lin = linearise(h, w, p);

  FitResult result;
  result.status = SolveStatus::kMaxIterations;
  result.lm_residual_history.push_back(std::sqrt(lin.cost));
  double mu = options.initial_damping;

  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const Mat4 a = lin.jacobian.transpose() * lin.jacobian;
    const Vec4 g = lin.jacobian.transpose() * lin.residual;
    if (!a.allFinite() || !g.allFinite()) {
      result.status = SolveStatus::kSingular;
      break;
    }
    bool accepted = false;
    bool stop = false;
    while (!accepted && !stop) {
      Mat4 damped = a;
      for (int k = 0; k < 4; ++k) damped(k, k) += mu * std::max(a(k, k), 1e-300);
      Eigen::LDLT<Mat4> ldlt(damped);
      const Vec4 delta = ldlt.solve(g);
      if (ldlt.info() != Eigen::Success || !delta.allFinite()) {
        result.status = SolveStatus::kSingular;
        stop = true;
        break;
      }
      const Vec4 trial_theta = theta + delta;
      const model::ModelParams trial = from_log(trial_theta);
      const double trial_cost = finite_params(trial) ? cost_at(h, w, trial)
                                                     : std::numeric_limits<double>::infinity();
      if (std::isfinite(trial_cost) && trial_cost < lin.cost) {
        const double rel = (lin.cost - trial_cost) / std::max(lin.cost, 1e-300);
        theta = trial_theta;
        p = trial;
        lin = linearise(h, w, p);
        result.lm_residual_history.push_back(std::sqrt(lin.cost));
        mu /= options.damping_decrease;
        accepted = true;
        if (rel < options.relative_residual_tol || delta.norm() < options.step_tol) {
          result.status = SolveStatus::kConverged;
          stop = true;
        }
      } else {
        mu *= options.damping_increase;
        if (delta.norm() < options.step_tol || mu > 1e20) {
          // no representable descent step left: at a stationary point
          result.status = SolveStatus::kConverged;
          stop = true;
        }
      }
    }
    if (stop) {
      ++it;
      break;
    }
  }

  result.params = p;
  result.lm_iterations = it;
  result.residual_norm = std::sqrt(lin.cost);
  result.converged = result.status == SolveStatus::kConverged;
  result.covariance = covariance_of(h, w, p, lin.cost);
  result.iteration_trace.push_back({0, p, result.residual_norm});
  return result;
}

IterativeFit iterative_fit(std::span<const spatial::MatchedPair> pairs, const IterativeOptions& options) {
  if (pairs.empty()) throw std::invalid_argument("iterative fit needs at least one matched pair");
  if (options.n_iter < 0) throw std::invalid_argument("n_iter must be >= 0");

  IterativeFit out;
  hist::WeightFunction weights;
  model::ModelParams previous{};
  std::vector<TraceEntry> trace;

  for (int k = 0; k <= options.n_iter; ++k) {
    auto h = hist::accumulate(pairs, weights, options.geometry, options.workers);
    h.turbine_years = options.turbine_years;
    h.provenance = {options.filter, k};
    FitResult pass = solve_lm(h, initial_guess(h), options.lm);
    trace.push_back({k, pass.params, pass.residual_norm});
    out.histograms.push_back(std::move(h));
    const bool ok = pass.converged;
    const double change = k > 0 ? max_relative_change(pass.params, previous) : 0.0;
    out.passes.push_back(pass);

    out.result = pass;
    out.result.iteration_trace = trace;
    out.result.max_relative_change = change;
    if (!ok) {
      out.result.converged = false;
      return out;
    }
    previous = pass.params;
    weights = hist::WeightFunction(pass.params);
  }
  out.result.converged = options.n_iter == 0 || out.result.max_relative_change < options.convergence_tol;
  return out;
}

nlohmann::json to_json(const FitResult& r, const model::ConversionFactors& conv, double ul_scale,
                       const nlohmann::json& filter) {
  const auto param_json = [](const model::ModelParams& p) {
    return nlohmann::json{{"amplitude", p.amplitude}, {"beta", p.beta}, {"sigma_km", p.sigma}, {"lambda_km", p.lambda}};
  };
  const auto areas = model::collection_areas(r.params);
  const auto radii = model::attraction_radii(r.params, conv);
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& t : r.iteration_trace) {
    trace.push_back({{"iteration", t.iteration}, {"params", param_json(t.params)}, {"residual_norm", t.residual_norm}});
  }
  nlohmann::json cov = nlohmann::json::array();
  for (const auto& row : r.covariance) {
    nlohmann::json jr = nlohmann::json::array();
    for (double v : row) jr.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
    cov.push_back(jr);
  }
  return {{"params", param_json(r.params)},
          {"converged", r.converged},
          {"status", to_string(r.status)},
          {"residual_norm", r.residual_norm},
          {"lm_iterations", r.lm_iterations},
          {"max_relative_change", r.max_relative_change},
          {"areas_km2", {{"cg", areas.cg_km2}, {"ul", areas.ul_km2}, {"total", areas.total_km2}}},
          {"radii_km",
           {{"cg_stroke", radii.cg_stroke_km},
            {"ul_stroke", radii.ul_stroke_km},
            {"cg_strike_point", radii.cg_strike_point_km},
            {"ul_strike_point", radii.ul_strike_point_km},
            {"total_strike_point", radii.total_strike_point_km},
            {"total_strike_point_scaled", model::scaled_total_strike_point_radius(r.params, conv, ul_scale)}}},
          {"ul_scale", ul_scale},
          {"conversion",
           {{"strokes_per_strike_point", conv.strokes_per_strike_point},
            {"strike_points_per_flash", conv.strike_points_per_flash}}},
          {"upward_fraction", r.params.beta / (1.0 + r.params.beta)},
          {"iteration_trace", trace},
          {"covariance", cov},
          {"filter", filter}};
}

}  // namespace wtl::fit
