#pragma once

// Damped least-squares fit of the ring-count model to a distance histogram,
// and the outer reweighting loop that removes neighbouring-turbine effects.

#include <array>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wtl/histogram.hpp"
#include "wtl/model.hpp"
#include "wtl/spatial.hpp"

namespace wtl::fit {

struct LmOptions {
  double initial_damping = 1e-3;
  double damping_increase = 10.0;
  double damping_decrease = 10.0;
  double relative_residual_tol = 1e-10;
  double step_tol = 1e-12;
  int max_iterations = 200;
  /// Weight residuals by 1/max(N_i, 1) (Poisson variance). Off by default.
  bool poisson_weighted = false;
};

enum class SolveStatus { kConverged, kMaxIterations, kSingular };

const char* to_string(SolveStatus s);

struct TraceEntry {
  int iteration = 0;
  model::ModelParams params;
  double residual_norm = 0.0;
};

using Covariance = std::array<std::array<double, 4>, 4>;

struct FitResult {
  model::ModelParams params;
  /// One entry per outer iteration (a single entry for a plain solve).
  std::vector<TraceEntry> iteration_trace;
  bool converged = false;
  SolveStatus status = SolveStatus::kConverged;
  /// Parameter covariance in (amplitude, beta, sigma, lambda) order; NaN when
  /// the normal matrix is singular.
  Covariance covariance{};
  double residual_norm = 0.0;
  int lm_iterations = 0;
  /// Residual norm after each accepted LM step of the last solve.
  std::vector<double> lm_residual_history;
  /// Largest relative parameter change between the last two outer iterations.
  double max_relative_change = 0.0;
};

/// Far-field amplitude estimate plus the fixed shape defaults
/// (beta 0.5, sigma 0.05 km, lambda 0.1 km).
model::ModelParams initial_guess(const hist::WeightedHistogram& h);

/// Residual norm sqrt(sum (N_i - model_i)^2), Poisson-weighted if requested.
double residual_norm(const hist::WeightedHistogram& h, const model::ModelParams& p,
                     bool poisson_weighted = false);

/// One Levenberg-Marquardt solve over log(amplitude, beta, sigma, lambda).
/// Throws std::invalid_argument when the histogram has fewer than 10
/// non-empty bins or `initial` is invalid; numerical failure is reported in
/// the result instead.
FitResult solve_lm(const hist::WeightedHistogram& h, const model::ModelParams& initial,
                   const LmOptions& options = {});

struct IterativeOptions {
  int n_iter = 3;  // reweighting passes after the unit-weight pass 0
  double convergence_tol = 1e-3;
  LmOptions lm;
  hist::Geometry geometry;
  unsigned workers = 1;
  double turbine_years = 0.0;
  std::string filter = "all";
};

struct IterativeFit {
  FitResult result;
  std::vector<hist::WeightedHistogram> histograms;  // one per completed pass
  std::vector<FitResult> passes;
};

/// Pass 0 bins with unit weights; pass k >= 1 reweights with pass k-1's
/// parameters. Every pass solves from initial_guess of its own histogram. A failed inner
/// solve ends the loop with converged = false.
IterativeFit iterative_fit(std::span<const spatial::MatchedPair> pairs,
                           const IterativeOptions& options = {});

nlohmann::json to_json(const FitResult& r, const model::ConversionFactors& conv = {},
                       double ul_scale = 2.0, const nlohmann::json& filter = nlohmann::json::object());

}  // namespace wtl::fit
