#include "wtl/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace wtl::hist {
namespace {

std::int64_t to_fixed(double w) {
  const double scaled = std::round(w * WeightedHistogram::kFixedScale);
  if (!(scaled >= 0.0 && scaled < 9.0e18)) throw std::overflow_error("histogram weight out of range");
  return static_cast<std::int64_t>(scaled);
}

}  // namespace

WeightedHistogram::WeightedHistogram(double bin_width_km, double max_radius_km)
    : bin_width_(bin_width_km), max_radius_(max_radius_km) {
  if (!(std::isfinite(bin_width_km) && bin_width_km > 0.0 && std::isfinite(max_radius_km) &&
        max_radius_km > 0.0)) {
    throw std::invalid_argument("histogram geometry must be positive and finite");
  }
  const double n = std::round(max_radius_km / bin_width_km);
  if (n < 1.0 || std::abs(n * bin_width_km - max_radius_km) > 1e-9 * max_radius_km) {
    throw std::invalid_argument("max_radius must be an integer multiple of bin_width");
  }
  fixed_.assign(static_cast<std::size_t>(n), 0);
  raw_.assign(static_cast<std::size_t>(n), 0);
}

double WeightedHistogram::bin_area(std::size_t i) const {
  return 2.0 * model::kPi * bin_center(i) * bin_width_;
}

bool WeightedHistogram::add(double distance_km, double weight) {
  if (!(std::isfinite(weight) && weight > 0.0)) throw std::invalid_argument("weight must be positive");
  if (!(distance_km >= 0.0 && distance_km < max_radius_)) {
    ++skipped_;
    return false;
  }
  const auto i = std::min(raw_.size() - 1, static_cast<std::size_t>(distance_km / bin_width_));
  fixed_[i] += to_fixed(weight);
  ++raw_[i];
  return true;
}

std::vector<double> WeightedHistogram::counts() const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = count(i);
  return out;
}

std::size_t WeightedHistogram::nonzero_bins() const {
  return static_cast<std::size_t>(std::count_if(fixed_.begin(), fixed_.end(), [](auto v) { return v > 0; }));
}

bool WeightedHistogram::same_geometry(const WeightedHistogram& other) const {
  return bin_width_ == other.bin_width_ && max_radius_ == other.max_radius_ && size() == other.size();
}

void WeightedHistogram::merge(const WeightedHistogram& other) {
  if (!same_geometry(other)) throw std::invalid_argument("cannot merge histograms of different geometry");
  for (std::size_t i = 0; i < size(); ++i) {
    fixed_[i] += other.fixed_[i];
    raw_[i] += other.raw_[i];
  }
  skipped_ += other.skipped_;
  turbine_years += other.turbine_years;
}

nlohmann::json WeightedHistogram::to_json() const {
  return {{"bin_width_km", bin_width_},
          {"max_radius_km", max_radius_},
          {"counts", counts()},
          {"raw_counts", raw_},
          {"skipped", skipped_},
          {"turbine_years", turbine_years},
          {"provenance", {{"filter", provenance.filter}, {"iteration", provenance.iteration}}}};
}

WeightedHistogram WeightedHistogram::from_json(const nlohmann::json& j) {
  WeightedHistogram h(j.at("bin_width_km").get<double>(), j.at("max_radius_km").get<double>());
  const auto counts = j.at("counts").get<std::vector<double>>();
  const auto raw = j.at("raw_counts").get<std::vector<std::uint64_t>>();
  if (counts.size() != h.size() || raw.size() != h.size()) {
    throw std::invalid_argument("histogram JSON bin count does not match its geometry");
  }
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!(counts[i] >= 0.0)) throw std::invalid_argument("histogram counts must be >= 0");
    h.fixed_[i] = to_fixed(counts[i]);
    h.raw_[i] = raw[i];
  }
  h.skipped_ = j.value("skipped", std::uint64_t{0});
  h.turbine_years = j.value("turbine_years", 0.0);
  if (j.contains("provenance")) {
    h.provenance.filter = j["provenance"].value("filter", std::string("all"));
    h.provenance.iteration = j["provenance"].value("iteration", 0);
  }
  return h;
}

WeightFunction::WeightFunction(const model::ModelParams& params) : unit_(false), params_(params) {
  model::validate(params_);
}

double WeightFunction::operator()(double nearest_distance_km) const {
  if (unit_) return 1.0;
  return 1.0 / model::normalized_density(nearest_distance_km, params_);
}

double WeightFunction::pair_weight(const spatial::MatchedPair& pair) const {
  if (unit_ || pair.is_nearest()) return 1.0;
  return (*this)(pair.nearest_distance_km);
}

WeightedHistogram accumulate(std::span<const spatial::MatchedPair> pairs, const WeightFunction& weights,
                             const Geometry& geometry, unsigned workers) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(1, pairs.size() / 4096)));

  const auto run = [&](std::span<const spatial::MatchedPair> part) {
    WeightedHistogram h(geometry.bin_width_km, geometry.max_radius_km);
    for (const auto& p : part) h.add(p.distance_km, weights.pair_weight(p));
    return h;
  };
  if (workers <= 1) return run(pairs);

  std::vector<WeightedHistogram> partial(workers, WeightedHistogram(geometry.bin_width_km, geometry.max_radius_km));
  {
    std::vector<std::jthread> pool;
    const std::size_t per = (pairs.size() + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t lo = std::min(pairs.size(), w * per);
      const std::size_t hi = std::min(pairs.size(), lo + per);
      pool.emplace_back([&, w, lo, hi] { partial[w] = run(pairs.subspan(lo, hi - lo)); });
    }
  }
  WeightedHistogram out(geometry.bin_width_km, geometry.max_radius_km);
  for (const auto& h : partial) out.merge(h);
  return out;
}

std::vector<double> normalized_counts(const WeightedHistogram& h, const model::ModelParams& params) {
  model::validate(params);
  if (!(params.amplitude > 0.0)) throw std::invalid_argument("amplitude must be > 0 to normalise");
  std::vector<double> out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = h.count(i) / params.amplitude;
  return out;
}

DerivedViews derived_views(const WeightedHistogram& h, const model::ModelParams& params) {
  DerivedViews v;
  v.normalized = normalized_counts(h, params);
  const std::size_t n = h.size();
  v.radius_km.resize(n);
  v.density.resize(n);
  v.surplus.resize(n);
  v.cumulative_surplus.resize(n);
  double running = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double area = h.bin_area(i);
    v.radius_km[i] = h.bin_center(i);
    v.density[i] = v.normalized[i] / area;
    v.surplus[i] = v.normalized[i] - area;
    running += v.surplus[i];
    v.cumulative_surplus[i] = running;
  }
  return v;
}

}  // namespace wtl::hist
