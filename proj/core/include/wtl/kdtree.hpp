#pragma once

// Static k-d tree over points in R^N. Built once, queried concurrently.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace wtl::spatial {

template <std::size_t N>
class KdTree {
 public:
  using Point = std::array<double, N>;

  KdTree() = default;

  explicit KdTree(std::vector<Point> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::uint32_t{0});
    nodes_.reserve(points_.size());
    if (!order_.empty()) build(0, order_.size(), 0);
  }

  std::size_t size() const { return points_.size(); }
  const Point& point(std::size_t i) const { return points_[i]; }

  /// Calls visit(index) for every point with squared Euclidean distance to q
  /// at most radius2.
  template <typename Visit>
  void for_each_within(const Point& q, double radius2, Visit&& visit) const {
    if (!nodes_.empty()) within(0, q, radius2, visit);
  }

  /// Nearest point accepted by `accept`, ordered by `better(a, d2a, b, d2b)`
  /// among candidates. `bound2(d2)` widens the pruning radius (callers that
  /// re-rank with a different metric pass a small slack). Returns SIZE_MAX
  /// when nothing is accepted.
  template <typename Accept, typename Better>
  std::size_t nearest(const Point& q, Accept&& accept, Better&& better, double slack2 = 0.0) const {
    std::size_t best = SIZE_MAX;
    double best_d2 = std::numeric_limits<double>::infinity();
    if (!nodes_.empty()) nearest_impl(0, q, accept, better, slack2, best, best_d2);
    return best;
  }

  static double dist2(const Point& a, const Point& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      const double d = a[k] - b[k];
      s += d * d;
    }
    return s;
  }

 private:
  struct Node {
    std::uint32_t index;  // into points_
    std::uint32_t axis;
    std::int32_t left = -1;
    std::int32_t right = -1;
  };

  std::int32_t build(std::size_t lo, std::size_t hi, std::size_t depth) {
    if (lo >= hi) return -1;
    // split on the axis of greatest spread
    Point mn, mx;
    mn.fill(std::numeric_limits<double>::infinity());
    mx.fill(-std::numeric_limits<double>::infinity());
    for (std::size_t i = lo; i < hi; ++i) {
      for (std::size_t k = 0; k < N; ++k) {
        mn[k] = std::min(mn[k], points_[order_[i]][k]);
        mx[k] = std::max(mx[k], points_[order_[i]][k]);
      }
    }
    std::size_t axis = depth % N;
    double spread = -1.0;
    for (std::size_t k = 0; k < N; ++k) {
      if (mx[k] - mn[k] > spread) {
        spread = mx[k] - mn[k];
        axis = k;
      }
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return points_[a][axis] < points_[b][axis];
                     });
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({order_[mid], static_cast<std::uint32_t>(axis)});
    const std::int32_t l = build(lo, mid, depth + 1);
    const std::int32_t r = build(mid + 1, hi, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  template <typename Visit>
  void within(std::int32_t n, const Point& q, double r2, Visit& visit) const {
    const Node& node = nodes_[n];
    const Point& p = points_[node.index];
    if (dist2(p, q) <= r2) visit(static_cast<std::size_t>(node.index));
    const double diff = q[node.axis] - p[node.axis];
    const std::int32_t near = diff <= 0 ? node.left : node.right;
    const std::int32_t far = diff <= 0 ? node.right : node.left;
    if (near >= 0) within(near, q, r2, visit);
    if (far >= 0 && diff * diff <= r2) within(far, q, r2, visit);
  }

  template <typename Accept, typename Better>
  void nearest_impl(std::int32_t n, const Point& q, Accept& accept, Better& better, double slack2,
                    std::size_t& best, double& best_d2) const {
    const Node& node = nodes_[n];
    const Point& p = points_[node.index];
    if (accept(static_cast<std::size_t>(node.index))) {
      const double d2 = dist2(p, q);
      if (best == SIZE_MAX || better(node.index, d2, best, best_d2)) {
        best = node.index;
        best_d2 = d2;
      }
    }
    const double diff = q[node.axis] - p[node.axis];
    const std::int32_t near = diff <= 0 ? node.left : node.right;
    const std::int32_t far = diff <= 0 ? node.right : node.left;
    if (near >= 0) nearest_impl(near, q, accept, better, slack2, best, best_d2);
    if (far >= 0 && diff * diff <= best_d2 + slack2) {
      nearest_impl(far, q, accept, better, slack2, best, best_d2);
    }
  }

  std::vector<Point> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace wtl::spatial
