#include "ewcft/eval/pareto.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace ewcft::eval {

bool strictly_dominates(const ParetoPoint& p, const ParetoPoint& q) {
  return p.x >= q.x && p.y >= q.y && (p.x > q.x || p.y > q.y);
}

std::vector<ParetoPoint> pareto_frontier(const std::vector<ParetoPoint>& points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (points[i].x != points[j].x) return points[i].x > points[j].x;
    return points[i].y > points[j].y;
  });
  std::vector<bool> keep(points.size(), false);
  // Highest y among points with strictly larger x than the current group.
  double best_y_larger_x = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < order.size();) {
    std::size_t end = g;
    while (end < order.size() && points[order[end]].x == points[order[g]].x) ++end;
    const double group_max_y = points[order[g]].y;
    for (std::size_t k = g; k < end && points[order[k]].y == group_max_y; ++k) {
      if (group_max_y > best_y_larger_x) keep[order[k]] = true;
    }
    best_y_larger_x = std::max(best_y_larger_x, group_max_y);
    g = end;
  }
  std::vector<ParetoPoint> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (keep[i]) out.push_back(points[i]);
  }
  return out;
}

bool frontier_dominates(const std::vector<ParetoPoint>& a, const std::vector<ParetoPoint>& b) {
  return std::all_of(b.begin(), b.end(), [&](const ParetoPoint& q) {
    return std::any_of(a.begin(), a.end(), [&](const ParetoPoint& p) { return p.x >= q.x && p.y >= q.y; });
  });
}

}  // namespace ewcft::eval
