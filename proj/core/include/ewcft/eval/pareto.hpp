#pragma once

#include <string>
#include <vector>

namespace ewcft::eval {

// x: original-task accuracy, y: fine-tuning test accuracy. Both are maximized.
struct ParetoPoint {
  double x = 0.0;
  double y = 0.0;
  std::string label;

  friend bool operator==(const ParetoPoint&, const ParetoPoint&) = default;
};

// True when p >= q in both coordinates and > in at least one.
bool strictly_dominates(const ParetoPoint& p, const ParetoPoint& q);

// Points not strictly dominated by any other point, in input order. Exact
// duplicates are all kept. O(n log n).
std::vector<ParetoPoint> pareto_frontier(const std::vector<ParetoPoint>& points);

// True when every point of b is weakly dominated (<= in both coordinates) by
// some point of a.
bool frontier_dominates(const std::vector<ParetoPoint>& a, const std::vector<ParetoPoint>& b);

}  // namespace ewcft::eval
