#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ldcp {

/// A closed real interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  Interval() = default;
  Interval(double l, double h) : lo(l), hi(h) {
    if (!(l <= h)) throw std::invalid_argument("interval: lower > upper");
  }

  static Interval point(double v) { return Interval(v, v); }

  double width() const { return hi - lo; }
  bool is_point() const { return lo == hi; }
  bool contains(double v) const { return lo <= v && v <= hi; }
  bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
  bool finite() const { return std::isfinite(lo) && std::isfinite(hi); }

  Interval hull(const Interval& o) const {
    return Interval(std::min(lo, o.lo), std::max(hi, o.hi));
  }
  void expand(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

/// Size of the intersection, 0 when empty.
inline double meet_size(const Interval& a, const Interval& b) {
  const double lo = std::max(a.lo, b.lo);
  const double hi = std::min(a.hi, b.hi);
  return hi >= lo ? hi - lo : 0.0;
}

/// Size of the convex hull of both intervals.
inline double join_size(const Interval& a, const Interval& b) {
  return std::max(a.hi, b.hi) - std::min(a.lo, b.lo);
}

/// Jaccard index |a meet b| / |a join b| in [0,1].
///
/// Two identical point intervals have index 1 (the 0/0 case); a point
/// against a non-point interval has index 0 even when contained, because
/// set sizes are used literally. Disjoint intervals have index 0.
inline double jaccard(const Interval& a, const Interval& b) {
  const double join = join_size(a, b);
  if (join == 0.0) return 1.0;  // both are the same point
  const double lo = std::max(a.lo, b.lo);
  const double hi = std::min(a.hi, b.hi);
  if (hi < lo) return 0.0;  // disjoint
  return (hi - lo) / join;
}

}  // namespace ldcp
