#ifndef WEDGEWAVE_INTERVAL_HPP
#define WEDGEWAVE_INTERVAL_HPP

#include <algorithm>
#include <string>

namespace wedgewave {

// Closed interval on a lightline, used for nominal supports.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  bool contains(double x) const { return lo <= x && x <= hi; }
  bool intersects(const Interval& o) const { return lo <= o.hi && o.lo <= hi; }
  Interval shifted(double s) const { return {lo + s, hi + s}; }
  Interval reflected() const { return {-hi, -lo}; }
  bool in_negative_halfline() const { return hi <= 0.0; }
  bool in_positive_halfline() const { return lo >= 0.0; }

  std::string str() const {
    return "[" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
  }
};

}  // namespace wedgewave

#endif  // WEDGEWAVE_INTERVAL_HPP
