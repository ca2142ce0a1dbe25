#pragma once

namespace snstf {

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  bool contains(double x) const { return lower <= x && x <= upper; }
  double width() const { return upper - lower; }
};

/// Bounds on the expected value behind an observed count X, each side
/// failing with probability at most xi / 2. For X = 0 the lower bound is 0
/// and the upper bound is the X -> 0 limit, ln(2 / xi).
/// Throws std::invalid_argument unless 0 < xi < 1 and X >= 0.
Interval expected_bounds_from_observed(double observed, double xi);

/// Range an observed count will fall in given its expected value Y. When
/// Y < ln(2 / xi) the lower bound is 0; Y = 0 gives (0, 0).
Interval observed_bounds_from_expected(double expected, double xi);

/// Deviation parameters solved by bisection; exposed for tests.
double chernoff_delta_lower_expected(double observed, double xi);   // X / (1 + d)
double chernoff_delta_upper_expected(double observed, double xi);   // X / (1 - d)
double chernoff_delta_upper_observed(double expected, double xi);   // (1 + d) Y
double chernoff_delta_lower_observed(double expected, double xi);   // (1 - d) Y

}  // namespace snstf
