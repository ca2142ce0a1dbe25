#include <doctest.h>

#include <cmath>
#include <functional>
#include <stdexcept>

#include "snstf/chernoff.hpp"

using namespace snstf;

namespace {

// Plain-log tail exponents written in terms of the mean, bisected on the mean
// itself in log space. Shares no code with the library parameterization.
double upper_tail_exponent(double mean, double x) {
  const double d = x / mean - 1.0;
  return mean * (d - (1.0 + d) * std::log(1.0 + d));
}

double lower_tail_exponent(double mean, double x) {
  const double d = 1.0 - x / mean;
  return mean * (-d - (1.0 - d) * std::log(1.0 - d));
}

double solve_log(const std::function<double(double)>& g, double lo, double hi) {
  // g increasing on [lo, hi], sign change inside
  for (int i = 0; i < 300; ++i) {
    const double mid = std::sqrt(lo * hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

Interval oracle_expected(double x, double xi) {
  const double t = std::log(xi / 2.0);
  // Lower: mean below x whose upper tail just reaches x.
  const double lo = solve_log([&](double m) { return upper_tail_exponent(m, x) - t; }, x * 1e-20, x);
  const double hi = solve_log([&](double m) { return t - lower_tail_exponent(m, x); }, x, x * 1e6 + 100);
  return {lo, hi};
}

}  // namespace

TEST_CASE("expected-value bounds match an independent root finder") {
  for (double xi : {1e-3, 1e-10}) {
    for (double x : {1.0, 7.0, 100.0, 2.5e4, 1e6, 3e9}) {
      const Interval lib = expected_bounds_from_observed(x, xi);
      const Interval ref = oracle_expected(x, xi);
      CHECK(lib.lower == doctest::Approx(ref.lower).epsilon(1e-7));
      CHECK(lib.upper == doctest::Approx(ref.upper).epsilon(1e-7));
      CHECK(lib.contains(x));
    }
  }
}

TEST_CASE("observed-value bounds solve the tail equations") {
  for (double xi : {1e-3, 1e-10}) {
    const double t = std::log(xi / 2.0);
    for (double y : {50.0, 1e3, 1e6, 1e10}) {
      const Interval b = observed_bounds_from_expected(y, xi);
      CHECK(b.contains(y));
      CHECK(upper_tail_exponent(y, b.upper) == doctest::Approx(t).epsilon(1e-6));
      if (b.lower > 0.0) CHECK(lower_tail_exponent(y, b.lower) == doctest::Approx(t).epsilon(1e-6));
    }
  }
}

TEST_CASE("bounds widen as the failure probability shrinks") {
  double prev_w = 0.0;
  for (double xi : {1e-2, 1e-4, 1e-6, 1e-10, 1e-14}) {
    const Interval b = expected_bounds_from_observed(1e4, xi);
    CHECK(b.width() > prev_w);
    prev_w = b.width();
  }
}

TEST_CASE("relative width shrinks with the count") {
  double prev = 1e300;
  for (double x = 10; x < 1e13; x *= 10) {
    const Interval b = expected_bounds_from_observed(x, 1e-10);
    CHECK(b.width() / x < prev);
    prev = b.width() / x;
    const double y = observed_bounds_from_expected(x, 1e-10).width() / x;
    CHECK(y > 0.0);
  }
  // Large counts approach the Gaussian width 2 sqrt(2 x ln(2 / xi)).
  const double x = 1e12;
  const double g = 2.0 * std::sqrt(2.0 * x * std::log(2.0 / 1e-10));
  CHECK(expected_bounds_from_observed(x, 1e-10).width() == doctest::Approx(g).epsilon(1e-3));
}

TEST_CASE("zero-count edges") {
  const Interval b = expected_bounds_from_observed(0.0, 1e-10);
  CHECK(b.lower == 0.0);
  CHECK(b.upper == doctest::Approx(std::log(2.0 / 1e-10)));
  // The X -> 0 limit of the upper bound is continuous.
  CHECK(expected_bounds_from_observed(1e-9, 1e-10).upper == doctest::Approx(b.upper).epsilon(1e-4));
  const Interval o = observed_bounds_from_expected(0.0, 1e-10);
  CHECK(o.lower == 0.0);
  CHECK(o.upper == 0.0);
  // Small means cannot rule out zero observations.
  CHECK(observed_bounds_from_expected(5.0, 1e-10).lower == 0.0);
  CHECK(observed_bounds_from_expected(100.0, 1e-10).lower > 0.0);
}

TEST_CASE("invalid arguments are rejected") {
  CHECK_THROWS_AS(expected_bounds_from_observed(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(expected_bounds_from_observed(1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(expected_bounds_from_observed(-1.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(observed_bounds_from_expected(NAN, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(chernoff_delta_upper_observed(1.0, -0.5), std::invalid_argument);
}
