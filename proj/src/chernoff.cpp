#include "snstf/chernoff.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace snstf {

namespace {

constexpr double kRelTol = 1e-13;
constexpr double kSeriesCutoff = 1e-2;

void check(double count, double xi) {
  if (!(xi > 0.0 && xi < 1.0)) throw std::invalid_argument("xi must lie in (0, 1)");
  if (!(count >= 0.0) || !std::isfinite(count)) throw std::invalid_argument("count must be finite and >= 0");
}

// The four exponents below all vanish quadratically at d = 0; the series
// branches avoid cancellation when the count is large and d is tiny.

// d / (1 + d) - ln(1 + d)
double g_lower_expected(double d) {
  if (d < kSeriesCutoff) {
    double s = 0.0, p = d;
    for (int k = 2; k <= 14; ++k) {
      p *= d;
      s += ((k % 2) ? 1.0 : -1.0) * p * (1.0 - 1.0 / k);
    }
    return s;
  }
  return d / (1.0 + d) - std::log1p(d);
}

// -d / (1 - d) - ln(1 - d)
double g_upper_expected(double d) {
  if (d < kSeriesCutoff) {
    double s = 0.0, p = d;
    for (int k = 2; k <= 14; ++k) {
      p *= d;
      s -= p * (1.0 - 1.0 / k);
    }
    return s;
  }
  return -d / (1.0 - d) - std::log1p(-d);
}

// d - (1 + d) ln(1 + d)
double g_upper_observed(double d) {
  if (d < kSeriesCutoff) {
    double s = 0.0, p = d;
    for (int k = 2; k <= 14; ++k) {
      p *= d;
      s -= ((k % 2) ? -1.0 : 1.0) * p / (k * (k - 1.0));
    }
    return s;
  }
  return d - (1.0 + d) * std::log1p(d);
}

// -d - (1 - d) ln(1 - d)
double g_lower_observed(double d) {
  if (d < kSeriesCutoff) {
    double s = 0.0, p = d;
    for (int k = 2; k <= 14; ++k) {
      p *= d;
      s -= p / (k * (k - 1.0));
    }
    return s;
  }
  if (d >= 1.0) return -1.0;
  return -d - (1.0 - d) * std::log1p(-d);
}

// Root of a decreasing function h on (0, hi) with h(0) = 0 > target.
double bisect(const std::function<double(double)>& h, double target, double hi) {
  double lo = 0.0;
  for (int it = 0; it < 400 && hi - lo > kRelTol * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (h(mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Infinity when no finite deviation reaches the target (vanishing counts).
double grow_bracket(const std::function<double(double)>& h, double target) {
  double hi = 1.0;
  while (h(hi) > target) {
    hi *= 2.0;
    if (hi > 1e300) return std::numeric_limits<double>::infinity();
  }
  return hi;
}

}  // namespace

double chernoff_delta_lower_expected(double x, double xi) {
  check(x, xi);
  if (x == 0.0) return 0.0;
  const double target = std::log(xi / 2.0);
  auto h = [x](double d) { return x * g_lower_expected(d); };
  const double hi = grow_bracket(h, target);
  return std::isinf(hi) ? hi : bisect(h, target, hi);
}

namespace {

// 1 - d for the upper expected bound, bisected in log space so that tiny
// counts (d close to 1) keep full relative precision in X / (1 - d).
double upper_expected_complement(double x, double xi) {
  const double target = std::log(xi / 2.0);
  auto h = [x](double u) {
    const double d = 1.0 - u;
    return x * (d < kSeriesCutoff ? g_upper_expected(d) : -d / u - std::log(u));
  };
  double lo = 1.0, hi = 1.0;  // h(lo) < target <= h(hi)
  while (h(lo) > target) lo *= 0.5;
  if (lo == 1.0) return 1.0;
  hi = 2.0 * lo;
  for (int it = 0; it < 400 && hi - lo > kRelTol * lo; ++it) {
    const double mid = std::sqrt(lo * hi);
    (h(mid) > target ? hi : lo) = mid;
  }
  return std::sqrt(lo * hi);
}

}  // namespace

double chernoff_delta_upper_expected(double x, double xi) {
  check(x, xi);
  if (x == 0.0) return 1.0;
  return 1.0 - upper_expected_complement(x, xi);
}

double chernoff_delta_upper_observed(double y, double xi) {
  check(y, xi);
  if (y == 0.0) return 0.0;
  const double target = std::log(xi / 2.0);
  auto h = [y](double d) { return y * g_upper_observed(d); };
  const double hi = grow_bracket(h, target);
  if (std::isinf(hi)) throw std::runtime_error("Chernoff bracket failed");
  return bisect(h, target, hi);
}

double chernoff_delta_lower_observed(double y, double xi) {
  check(y, xi);
  const double target = std::log(xi / 2.0);
  if (y == 0.0 || -y >= target) return 1.0;
  auto h = [y](double d) { return y * g_lower_observed(d); };
  return bisect(h, target, 1.0);
}

Interval expected_bounds_from_observed(double x, double xi) {
  check(x, xi);
  if (x == 0.0) return {0.0, std::log(2.0 / xi)};
  const double d1 = chernoff_delta_lower_expected(x, xi);
  return {x / (1.0 + d1), x / upper_expected_complement(x, xi)};
}

Interval observed_bounds_from_expected(double y, double xi) {
  check(y, xi);
  if (y == 0.0) return {0.0, 0.0};
  const double d1 = chernoff_delta_upper_observed(y, xi);
  const double d2 = chernoff_delta_lower_observed(y, xi);
  return {(1.0 - d2) * y, (1.0 + d1) * y};
}

}  // namespace snstf
