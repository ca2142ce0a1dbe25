#include "snstf/phase.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "snstf/protocol.hpp"

namespace snstf {

namespace {

constexpr double kDeg = kPi / 180.0;

double wrap_two_pi(double x) {
  double r = std::fmod(x, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

}  // namespace

DriftPath::DriftPath(double interval_ms, double initial_phase, std::vector<double> rates)
    : interval_ms_(interval_ms), rates_(std::move(rates)) {
  if (!(interval_ms > 0.0)) throw std::invalid_argument("resample interval must be > 0");
  if (rates_.empty()) rates_.push_back(0.0);
  knots_.resize(rates_.size());
  double phase = initial_phase;
  for (std::size_t k = 0; k < rates_.size(); ++k) {
    knots_[k] = phase;
    phase += rates_[k] * interval_ms_;
  }
}

double DriftPath::phase_at(double t_ms) const {
  if (knots_.empty()) return 0.0;
  const double pos = std::max(0.0, t_ms) / interval_ms_;
  const auto k = std::min(static_cast<std::size_t>(pos), rates_.size() - 1);
  return knots_[k] + rates_[k] * (std::max(0.0, t_ms) - static_cast<double>(k) * interval_ms_);
}

double DriftPath::rate_at(double t_ms) const {
  if (rates_.empty()) return 0.0;
  const auto k = std::min(static_cast<std::size_t>(std::max(0.0, t_ms) / interval_ms_), rates_.size() - 1);
  return rates_[k];
}

DriftPath sample_drift(const DriftModel& model, double duration_ms) {
  if (!(duration_ms > 0.0)) throw std::invalid_argument("drift duration must be > 0");
  if (model.rate_std_rad_per_ms < 0.0) throw std::invalid_argument("drift rate std must be >= 0");
  const auto n = static_cast<std::size_t>(std::ceil(duration_ms / model.resample_interval_ms));
  std::vector<double> rates(n, 0.0);
  if (model.rate_std_rad_per_ms > 0.0) {
    std::mt19937_64 rng(model.seed);
    std::normal_distribution<double> g(0.0, model.rate_std_rad_per_ms);
    for (auto& r : rates) r = g(rng);
  }
  return DriftPath(model.resample_interval_ms, model.initial_phase, std::move(rates));
}

std::array<double, 4> reference_probs(double phi) {
  std::array<double, 4> p{};
  for (int i = 0; i < 4; ++i) {
    const double c = std::cos(0.5 * (kReferenceOffsets[i] + phi));
    p[i] = c * c;
  }
  return p;
}

double phase_residual(const std::array<double, 4>& counts, double phi) {
  const double total = counts[0] + counts[1] + counts[2] + counts[3];
  // cos(offset_i + phi) for offsets {pi, 3pi/2, 0, pi/2}.
  const double c = std::cos(phi), s = std::sin(phi);
  const double pt[4] = {0.5 * (1.0 - c), 0.5 * (1.0 + s), 0.5 * (1.0 + c), 0.5 * (1.0 - s)};
  double err = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double d = 2.0 * counts[i] / total - pt[i];
    err += d * d;
  }
  return err;
}

PhaseEstimate estimate_phase(const ReferenceFrame& frame) {
  double total = 0.0;
  for (double n : frame.counts) {
    if (n < 0.0) throw std::invalid_argument("reference counts must be >= 0");
    total += n;
  }
  if (!(total > 0.0)) throw std::invalid_argument("reference frame has no counts");

  constexpr int kScan = 720;
  const double step = kTwoPi / kScan;
  int best = 0;
  double best_err = phase_residual(frame.counts, 0.0);
  for (int k = 1; k < kScan; ++k) {
    const double e = phase_residual(frame.counts, k * step);
    if (e < best_err) {
      best_err = e;
      best = k;
    }
  }

  // Golden-section search on the bracketing interval around the scan minimum.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = (best - 1) * step, b = (best + 1) * step;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = phase_residual(frame.counts, c), fd = phase_residual(frame.counts, d);
  while (b - a > 1e-8) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = phase_residual(frame.counts, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = phase_residual(frame.counts, d);
    }
  }
  const double phi = 0.5 * (a + b);
  PhaseEstimate est;
  est.delta_phi_t = wrap_two_pi(phi);
  est.residual = std::max(0.0, std::min(best_err, phase_residual(frame.counts, phi)));
  return est;
}

std::vector<bool> accept_frames(const std::vector<PhaseEstimate>& estimates, double rc) {
  if (!(rc > 0.0 && rc <= 1.0)) throw std::invalid_argument("rc must lie in (0, 1]");
  const std::size_t n = estimates.size();
  std::vector<bool> keep(n, false);
  if (n == 0) return keep;
  const auto k = std::min(n, static_cast<std::size_t>(std::ceil(rc * static_cast<double>(n) - 1e-9)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return estimates[x].residual < estimates[y].residual;
  });
  for (std::size_t i = 0; i < k; ++i) keep[order[i]] = true;
  return keep;
}

std::vector<bool> accept_frames_below_residual(const std::vector<PhaseEstimate>& estimates,
                                               double threshold) {
  std::vector<bool> keep(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i) keep[i] = estimates[i].residual <= threshold;
  return keep;
}

SliceDecision wrap_mismatch(double angle_rad) {
  const double a = wrap_two_pi(angle_rad);
  SliceDecision s;
  // Distances to 0 (or 2 pi) and to pi.
  const double to_zero = std::min(a, kTwoPi - a);
  const double to_pi = std::abs(a - kPi);
  s.inverted = to_pi < to_zero;
  s.mismatch_deg = std::min(90.0, (s.inverted ? to_pi : to_zero) / kDeg);
  return s;
}

SliceDecision slice_accept(double theta_a, double theta_b, double delta_phi_t, double ds_half_deg) {
  if (!(ds_half_deg > 0.0 && ds_half_deg <= 90.0)) {
    throw std::invalid_argument("ds_half must lie in (0, 90] degrees");
  }
  SliceDecision s = wrap_mismatch(theta_a - theta_b + delta_phi_t);
  s.accepted = s.mismatch_deg <= ds_half_deg;
  return s;
}

double lambda_to_ds_half_deg(double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in (0, 1]");
  return std::acos(1.0 - lambda) / kDeg;
}

double ds_half_deg_to_lambda(double ds_half_deg) { return 1.0 - std::cos(ds_half_deg * kDeg); }

}  // namespace snstf
