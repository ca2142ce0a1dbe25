#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace snstf {

/// Relative-phase drift: the drift rate is Gaussian and redrawn every
/// resample interval; the phase is its continuous integral.
struct DriftModel {
  double rate_std_rad_per_ms = 0.0;
  double resample_interval_ms = 1.0;
  std::uint64_t seed = 0;
  double initial_phase = 0.0;
};

class DriftPath {
 public:
  DriftPath() = default;
  DriftPath(double interval_ms, double initial_phase, std::vector<double> rates);

  /// Unwrapped phase at time t (ms). Times past the end extrapolate with the
  /// last rate.
  double phase_at(double t_ms) const;
  double rate_at(double t_ms) const;
  double duration_ms() const { return interval_ms_ * static_cast<double>(rates_.size()); }
  const std::vector<double>& rates() const { return rates_; }

 private:
  double interval_ms_ = 1.0;
  std::vector<double> rates_;
  std::vector<double> knots_;  // phase at the start of each interval
};

/// Deterministic in (model.seed, duration).
DriftPath sample_drift(const DriftModel& model, double duration_ms);

/// Phase offsets of the four reference settings (Alice {0, pi/2, pi, 3pi/2}
/// against Bob's pi).
inline constexpr std::array<double, 4> kReferenceOffsets = {
    3.14159265358979323846, 1.5 * 3.14159265358979323846, 0.0, 0.5 * 3.14159265358979323846};

/// cos^2((offset_i + phi) / 2) for each reference setting.
std::array<double, 4> reference_probs(double phi);

struct ReferenceFrame {
  std::array<double, 4> counts{};  // N_i, both detectors combined
  int periods_accumulated = 12;
  double t_ms = 0.0;               // frame start
  double true_phase = 0.0;         // ground truth at frame centre (simulation only)
};

struct PhaseEstimate {
  double delta_phi_t = 0.0;  // in [0, 2 pi)
  double residual = 0.0;
  bool accepted = true;
};

/// Sum of squared differences between normalized counts and reference_probs.
double phase_residual(const std::array<double, 4>& counts, double phi);

/// Least-squares phase fit: 0.5 degree scan, then golden-section refinement.
/// Throws std::invalid_argument on an all-zero frame.
PhaseEstimate estimate_phase(const ReferenceFrame& frame);

/// Keeps the ceil(rc * n) frames with the smallest residual (ties by index).
std::vector<bool> accept_frames(const std::vector<PhaseEstimate>& estimates, double rc);

/// Keeps frames whose residual is at most the threshold.
std::vector<bool> accept_frames_below_residual(const std::vector<PhaseEstimate>& estimates,
                                               double threshold);

struct SliceDecision {
  bool accepted = false;
  double mismatch_deg = 0.0;  // distance to the nearest of {0, pi}, in [0, 90]
  bool inverted = false;      // nearest point is pi: det2 is the expected port
};

/// Wrapped distance of an angle from {0, pi}.
SliceDecision wrap_mismatch(double angle_rad);

/// Post-selection of an X window from the slice phases and the estimated
/// relative phase.
SliceDecision slice_accept(double theta_a, double theta_b, double delta_phi_t, double ds_half_deg);

/// 1 - cos(ds_half) = lambda.
double lambda_to_ds_half_deg(double lambda);
double ds_half_deg_to_lambda(double ds_half_deg);

}  // namespace snstf
