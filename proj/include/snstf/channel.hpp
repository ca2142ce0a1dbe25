#pragma once

#include <optional>
#include <vector>

namespace snstf {

struct DetectionTally;
struct ProtocolParams;

/// Fiber spans from Alice and Bob to the measurement station. Lengths in km;
/// alpha and the Rayleigh capture coefficient S are natural-log units (1/km).
struct FiberSpec {
  double length_a_km = 0.0;
  double length_b_km = 0.0;
  std::optional<double> loss_db_a;  // measured span loss, overrides alpha * length
  std::optional<double> loss_db_b;
  double alpha_per_km = 0.046;
  double scatter_per_km = 0.0;  // S
  double wavelength_nm = 1550.0465;

  double arm_loss_db_a() const;
  double arm_loss_db_b() const;
  double total_loss_db() const { return arm_loss_db_a() + arm_loss_db_b(); }
};

inline constexpr double kStandardFiberAlpha = 0.046;   // ~0.20 dB/km
inline constexpr double kUltraLowLossAlpha = 0.0385;  // ~0.167 dB/km

/// Transmittance of the measurement-station components seen by each arm.
struct StationOptics {
  double pc_a = 0.942, pc_b = 0.928;
  double cir_a = 0.847, cir_b = 0.852;
  double dwdm_a = 0.893, dwdm_b = 0.887;
  double pbs_a = 0.911, pbs_b = 0.865;
  double bs_a_ch1 = 0.369, bs_a_ch2 = 0.386;
  double bs_b_ch1 = 0.391, bs_b_ch2 = 0.414;
  double det_ch1 = 0.580, det_ch2 = 0.560;

  /// Optics, beam splitter and detectors for light entering from one arm,
  /// summed over both output ports.
  double arm_a() const;
  double arm_b() const;
};

struct NoiseBudget {
  double dark_count_hz = 3.5;  // per detector
  double rrsors_rate_hz = 0.0;
  double extra_rate_hz = 0.0;  // optional additive term (e.g. residual Raman) for what-if runs
  double gate_width_ns = 1.0;

  /// (dark + scattering) * gate; per detector per gate.
  double p_noise() const;
};

struct ArmEfficiency {
  double eta_a = 0.0;
  double eta_b = 0.0;
};

struct ChannelParams {
  FiberSpec fiber;
  StationOptics optics;
  double r_gate = 1.0;  // detection-window fraction, signal windows only
  NoiseBudget noise;
  /// Interference visibility is 1 - 2 * x_misalignment.
  double x_misalignment = 0.0;
  /// Total reference-pulse detections at the station (both detectors), 1/s.
  double reference_detection_rate_hz = 3.7e6;
  std::optional<ArmEfficiency> efficiency_override;

  /// End-to-end signal-window transmittance per arm.
  ArmEfficiency signal_efficiency() const;
  /// Efficiency from fiber, station optics and detectors alone.
  ArmEfficiency component_efficiency() const;
  /// Mean station transmittance (optics x detector), excluding fiber and r_gate.
  double station_efficiency() const;
  double visibility() const { return 1.0 - 2.0 * x_misalignment; }
  double p_noise() const { return noise.p_noise(); }
};

double transmittance(double loss_db);

/// Total backward Rayleigh power returned to the launch point of a span of
/// length L: P0 * S / (2 alpha) * (1 - exp(-2 alpha L)).
double backscatter_total(double p0, double s, double alpha, double length_km);

/// Forward-propagating power at the far end from double Rayleigh scattering
/// of a launch power P0, after a random-polarization factor of 1/2:
/// P0 S^2 / (4 alpha) e^{-alpha l} [l + e^{-2 alpha l} / (2 alpha) - 1 / (2 alpha)].
double rerayleigh_power(double p0, double s, double alpha, double length_km);

/// hc / lambda in joules.
double photon_energy_j(double wavelength_nm);

/// d = P_srs / E_nu + D_c in counts per second.
double rrsors_noise_rate(double p0, double s, double alpha, double length_km, double e_nu,
                         double dark_count_hz);

struct ClickProbabilities {
  double det1 = 0.0;  // marginal click probability, port with +cos(delta)
  double det2 = 0.0;
  double both = 0.0;

  double det1_only() const { return det1 - both; }
  double det2_only() const { return det2 - both; }
  double heralded() const { return det1 + det2 - 2.0 * both; }
  double none() const { return 1.0 - det1 - det2 + both; }
};

/// Coherent-state interference at a balanced beam splitter followed by two
/// threshold detectors with independent noise.
ClickProbabilities click_probabilities(double mu_a, double mu_b, double delta, double eta_a,
                                       double eta_b, double p_noise, double visibility = 1.0);

/// Launch-power policy for the noise curve: P0 is chosen so that the
/// reference detections at the station stay at a fixed rate.
struct ReferencePowerPolicy {
  double reference_count_rate_hz = 2.0e6;
  double station_efficiency = 1.0;  // optics x detector seen by the reference light
  double wavelength_nm = 1550.0465;

  double launch_power_w(double alpha, double length_km) const;
};

struct NoisePoint {
  double length_km = 0.0;
  double noise_hz = 0.0;
  double rrsors_hz = 0.0;
  double dark_hz = 0.0;
};

struct NoiseModel {
  double alpha_per_km = kUltraLowLossAlpha;
  double scatter_per_km = 0.0;
  double dark_count_hz = 3.5;
  bool include_rrsors = true;
};

std::vector<NoisePoint> noise_curve(const std::vector<double>& lengths_km, const NoiseModel& model,
                                    const ReferencePowerPolicy& policy);

struct NoiseFit {
  double scatter_per_km = 0.0;
  double dark_count_hz = 0.0;
  double rms_residual_hz = 0.0;
};

/// Least-squares fit of (S, D_c) to measured (length, noise) points under a
/// fixed alpha and launch policy. The model is linear in (S^2, D_c).
NoiseFit fit_noise_curve(const std::vector<NoisePoint>& measured, double alpha_per_km,
                         const ReferencePowerPolicy& policy);

/// Arm efficiencies and per-detector noise that reproduce the single-arm and
/// vacuum yields of a recorded tally (Sent/Detected ZX30, XZ03 and the
/// vacuum-vacuum labels).
struct ChannelCalibration {
  ArmEfficiency efficiency;
  double p_noise = 0.0;
};
ChannelCalibration calibrate_to_tally(const DetectionTally& t, const ProtocolParams& p);

}  // namespace snstf
