#pragma once

#include <cstdint>
#include <vector>

#include "snstf/channel.hpp"
#include "snstf/phase.hpp"
#include "snstf/protocol.hpp"
#include "snstf/tally.hpp"

namespace snstf {

enum class SimMode { kMonteCarlo, kExpected };

enum class FrameSelection {
  kResidualThreshold,  // keep frames with residual <= rc
  kFraction,           // keep the rc fraction with the smallest residual
};

struct PhaseTrackingConfig {
  DriftModel drift;
  int periods_per_frame = 12;
  double rc = 1.0;
  FrameSelection selection = FrameSelection::kResidualThreshold;
  /// Use the true relative phase instead of the reference-pulse estimate.
  bool ideal = false;
  /// Reference frames sampled to build the estimator error distribution
  /// used by the expected mode.
  int error_model_frames = 20000;
  double error_model_spacing_ms = 1.0;
};

struct SimConfig {
  ProtocolParams protocol;
  ChannelParams channel;
  PhaseTrackingConfig tracking;
  SecurityParams security;
  SimMode mode = SimMode::kMonteCarlo;
  double n_windows = 1e6;  // Monte Carlo only; expected mode uses protocol.n_total
  std::uint64_t master_seed = 1;
  int shard_count = 1;
  double ds_half_deg = 15.0;  // annotation and the Ds rows written to the tally
  int threads = 0;            // 0: TFQKD_THREADS or hardware concurrency
};

/// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);
/// Seed for one (stream, index) cell; streams: 0 drift, 1 reference frames,
/// 2 signal windows, 3 error-model sample.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

int windows_per_frame(const SimConfig& cfg);
double frame_duration_ms(const SimConfig& cfg);
/// Expected reference detections per frame, both detectors.
double reference_counts_per_frame(const SimConfig& cfg);

/// Monte Carlo run. Deterministic in (cfg, master_seed) and independent of
/// shard_count and thread count.
DetectionTally simulate_experiment(const SimConfig& cfg);

/// Real-valued expected counts for N_total windows.
DetectionTally expected_tally(const SimConfig& cfg);

DetectionTally run_simulation(const SimConfig& cfg);

/// Contiguous reference frames from t = 0 on the run's drift path; identical
/// to the frames used by simulate_experiment with the same seed.
std::vector<ReferenceFrame> simulate_reference_stream(const SimConfig& cfg, double duration_ms);

/// Distribution of (estimated - true) relative phase seen by signal windows
/// in accepted frames, on a 0.25 degree grid over [-pi, pi).
struct PhaseErrorModel {
  static constexpr int kBins = 1440;
  std::vector<double> weight;  // sums to 1
  double kept_fraction = 1.0;
  double residual_threshold = 0.0;

  double bin_center(int k) const;
};

PhaseErrorModel phase_error_model(const SimConfig& cfg);

/// Expected tally with a precomputed error model (the model depends only on
/// tracking, visibility and reference rate, so sweeps can share it).
DetectionTally expected_tally(const SimConfig& cfg, const PhaseErrorModel& model);

}  // namespace snstf
