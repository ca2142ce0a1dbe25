#pragma once

#include <functional>
#include <string>
#include <vector>

#include "snstf/finite_key.hpp"
#include "snstf/simulator.hpp"
#include "snstf/tally.hpp"

namespace snstf {

struct GridSpec {
  std::vector<double> rc{0.01, 0.05, 0.10, 0.50, 1.00};
  std::vector<double> ds_half_deg{2, 5, 8, 10, 12, 15, 30};

  /// Throws std::invalid_argument unless both lists are non-empty, strictly
  /// ascending and in range.
  void validate() const;
};

struct GridResult {
  GridSpec spec;
  std::vector<std::vector<double>> r;         // [rc][ds]
  std::vector<std::vector<double>> e1ph;      // before pairing
  std::vector<std::vector<double>> qber_x11;
  std::size_t best_rc = 0;
  std::size_t best_ds = 0;
  double best_r = 0.0;
};

/// Tally for one (rc, ds_half) cell.
using TallyProvider = std::function<DetectionTally(double rc, double ds_half_deg)>;

GridResult keyrate_grid(const TallyProvider& provider, const ProtocolParams& p,
                        const SecurityParams& s, const GridSpec& spec);

/// Recorded X-basis counts per (rc, ds_half) plus the full tally of one
/// reference configuration.
struct GridFixture {
  DetectionTally base;
  double base_rc = 1.0;
  std::vector<double> rc;
  std::vector<double> ds_half_deg;
  std::vector<std::vector<double>> xx11_detected;
  std::vector<std::vector<double>> xx11_qber;  // fraction
  std::vector<std::vector<double>> xx22_detected;
  std::vector<std::vector<double>> xx22_qber;
  std::vector<std::vector<double>> reference_r;  // optional published key rates

  GridSpec spec() const { return {rc, ds_half_deg}; }
};

GridFixture load_grid_fixture(const std::string& path);

/// Builds a cell tally from the fixture. Frame rejection scales every count
/// of the reference tally by the ratio of widest-cut X1 detections; the X1
/// cut itself comes from the recorded detections and error rate, or from
/// the reference tally's exact per-channel rows when the cell matches them.
/// Key rates stay normalized to the unscaled pulse count.
DetectionTally fixture_cell(const GridFixture& g, double rc, double ds_half_deg);

TallyProvider fixture_provider(const GridFixture& g);

/// Expected-mode tallies, one simulation per rc value (cached).
TallyProvider simulated_provider(const SimConfig& base);

}  // namespace snstf
