#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "snstf/protocol.hpp"
#include "snstf/simulator.hpp"

namespace snstf {

/// A point of the search: source parameters plus the post-selection knobs.
struct OperatingPoint {
  ProtocolParams protocol;
  double ds_half_deg = 15.0;
  double rc = 1.0;
};

/// Coordinate names: mu1, mu2, mu_z, p0, p1, p_z1, p_z, ds_half, rc.
/// p2, p_x and p_z0 follow from the normalization constraints.
struct ParamRange {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
};

struct SearchSpace {
  std::vector<ParamRange> ranges;

  /// Ranges centred on a start point: +-fraction on each coordinate, clipped
  /// to the admissible domain.
  static SearchSpace around(const OperatingPoint& p, double fraction);
  /// Throws std::invalid_argument on an unknown name or lo > hi.
  void validate() const;
};

double get_coordinate(const OperatingPoint& p, const std::string& name);
void set_coordinate(OperatingPoint& p, const std::string& name, double v);
/// True when the derived probabilities are valid and mu1 < mu2.
bool admissible(const OperatingPoint& p);

using Objective = std::function<double(const OperatingPoint&)>;

struct TraceEntry {
  int restart = 0;
  int sweep = 0;
  std::string coordinate;
  double value = 0.0;
  double objective = 0.0;
};

struct OptimizeResult {
  OperatingPoint best;
  double best_value = 0.0;
  int evaluations = 0;
  std::vector<TraceEntry> trace;
};

struct OptimizeOptions {
  int restarts = 3;
  int max_sweeps = 4;
  int line_evaluations = 16;  // golden-section steps per coordinate
  std::uint64_t seed = 1;
};

/// Coordinate descent with a golden-section line search per coordinate.
/// Restart 0 begins at `start` (clamped into the ranges); further restarts
/// begin at seeded random points. Inadmissible points score 0.
OptimizeResult optimize_params(const Objective& f, const OperatingPoint& start,
                               const SearchSpace& space, const OptimizeOptions& opt = {});

/// Key rate from the expected-tally pipeline. Error models are cached per rc.
Objective expected_keyrate_objective(const SimConfig& base);

nlohmann::json optimize_to_json(const OptimizeResult& r);

}  // namespace snstf
