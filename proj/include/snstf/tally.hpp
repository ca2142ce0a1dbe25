#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "snstf/protocol.hpp"

namespace snstf {

inline constexpr const char* kTallySchema = "tally_v1";

/// X-window events are binned by the wrapped phase mismatch angle, 1 degree
/// per bin over [0, 90]; any half-width cut is then a prefix sum.
inline constexpr int kMismatchBins = 90;

/// Counts of X-window pairs inside one phase-mismatch cut.
struct XCut {
  double sent = 0.0;  // pulse pairs inside the cut; < 0 when not recorded
  double detected = 0.0;
  double wrong = 0.0;

  double qber() const { return detected > 0.0 ? wrong / detected : 0.0; }
};

struct MismatchHistogram {
  std::vector<double> sent;
  std::array<std::vector<double>, 2> detected;  // per detector channel
  std::array<std::vector<double>, 2> correct;

  static MismatchHistogram zeros(int bins = kMismatchBins);
  int bins() const { return static_cast<int>(sent.size()); }
  /// Sum over bins [0, ds_half_deg); ds_half_deg must be an integer in (0, 90].
  XCut cut(double ds_half_deg) const;
  void add(const MismatchHistogram& o);
  void scale(double k);
};

/// Count tally keyed by the table row labels ("Sent-ZX01",
/// "Detected-XX11-Ds-Ch1", "Detected-ZZError", ...). Values are doubles so
/// the same type holds Monte Carlo integers and expected (real) counts.
struct DetectionTally {
  std::map<std::string, double> counts;
  std::optional<MismatchHistogram> xx11_bins;
  std::optional<MismatchHistogram> xx22_bins;
  /// X1 cuts recorded without a histogram, keyed by half-width in degrees.
  std::map<double, XCut> xx11_cuts;
  std::map<double, XCut> xx22_cuts;

  // Run annotations; not summed by tally_merge.
  std::optional<double> ds_half_deg;
  std::optional<double> rc;
  std::optional<double> r_rc;
  std::optional<double> r_gate;
  nlohmann::json metadata = nlohmann::json::object();

  bool has(const std::string& key) const { return counts.count(key) != 0; }
  double get(const std::string& key) const;
  void add(const std::string& key, double v) { counts[key] += v; }

  double sent(const SourcePairLabel& l) const { return get(l.sent_key()); }
  double detected(const SourcePairLabel& l) const { return get(l.detected_key()); }

  double zz_error() const;
  double zz_correct() const;
  double n_total() const { return get("N_total"); }
  /// True when the four Z-window categories are tallied individually.
  bool has_z_categories() const;

  /// X1 / X2 counts inside a half-width cut, from the histogram when present,
  /// otherwise from a recorded cut. Throws std::out_of_range when neither.
  XCut xx11_cut(double ds_half_deg) const;
  XCut xx22_cut(double ds_half_deg) const;

  bool empty() const { return counts.empty() && !xx11_bins && !xx22_bins && xx11_cuts.empty(); }
};

/// Element-wise sum. Throws std::invalid_argument on histogram layout or
/// annotation mismatch.
DetectionTally tally_merge(const DetectionTally& a, const DetectionTally& b);

/// Multiplies every count by k (used to model discarding a fraction of frames).
DetectionTally scale_tally(const DetectionTally& t, double k);

nlohmann::json tally_to_json(const DetectionTally& t);
/// Throws std::invalid_argument on a missing or unknown schema version.
DetectionTally tally_from_json(const nlohmann::json& j);

DetectionTally load_tally(const std::string& path);
void save_tally(const DetectionTally& t, const std::string& path);

}  // namespace snstf
