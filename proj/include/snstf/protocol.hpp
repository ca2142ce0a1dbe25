#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace snstf {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

enum class Basis : std::uint8_t { kX, kZ };

// Intensity index as used in the "Sent-ABCD" table labels.
enum class Intensity : std::uint8_t { kVacuum = 0, kMu1 = 1, kMu2 = 2, kMuZ = 3 };

/// One party's choice in a time window: an X (decoy) window sends vacuum,
/// mu1 or mu2; a Z (signal) window sends mu_z ("sending") or vacuum.
struct SourceChoice {
  Basis basis = Basis::kX;
  Intensity intensity = Intensity::kVacuum;

  bool operator==(const SourceChoice&) const = default;
};

/// The five source choices available to each party, in a fixed order used
/// for dense indexing.
inline constexpr SourceChoice kSourceChoices[5] = {
    {Basis::kX, Intensity::kVacuum}, {Basis::kX, Intensity::kMu1},
    {Basis::kX, Intensity::kMu2},    {Basis::kZ, Intensity::kVacuum},
    {Basis::kZ, Intensity::kMuZ},
};
inline constexpr int kNumSourceChoices = 5;

int source_index(SourceChoice c);

struct SourcePairLabel {
  SourceChoice alice;
  SourceChoice bob;

  /// "ZX01" style code: bases then intensity digits.
  std::string code() const;
  std::string sent_key() const { return "Sent-" + code(); }
  std::string detected_key() const { return "Detected-" + code(); }

  /// Parses "ZX01"; throws std::invalid_argument on malformed or impossible
  /// combinations (e.g. "ZX31" is fine, "XZ33" is not since X has no mu_z).
  static SourcePairLabel parse(std::string_view code);
  bool operator==(const SourcePairLabel&) const = default;
};

/// All 25 valid source pairs.
std::vector<SourcePairLabel> all_source_pairs();

struct ProtocolParams {
  double mu1 = 0.1;
  double mu2 = 0.384;
  double mu_z = 0.447;
  double mu_ref = 247.3;
  double p_x = 0.224;
  double p_z = 0.776;
  double p0 = 0.077;
  double p1 = 0.850;
  double p2 = 0.073;
  double p_z1 = 0.268;  // sending probability in a signal window
  double p_z0 = 0.732;
  int n_phase_slices = 16;
  double n_total = 1.55e12;
  int pulses_per_period = 15;
  double period_ns = 1000.0;
  double signal_width_ns = 1.0;
  double ref_width_ns = 100.0;
  double signal_spacing_ns = 30.0;

  double intensity(Intensity i) const;
  /// Probability that one party picks the given source in a window.
  double choice_probability(SourceChoice c) const;
};

struct SecurityParams {
  double xi = 1e-10;
  double eps_cor = 1e-10;
  double eps_pa = 1e-10;
  double eps_hat = 1e-10;
  double f = 1.1;

  double eps_tol() const { return 22.0 * xi; }
  /// Security coefficients all equal to the Chernoff failure probability.
  static SecurityParams with_xi(double xi, double f = 1.1);
};

struct FieldError {
  std::string field;
  std::string message;
};

struct ValidatedParams {
  ProtocolParams protocol;
  SecurityParams security;
  std::vector<FieldError> errors;

  bool ok() const { return errors.empty(); }
  std::string summary() const;
};

/// Checks every parameter invariant and returns probability groups
/// renormalized to sum exactly to one (sums within 1e-6 are accepted).
ValidatedParams validate_params(const ProtocolParams& p, const SecurityParams& s);

/// Throws std::invalid_argument carrying the summary when validation fails.
ProtocolParams require_valid(const ProtocolParams& p, const SecurityParams& s);

enum class WindowClass : std::uint8_t { kZ, kX1, kX2, kDiscard };

/// Window classification after basis/intensity announcement. X windows need
/// both parties on the same decoy intensity and
/// 1 - |cos(theta_a - theta_b - psi_ab)| <= lambda.
WindowClass classify_window(Basis a_window, Basis b_window, Intensity a_intensity,
                            Intensity b_intensity, double theta_a, double theta_b,
                            double psi_ab, double lambda);

enum class DetectorOutcome : std::uint8_t { kNone, kDet1, kDet2, kBoth };

/// Ground-truth record of one simulated window.
struct WindowRecord {
  SourceChoice alice;
  SourceChoice bob;
  int alice_slice = 0;
  int bob_slice = 0;
  double drift_phase = 0.0;
  DetectorOutcome outcome = DetectorOutcome::kNone;

  bool heralded() const {
    return outcome == DetectorOutcome::kDet1 || outcome == DetectorOutcome::kDet2;
  }
};

/// Key bits under the fixed convention: Alice send -> 1, vacuum -> 0;
/// Bob send -> 0, vacuum -> 1.
inline int alice_bit(bool sends) { return sends ? 1 : 0; }
inline int bob_bit(bool sends) { return sends ? 0 : 1; }

}  // namespace snstf
