#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "snstf/chernoff.hpp"
#include "snstf/protocol.hpp"
#include "snstf/tally.hpp"

namespace snstf {

/// Counting rate pooled over every source pair sharing the same intensity
/// digits, with expected-value bounds applied to the detected count.
struct PooledRate {
  double sent = 0.0;
  double detected = 0.0;
  double observed = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct DecoyBounds {
  PooledRate s00, s01, s10, s02, s20;
  double s01_lower = 0.0;
  double s10_lower = 0.0;
  double s1_lower = 0.0;  // mean of the two
  /// Expected untagged Z counts with one party sending a single photon.
  double n01_lower = 0.0;
  double n10_lower = 0.0;
  double n1_before = 0.0;
  double n_windows = 0.0;  // N used in the untagged-count prefactor
  bool abort = false;
  std::string note;
};

/// Throws std::invalid_argument when a needed label is missing or has a
/// zero sent count.
DecoyBounds decoy_bounds(const DetectionTally& t, const ProtocolParams& p, double xi);

struct PhaseFlipResult {
  double ds_half_deg = 0.0;
  double n_x1 = 0.0;         // X1 pulse pairs inside the cut
  bool n_x1_derived = false;  // true when taken as Sent-XX11 * ds_half / 90
  double detected = 0.0;
  double wrong = 0.0;
  double qber_x11 = 0.0;
  double t_upper = 0.0;
  double e1ph_upper = 0.0;
  bool abort = false;
};

PhaseFlipResult phase_flip_bound(const DetectionTally& t, const ProtocolParams& p,
                                 const DecoyBounds& b, double xi, double ds_half_deg);

/// Heralded Z events by (Alice, Bob) choice. Bob's bit is 0 when he sends.
struct ZCategories {
  double send_send = 0.0;
  double send_vac = 0.0;
  double vac_send = 0.0;
  double vac_vac = 0.0;
  bool inferred = false;  // reconstructed from error/correct totals

  double n_t0() const { return vac_send + send_send; }
  double n_t1() const { return send_vac + vac_vac; }
  double errors() const { return send_send + vac_vac; }
  double total() const { return send_send + send_vac + vac_send + vac_vac; }
  double qber() const { return total() > 0.0 ? errors() / total() : 0.0; }
};

/// Uses the per-category rows when tallied. Otherwise the vacuum/vacuum
/// share is predicted from the pooled vacuum rate, the correct events are
/// split in the ratio of the single-arm signal rates, and send/send is the
/// remainder of the error count.
ZCategories z_categories(const DetectionTally& t, const ProtocolParams& p);

struct AoppResult {
  double n_p = 0.0;
  double n_cc = 0.0;
  double n_vd = 0.0;
  double n_t_prime = 0.0;
  double e_z_prime = 0.0;
  double n1_prime_expected = 0.0;
  double n1_prime = 0.0;
  double e_pair = 0.0;  // 2 e (1 - e)
  double e1ph_prime = 0.0;
  bool abort = false;
};

/// Throws std::invalid_argument when either bit class is empty.
AoppResult aopp_expected(const ZCategories& z, const DecoyBounds& b, double e1ph, double xi);

/// Binary entropy; throws std::domain_error outside [0, 1].
double shannon_entropy(double x);

struct KeyRateReport {
  double l_a = 0.0;
  double r = 0.0;
  double n_norm = 0.0;
  double f = 0.0;
  double eps_tol = 0.0;
  bool abort = false;
};

KeyRateReport key_length(const AoppResult& a, const SecurityParams& s, double n_norm);

struct AnalysisReport {
  DecoyBounds decoy;
  PhaseFlipResult phase;
  ZCategories z;
  AoppResult aopp;
  KeyRateReport key;
  double qber_z = 0.0;
  double qber_x22 = 0.0;
  double xi = 0.0;
  bool abort = false;
  std::vector<std::string> abort_reasons;
};

/// Full post-processing of one tally. Never throws on analysis failures;
/// those are reported through the abort flag with R = 0.
AnalysisReport analyze(const DetectionTally& t, const ProtocolParams& p, const SecurityParams& s,
                       std::optional<double> ds_half_deg = std::nullopt);

nlohmann::json report_to_json(const AnalysisReport& r);

struct FCalibrationCase {
  const DetectionTally* tally = nullptr;
  ProtocolParams protocol;
  SecurityParams security;
  std::optional<double> ds_half_deg;
  double target_r = 0.0;
};

struct FCalibration {
  double f = 1.1;
  double rms_log_error = 0.0;
  std::vector<double> rates;
};

/// Error-correction efficiency in [lo, hi] minimizing the squared log error
/// of R against the targets.
FCalibration calibrate_f(const std::vector<FCalibrationCase>& cases, double lo = 1.0, double hi = 1.3);

}  // namespace snstf
