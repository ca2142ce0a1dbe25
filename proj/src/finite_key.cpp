#include "snstf/finite_key.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace snstf {

namespace {

PooledRate pooled(const DetectionTally& t, std::initializer_list<const char*> codes, double xi) {
  PooledRate r;
  for (const char* c : codes) {
    const std::string sent = std::string("Sent-") + c;
    const std::string det = std::string("Detected-") + c;
    if (!t.has(sent) || !t.has(det)) throw std::invalid_argument(std::string("tally lacks label ") + c);
    r.sent += t.get(sent);
    r.detected += t.get(det);
  }
  if (!(r.sent > 0.0)) throw std::invalid_argument("zero sent count for a decoy label");
  const Interval b = expected_bounds_from_observed(r.detected, xi);
  r.observed = r.detected / r.sent;
  r.lower = b.lower / r.sent;
  r.upper = b.upper / r.sent;
  return r;
}

double window_count(const DetectionTally& t, const ProtocolParams& p) {
  return t.n_total() > 0.0 ? t.n_total() : p.n_total;
}

double rate_of(const DetectionTally& t, const char* code) {
  const double sent = t.get(std::string("Sent-") + code);
  if (!(sent > 0.0)) throw std::invalid_argument(std::string("zero sent count for ") + code);
  return t.get(std::string("Detected-") + code) / sent;
}

nlohmann::json pooled_json(const PooledRate& r) {
  return {{"sent", r.sent}, {"detected", r.detected}, {"observed", r.observed}, {"lower", r.lower},
          {"upper", r.upper}};
}

}  // namespace

DecoyBounds decoy_bounds(const DetectionTally& t, const ProtocolParams& p, double xi) {
  if (!(p.mu1 < p.mu2)) throw std::invalid_argument("mu1 < mu2 required");
  DecoyBounds b;
  b.s00 = pooled(t, {"ZX00", "XZ00", "XX00"}, xi);
  b.s01 = pooled(t, {"ZX01", "XX01"}, xi);
  b.s10 = pooled(t, {"XZ10", "XX10"}, xi);
  b.s02 = pooled(t, {"ZX02", "XX02"}, xi);
  b.s20 = pooled(t, {"XZ20", "XX20"}, xi);

  const double m1 = p.mu1, m2 = p.mu2;
  const double den = m2 * m1 * (m2 - m1);
  auto single = [&](const PooledRate& weak, const PooledRate& strong) {
    return (m2 * m2 * std::exp(m1) * weak.lower - m1 * m1 * std::exp(m2) * strong.upper -
            (m2 * m2 - m1 * m1) * b.s00.upper) /
           den;
  };
  b.s01_lower = single(b.s01, b.s02);
  b.s10_lower = single(b.s10, b.s20);
  if (b.s01_lower < 0.0 || b.s10_lower < 0.0) {
    b.abort = true;
    b.note = "negative single-photon yield bound clamped to 0";
    b.s01_lower = std::max(0.0, b.s01_lower);
    b.s10_lower = std::max(0.0, b.s10_lower);
  }
  b.s1_lower = 0.5 * (b.s01_lower + b.s10_lower);

  b.n_windows = window_count(t, p);
  const double eps = p.p_z1;
  const double pre = b.n_windows * p.p_z * p.p_z * eps * (1.0 - eps) * p.mu_z * std::exp(-p.mu_z);
  b.n01_lower = pre * b.s01_lower;
  b.n10_lower = pre * b.s10_lower;
  b.n1_before = b.n01_lower + b.n10_lower;
  return b;
}

PhaseFlipResult phase_flip_bound(const DetectionTally& t, const ProtocolParams& p,
                                 const DecoyBounds& b, double xi, double ds_half_deg) {
  PhaseFlipResult r;
  r.ds_half_deg = ds_half_deg;
  const XCut cut = t.xx11_cut(ds_half_deg);
  r.detected = cut.detected;
  r.wrong = cut.wrong;
  r.qber_x11 = cut.qber();
  if (cut.sent >= 0.0) {
    r.n_x1 = cut.sent;
  } else {
    r.n_x1 = t.get("Sent-XX11") * ds_half_deg / 90.0;
    r.n_x1_derived = true;
  }
  if (!(r.n_x1 > 0.0) || !(b.s1_lower > 0.0)) {
    r.abort = true;
    r.e1ph_upper = 0.5;
    return r;
  }
  r.t_upper = expected_bounds_from_observed(r.wrong, xi).upper / r.n_x1;
  const double att = std::exp(-2.0 * p.mu1);
  r.e1ph_upper = (r.t_upper - att * b.s00.lower / 2.0) / (2.0 * p.mu1 * att * b.s1_lower);
  r.e1ph_upper = std::max(0.0, r.e1ph_upper);
  if (r.e1ph_upper > 0.5) r.abort = true;
  return r;
}

ZCategories z_categories(const DetectionTally& t, const ProtocolParams& p) {
  ZCategories z;
  if (t.has_z_categories()) {
    z.send_send = t.get("Detected-ZZ33");
    z.send_vac = t.get("Detected-ZZ30");
    z.vac_send = t.get("Detected-ZZ03");
    z.vac_vac = t.get("Detected-ZZ00");
    return z;
  }
  const double n_zz = t.get("Sent-ZZ");
  if (!(n_zz > 0.0)) throw std::invalid_argument("tally lacks Sent-ZZ");
  const double eps = p.p_z1;
  double vac_sent = 0.0, vac_det = 0.0;
  for (const char* c : {"ZX00", "XZ00", "XX00"}) {
    vac_sent += t.get(std::string("Sent-") + c);
    vac_det += t.get(std::string("Detected-") + c);
  }
  if (!(vac_sent > 0.0)) throw std::invalid_argument("tally lacks vacuum counts");
  const double s30 = rate_of(t, "ZX30");
  const double s03 = rate_of(t, "XZ03");
  const double correct = t.zz_correct();
  const double error = t.zz_error();
  z.inferred = true;
  z.vac_vac = std::min(error, n_zz * (1.0 - eps) * (1.0 - eps) * vac_det / vac_sent);
  z.send_send = error - z.vac_vac;
  z.send_vac = correct * s30 / (s30 + s03);
  z.vac_send = correct - z.send_vac;
  return z;
}

AoppResult aopp_expected(const ZCategories& z, const DecoyBounds& b, double e1ph, double xi) {
  const double nt0 = z.n_t0();
  const double nt1 = z.n_t1();
  if (!(nt0 > 0.0) || !(nt1 > 0.0)) throw std::invalid_argument("AOPP needs both bit values");
  AoppResult a;
  a.n_p = std::min(nt0, nt1);
  a.n_cc = a.n_p * (z.vac_send / nt0) * (z.send_vac / nt1);
  a.n_vd = a.n_p * (z.send_send / nt0) * (z.vac_vac / nt1);
  a.n_t_prime = a.n_cc + a.n_vd;
  a.e_z_prime = a.n_t_prime > 0.0 ? a.n_vd / a.n_t_prime : 0.0;
  a.n1_prime_expected = (b.n01_lower / nt0) * (b.n10_lower / nt1) * a.n_p;
  const double e = std::clamp(e1ph, 0.0, 0.5);
  a.e_pair = 2.0 * e * (1.0 - e);
  if (!(a.n1_prime_expected > 0.0)) {
    a.abort = true;
    a.e1ph_prime = 0.5;
    return a;
  }
  a.n1_prime = observed_bounds_from_expected(a.n1_prime_expected, xi).lower;
  a.e1ph_prime =
      observed_bounds_from_expected(a.n1_prime_expected * a.e_pair, xi).upper / a.n1_prime_expected;
  if (a.e1ph_prime > 0.5) a.abort = true;
  return a;
}

double shannon_entropy(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("entropy argument outside [0, 1]");
  if (x == 0.0 || x == 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

KeyRateReport key_length(const AoppResult& a, const SecurityParams& s, double n_norm) {
  KeyRateReport k;
  k.f = s.f;
  k.eps_tol = s.eps_tol();
  k.n_norm = n_norm;
  const double e1 = std::min(a.e1ph_prime, 1.0);
  k.l_a = a.n1_prime * (1.0 - shannon_entropy(std::max(0.0, e1))) -
          s.f * a.n_t_prime * shannon_entropy(a.e_z_prime) - std::log2(2.0 / s.eps_cor) -
          2.0 * std::log2(1.0 / (std::sqrt(2.0) * s.eps_pa * s.eps_hat));
  k.abort = a.abort || a.e1ph_prime > 0.5 || k.l_a < 0.0;
  k.r = (!k.abort && n_norm > 0.0) ? k.l_a / n_norm : 0.0;
  return k;
}

AnalysisReport analyze(const DetectionTally& t, const ProtocolParams& p, const SecurityParams& s,
                       std::optional<double> ds_half_deg) {
  AnalysisReport r;
  r.xi = s.xi;
  r.key.f = s.f;
  r.key.eps_tol = s.eps_tol();
  const double ds = ds_half_deg ? *ds_half_deg : t.ds_half_deg.value_or(15.0);
  auto fail = [&](const std::string& why) {
    r.abort = true;
    r.abort_reasons.push_back(why);
  };
  try {
    r.decoy = decoy_bounds(t, p, s.xi);
    if (r.decoy.abort) fail(r.decoy.note);
    r.phase = phase_flip_bound(t, p, r.decoy, s.xi, ds);
    if (r.phase.abort) fail("phase-flip error bound unusable");
    try {
      r.qber_x22 = t.xx22_cut(ds).qber();
    } catch (const std::out_of_range&) {
    }
    r.z = z_categories(t, p);
    r.qber_z = r.z.qber();
    r.aopp = aopp_expected(r.z, r.decoy, r.phase.e1ph_upper, s.xi);
    if (r.aopp.abort) fail("phase-flip error after pairing exceeds 1/2");
    const double n_norm = t.has("N_emitted") ? t.get("N_emitted") : window_count(t, p);
    r.key = key_length(r.aopp, s, n_norm);
    if (r.key.l_a < 0.0) fail("negative key length");
    if (r.abort) {
      r.key.abort = true;
      r.key.r = 0.0;
    }
  } catch (const std::exception& e) {
    fail(e.what());
    r.key.abort = true;
    r.key.r = 0.0;
  }
  return r;
}

nlohmann::json report_to_json(const AnalysisReport& r) {
  using nlohmann::json;
  json j;
  j["decoy"] = {{"S00", pooled_json(r.decoy.s00)},
                {"S01", pooled_json(r.decoy.s01)},
                {"S10", pooled_json(r.decoy.s10)},
                {"S02", pooled_json(r.decoy.s02)},
                {"S20", pooled_json(r.decoy.s20)},
                {"s01_lower", r.decoy.s01_lower},
                {"s10_lower", r.decoy.s10_lower},
                {"s1_lower", r.decoy.s1_lower},
                {"n01_lower", r.decoy.n01_lower},
                {"n10_lower", r.decoy.n10_lower},
                {"N", r.decoy.n_windows}};
  j["n1_before"] = r.decoy.n1_before;
  j["x1"] = {{"ds_half_deg", r.phase.ds_half_deg}, {"N_X1", r.phase.n_x1},
             {"N_X1_derived", r.phase.n_x1_derived}, {"detected", r.phase.detected},
             {"wrong", r.phase.wrong}, {"T_upper", r.phase.t_upper}};
  j["e1ph_before"] = r.phase.e1ph_upper;
  j["qber_x11"] = r.phase.qber_x11;
  j["qber_x22"] = r.qber_x22;
  j["z_categories"] = {{"send_send", r.z.send_send}, {"send_vac", r.z.send_vac},
                       {"vac_send", r.z.vac_send},   {"vac_vac", r.z.vac_vac},
                       {"inferred", r.z.inferred}};
  j["qber_z_before"] = r.qber_z;
  j["aopp"] = {{"n_p", r.aopp.n_p},
               {"n_cc", r.aopp.n_cc},
               {"n_vd", r.aopp.n_vd},
               {"n_t_prime", r.aopp.n_t_prime},
               {"E_Z_prime", r.aopp.e_z_prime},
               {"n1_prime_expected", r.aopp.n1_prime_expected},
               {"n1_prime", r.aopp.n1_prime},
               {"e1ph_prime", r.aopp.e1ph_prime}};
  j["l_A"] = r.key.l_a;
  j["R"] = r.key.r;
  j["N_norm"] = r.key.n_norm;
  j["f"] = r.key.f;
  j["xi"] = r.xi;
  j["eps_tol"] = r.key.eps_tol;
  j["abort"] = r.abort;
  j["abort_reasons"] = r.abort_reasons;
  return j;
}

FCalibration calibrate_f(const std::vector<FCalibrationCase>& cases, double lo, double hi) {
  if (cases.empty()) throw std::invalid_argument("no calibration cases");
  if (!(lo >= 1.0 && hi >= lo)) throw std::invalid_argument("invalid f range");
  auto cost = [&](double f, std::vector<double>* rates) {
    double c = 0.0;
    for (const auto& k : cases) {
      SecurityParams s = k.security;
      s.f = f;
      const double r = analyze(*k.tally, k.protocol, s, k.ds_half_deg).key.r;
      if (rates) rates->push_back(r);
      const double d = r > 0.0 ? std::log(r / k.target_r) : 50.0;
      c += d * d;
    }
    return c;
  };
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = cost(x1, nullptr), f2 = cost(x2, nullptr);
  while (b - a > 1e-6) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = cost(x1, nullptr);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = cost(x2, nullptr);
    }
  }
  FCalibration out;
  out.f = 0.5 * (a + b);
  const double c = cost(out.f, &out.rates);
  out.rms_log_error = std::sqrt(c / static_cast<double>(cases.size()));
  return out;
}

}  // namespace snstf
