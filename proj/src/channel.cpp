#include "snstf/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "snstf/protocol.hpp"
#include "snstf/tally.hpp"

namespace snstf {

namespace {

constexpr double kPlanck = 6.62607015e-34;
constexpr double kLightSpeed = 299792458.0;

double db_per_km(double alpha) { return 10.0 * alpha / std::log(10.0); }

// Bracket term of the double-scattering integral, in km.
double rerayleigh_bracket(double alpha, double l) {
  // l + (e^{-2 alpha l} - 1) / (2 alpha), written with expm1 for small alpha l.
  return l + std::expm1(-2.0 * alpha * l) / (2.0 * alpha);
}

// Invert heralded = 2 c (1 - c) for the per-detector click probability c <= 1/2.
double click_from_heralded(double heralded) {
  if (heralded < 0.0 || heralded > 0.5) throw std::invalid_argument("heralded yield out of range");
  return 0.5 * (1.0 - std::sqrt(1.0 - 2.0 * heralded));
}

double pooled_rate(const DetectionTally& t, std::initializer_list<const char*> codes) {
  double sent = 0.0, det = 0.0;
  for (const char* c : codes) {
    sent += t.get(std::string("Sent-") + c);
    det += t.get(std::string("Detected-") + c);
  }
  if (sent <= 0.0) throw std::invalid_argument("tally lacks sent counts for calibration");
  return det / sent;
}

}  // namespace

double FiberSpec::arm_loss_db_a() const {
  return loss_db_a ? *loss_db_a : db_per_km(alpha_per_km) * length_a_km;
}

double FiberSpec::arm_loss_db_b() const {
  return loss_db_b ? *loss_db_b : db_per_km(alpha_per_km) * length_b_km;
}

double StationOptics::arm_a() const {
  return pc_a * cir_a * dwdm_a * pbs_a * (bs_a_ch1 * det_ch1 + bs_a_ch2 * det_ch2);
}

double StationOptics::arm_b() const {
  return pc_b * cir_b * dwdm_b * pbs_b * (bs_b_ch1 * det_ch1 + bs_b_ch2 * det_ch2);
}

double NoiseBudget::p_noise() const {
  const double p = (dark_count_hz + rrsors_rate_hz + extra_rate_hz) * gate_width_ns * 1e-9;
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("noise probability must lie in [0, 1)");
  return p;
}

ArmEfficiency ChannelParams::component_efficiency() const {
  return {transmittance(fiber.arm_loss_db_a()) * optics.arm_a() * r_gate,
          transmittance(fiber.arm_loss_db_b()) * optics.arm_b() * r_gate};
}

ArmEfficiency ChannelParams::signal_efficiency() const {
  return efficiency_override ? *efficiency_override : component_efficiency();
}

double ChannelParams::station_efficiency() const { return 0.5 * (optics.arm_a() + optics.arm_b()); }

double transmittance(double loss_db) {
  if (loss_db < 0.0) throw std::invalid_argument("loss must be >= 0 dB");
  return std::pow(10.0, -loss_db / 10.0);
}

double backscatter_total(double p0, double s, double alpha, double length_km) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  return p0 * s / (2.0 * alpha) * -std::expm1(-2.0 * alpha * length_km);
}

double rerayleigh_power(double p0, double s, double alpha, double length_km) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  if (length_km < 0.0) throw std::invalid_argument("length must be >= 0");
  return p0 * s * s / (4.0 * alpha) * std::exp(-alpha * length_km) *
         rerayleigh_bracket(alpha, length_km);
}

double photon_energy_j(double wavelength_nm) { return kPlanck * kLightSpeed / (wavelength_nm * 1e-9); }

double rrsors_noise_rate(double p0, double s, double alpha, double length_km, double e_nu,
                         double dark_count_hz) {
  if (!(e_nu > 0.0)) throw std::invalid_argument("photon energy must be > 0");
  return rerayleigh_power(p0, s, alpha, length_km) / e_nu + dark_count_hz;
}

ClickProbabilities click_probabilities(double mu_a, double mu_b, double delta, double eta_a,
                                       double eta_b, double p_noise, double visibility) {
  const double a = eta_a * mu_a;
  const double b = eta_b * mu_b;
  const double mean = 0.5 * (a + b);
  const double cross = visibility * std::sqrt(a * b) * std::cos(delta);
  const double lam_plus = std::max(0.0, mean + cross);
  const double lam_minus = std::max(0.0, mean - cross);
  ClickProbabilities c;
  // 1 - (1 - p) e^{-lam}, arranged to keep precision when both terms are tiny.
  c.det1 = p_noise - (1.0 - p_noise) * std::expm1(-lam_plus);
  c.det2 = p_noise - (1.0 - p_noise) * std::expm1(-lam_minus);
  c.both = c.det1 * c.det2;
  return c;
}

double ReferencePowerPolicy::launch_power_w(double alpha, double length_km) const {
  return reference_count_rate_hz * photon_energy_j(wavelength_nm) /
         (station_efficiency * std::exp(-alpha * length_km));
}

std::vector<NoisePoint> noise_curve(const std::vector<double>& lengths_km, const NoiseModel& model,
                                    const ReferencePowerPolicy& policy) {
  const double e_nu = photon_energy_j(policy.wavelength_nm);
  std::vector<NoisePoint> out;
  out.reserve(lengths_km.size());
  for (double l : lengths_km) {
    NoisePoint pt;
    pt.length_km = l;
    pt.dark_hz = model.dark_count_hz;
    if (model.include_rrsors) {
      const double p0 = policy.launch_power_w(model.alpha_per_km, l);
      pt.rrsors_hz = rerayleigh_power(p0, model.scatter_per_km, model.alpha_per_km, l) / e_nu;
    }
    pt.noise_hz = pt.rrsors_hz + pt.dark_hz;
    out.push_back(pt);
  }
  return out;
}

NoiseFit fit_noise_curve(const std::vector<NoisePoint>& measured, double alpha_per_km,
                         const ReferencePowerPolicy& policy) {
  if (measured.size() < 2) throw std::invalid_argument("need at least two points to fit");
  const double e_nu = photon_energy_j(policy.wavelength_nm);
  // d_i = D_c + S^2 g_i with g_i the RRSORS rate per unit S^2.
  double sg = 0, sgg = 0, sd = 0, sgd = 0;
  const double n = static_cast<double>(measured.size());
  std::vector<double> g(measured.size());
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const double l = measured[i].length_km;
    g[i] = rerayleigh_power(policy.launch_power_w(alpha_per_km, l), 1.0, alpha_per_km, l) / e_nu;
    sg += g[i];
    sgg += g[i] * g[i];
    sd += measured[i].noise_hz;
    sgd += g[i] * measured[i].noise_hz;
  }
  const double det = n * sgg - sg * sg;
  if (std::abs(det) <= 1e-300) throw std::invalid_argument("degenerate lengths for noise fit");
  const double s2 = (n * sgd - sg * sd) / det;
  NoiseFit fit;
  fit.dark_count_hz = (sd - s2 * sg) / n;
  fit.scatter_per_km = std::sqrt(std::max(0.0, s2));
  double ss = 0.0;
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const double r = measured[i].noise_hz - (fit.dark_count_hz + s2 * g[i]);
    ss += r * r;
  }
  fit.rms_residual_hz = std::sqrt(ss / n);
  return fit;
}

ChannelCalibration calibrate_to_tally(const DetectionTally& t, const ProtocolParams& p) {
  ChannelCalibration cal;
  const double vac = pooled_rate(t, {"ZX00", "XZ00", "XX00"});
  cal.p_noise = click_from_heralded(vac);
  auto arm = [&](double single_arm_yield) {
    const double c = click_from_heralded(single_arm_yield);
    const double lam = std::log((1.0 - cal.p_noise) / (1.0 - c));  // per port
    return 2.0 * lam / p.mu_z;
  };
  cal.efficiency.eta_a = arm(pooled_rate(t, {"ZX30"}));
  cal.efficiency.eta_b = arm(pooled_rate(t, {"XZ03"}));
  return cal;
}

}  // namespace snstf
