#include "snstf/scenario.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace snstf {

namespace fs = std::filesystem;

namespace {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void take_opt(const nlohmann::json& j, const char* key, std::optional<double>& field) {
  if (j.contains(key)) {
    if (j.at(key).is_null()) field.reset();
    else field = j.at(key).get<double>();
  }
}

std::string resolve(const std::string& base_dir, const std::string& rel) {
  const fs::path p(rel);
  return (p.is_absolute() ? p : fs::path(base_dir) / p).lexically_normal().string();
}

FrameSelection parse_selection(const std::string& s) {
  if (s == "residual") return FrameSelection::kResidualThreshold;
  if (s == "fraction") return FrameSelection::kFraction;
  throw std::invalid_argument("unknown frame selection '" + s + "'");
}

}  // namespace

void apply_protocol_json(ProtocolParams& p, const nlohmann::json& j) {
  take(j, "mu1", p.mu1);
  take(j, "mu2", p.mu2);
  take(j, "mu_z", p.mu_z);
  take(j, "mu_ref", p.mu_ref);
  take(j, "p_x", p.p_x);
  take(j, "p_z", p.p_z);
  take(j, "p0", p.p0);
  take(j, "p1", p.p1);
  take(j, "p2", p.p2);
  take(j, "p_z0", p.p_z0);
  take(j, "p_z1", p.p_z1);
  take(j, "n_phase_slices", p.n_phase_slices);
  take(j, "n_total", p.n_total);
  take(j, "pulses_per_period", p.pulses_per_period);
  take(j, "period_ns", p.period_ns);
  take(j, "signal_width_ns", p.signal_width_ns);
  take(j, "ref_width_ns", p.ref_width_ns);
  take(j, "signal_spacing_ns", p.signal_spacing_ns);
}

void apply_channel_json(ChannelParams& c, const nlohmann::json& j) {
  if (j.contains("fiber")) {
    const auto& f = j.at("fiber");
    take(f, "length_a_km", c.fiber.length_a_km);
    take(f, "length_b_km", c.fiber.length_b_km);
    take_opt(f, "loss_db_a", c.fiber.loss_db_a);
    take_opt(f, "loss_db_b", c.fiber.loss_db_b);
    take(f, "alpha_per_km", c.fiber.alpha_per_km);
    take(f, "scatter_per_km", c.fiber.scatter_per_km);
    take(f, "wavelength_nm", c.fiber.wavelength_nm);
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    take(n, "dark_count_hz", c.noise.dark_count_hz);
    take(n, "rrsors_rate_hz", c.noise.rrsors_rate_hz);
    take(n, "extra_rate_hz", c.noise.extra_rate_hz);
    take(n, "gate_width_ns", c.noise.gate_width_ns);
  }
  take(j, "r_gate", c.r_gate);
  take(j, "x_misalignment", c.x_misalignment);
  take(j, "reference_detection_rate_hz", c.reference_detection_rate_hz);
  if (j.contains("efficiency")) {
    const auto& e = j.at("efficiency");
    if (e.is_null()) {
      c.efficiency_override.reset();
    } else {
      c.efficiency_override = ArmEfficiency{e.at("eta_a").get<double>(), e.at("eta_b").get<double>()};
    }
  }
}

void apply_security_json(SecurityParams& s, const nlohmann::json& j) {
  if (j.contains("xi")) {
    const double f = s.f;
    s = SecurityParams::with_xi(j.at("xi").get<double>(), f);
  }
  take(j, "eps_cor", s.eps_cor);
  take(j, "eps_pa", s.eps_pa);
  take(j, "eps_hat", s.eps_hat);
  take(j, "f", s.f);
}

nlohmann::json protocol_to_json(const ProtocolParams& p) {
  return {{"mu1", p.mu1},         {"mu2", p.mu2},
          {"mu_z", p.mu_z},       {"mu_ref", p.mu_ref},
          {"p_x", p.p_x},         {"p_z", p.p_z},
          {"p0", p.p0},           {"p1", p.p1},
          {"p2", p.p2},           {"p_z0", p.p_z0},
          {"p_z1", p.p_z1},       {"n_phase_slices", p.n_phase_slices},
          {"n_total", p.n_total}, {"pulses_per_period", p.pulses_per_period},
          {"period_ns", p.period_ns}, {"signal_width_ns", p.signal_width_ns},
          {"ref_width_ns", p.ref_width_ns}, {"signal_spacing_ns", p.signal_spacing_ns}};
}

nlohmann::json channel_to_json(const ChannelParams& c) {
  nlohmann::json fiber{{"length_a_km", c.fiber.length_a_km},
                       {"length_b_km", c.fiber.length_b_km},
                       {"alpha_per_km", c.fiber.alpha_per_km},
                       {"scatter_per_km", c.fiber.scatter_per_km},
                       {"wavelength_nm", c.fiber.wavelength_nm}};
  if (c.fiber.loss_db_a) fiber["loss_db_a"] = *c.fiber.loss_db_a;
  if (c.fiber.loss_db_b) fiber["loss_db_b"] = *c.fiber.loss_db_b;
  nlohmann::json j{{"fiber", fiber},
                   {"noise",
                    {{"dark_count_hz", c.noise.dark_count_hz},
                     {"rrsors_rate_hz", c.noise.rrsors_rate_hz},
                     {"extra_rate_hz", c.noise.extra_rate_hz},
                     {"gate_width_ns", c.noise.gate_width_ns}}},
                   {"r_gate", c.r_gate},
                   {"x_misalignment", c.x_misalignment},
                   {"reference_detection_rate_hz", c.reference_detection_rate_hz}};
  if (c.efficiency_override) {
    j["efficiency"] = {{"eta_a", c.efficiency_override->eta_a}, {"eta_b", c.efficiency_override->eta_b}};
  }
  return j;
}

nlohmann::json security_to_json(const SecurityParams& s) {
  return {{"xi", s.xi}, {"eps_cor", s.eps_cor}, {"eps_pa", s.eps_pa}, {"eps_hat", s.eps_hat}, {"f", s.f}};
}

void calibrate_channel(ChannelParams& c, const DetectionTally& t, const ProtocolParams& p) {
  const ChannelCalibration cal = calibrate_to_tally(t, p);
  c.efficiency_override = cal.efficiency;
  const double rate = cal.p_noise / (c.noise.gate_width_ns * 1e-9);
  c.noise.rrsors_rate_hz = std::max(0.0, rate - c.noise.dark_count_hz - c.noise.extra_rate_hz);
}

SimConfig Scenario::sim_config() const {
  SimConfig cfg;
  cfg.protocol = protocol;
  cfg.channel = channel;
  cfg.tracking = tracking;
  cfg.tracking.rc = rc;
  cfg.security = security;
  cfg.ds_half_deg = ds_half_deg;
  return cfg;
}

DetectionTally Scenario::recorded_tally() const {
  if (tally_path.empty()) throw std::runtime_error("scenario " + name + " has no recorded tally");
  return load_tally(tally_path);
}

std::string data_dir() {
  if (const char* env = std::getenv("TFQKD_DATA_DIR"); env && *env) return env;
  return SNSTF_DATA_DIR;
}

Scenario scenario_from_json(const nlohmann::json& j, const std::string& base_dir) {
  if (j.value("schema_version", "") != kScenarioSchema) {
    throw std::invalid_argument("scenario: missing or unsupported schema_version");
  }
  Scenario s;
  s.name = j.value("name", "");
  if (j.contains("protocol")) apply_protocol_json(s.protocol, j.at("protocol"));
  if (j.contains("channel")) apply_channel_json(s.channel, j.at("channel"));
  if (j.contains("security")) apply_security_json(s.security, j.at("security"));
  if (j.contains("tracking")) {
    const auto& t = j.at("tracking");
    take(t, "drift_rate_std_rad_per_ms", s.tracking.drift.rate_std_rad_per_ms);
    take(t, "resample_interval_ms", s.tracking.drift.resample_interval_ms);
    take(t, "periods_per_frame", s.tracking.periods_per_frame);
    take(t, "error_model_frames", s.tracking.error_model_frames);
    take(t, "ideal", s.tracking.ideal);
    if (t.contains("selection")) s.tracking.selection = parse_selection(t.at("selection").get<std::string>());
  }
  if (j.contains("analysis")) {
    take(j.at("analysis"), "rc", s.rc);
    take(j.at("analysis"), "ds_half_deg", s.ds_half_deg);
  }
  s.tracking.rc = s.rc;
  if (j.contains("tally")) s.tally_path = resolve(base_dir, j.at("tally").get<std::string>());
  if (j.contains("grid")) s.grid_path = resolve(base_dir, j.at("grid").get<std::string>());
  if (j.contains("reported")) s.reported = j.at("reported");

  const std::string source = j.value("efficiency_source", "components");
  if (source == "tally") {
    calibrate_channel(s.channel, s.recorded_tally(), s.protocol);
  } else if (source != "components") {
    throw std::invalid_argument("scenario: efficiency_source must be 'tally' or 'components'");
  }

  const ValidatedParams v = validate_params(s.protocol, s.security);
  if (!v.ok()) throw std::invalid_argument("scenario " + s.name + ": " + v.summary());
  s.protocol = v.protocol;
  s.security = v.security;
  return s;
}

Scenario load_scenario(const std::string& name_or_path) {
  fs::path path(name_or_path);
  if (!fs::is_regular_file(path)) path = fs::path(data_dir()) / "scenarios" / (name_or_path + ".json");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario " + name_or_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("scenario " + path.string() + ": " + e.what());
  }
  Scenario s = scenario_from_json(j, path.parent_path().string());
  s.source_path = path.string();
  if (s.name.empty()) s.name = path.stem().string();
  return s;
}

}  // namespace snstf
