// tfqkd: command-line driver for simulation, analysis, grids, bounds,
// noise curves, phase tracking and parameter search.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "snstf/bounds.hpp"
#include "snstf/channel.hpp"
#include "snstf/finite_key.hpp"
#include "snstf/grid.hpp"
#include "snstf/optimizer.hpp"
#include "snstf/phase.hpp"
#include "snstf/scenario.hpp"
#include "snstf/simulator.hpp"

#ifndef TFQKD_VERSION
#define TFQKD_VERSION "dev"
#endif

using nlohmann::json;
using namespace snstf;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr)) {
    throw std::runtime_error("SHA-256 failed");
  }
  std::ostringstream ss;
  for (unsigned int i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return ss.str();
}

json read_json(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

struct Options {
  std::string scenario = "509km";
  std::string params_path, channel_path, security_path;
  std::uint64_t seed = 1;
  int shards = 1;
  std::string mode = "expected";
  std::string out;
};

/// Inputs hashed into every output header.
struct Provenance {
  std::vector<std::pair<std::string, std::string>> inputs;  // path, sha256
  std::uint64_t seed = 0;
  std::string command;

  void add(const std::string& path) {
    if (!path.empty()) inputs.emplace_back(path, sha256_hex(read_file(path)));
  }
  json to_json() const {
    json in = json::array();
    for (const auto& [p, h] : inputs) in.push_back({{"path", p}, {"sha256", h}});
    return {{"tool", "tfqkd"}, {"version", TFQKD_VERSION}, {"command", command}, {"seed", seed}, {"inputs", in}};
  }
  std::string csv_header() const {
    std::ostringstream ss;
    ss << "# tfqkd " << TFQKD_VERSION << " " << command << " seed=" << seed << "\n";
    for (const auto& [p, h] : inputs) ss << "# input " << p << " sha256=" << h << "\n";
    return ss.str();
  }
};

struct Context {
  Scenario scenario;
  Provenance prov;
};

Context load_context(const Options& o, const std::string& command) {
  Context c;
  c.scenario = load_scenario(o.scenario);
  c.prov.command = command;
  c.prov.seed = o.seed;
  c.prov.add(c.scenario.source_path);
  if (!o.params_path.empty()) {
    apply_protocol_json(c.scenario.protocol, read_json(o.params_path));
    c.prov.add(o.params_path);
  }
  if (!o.channel_path.empty()) {
    apply_channel_json(c.scenario.channel, read_json(o.channel_path));
    c.prov.add(o.channel_path);
  }
  if (!o.security_path.empty()) {
    apply_security_json(c.scenario.security, read_json(o.security_path));
    c.prov.add(o.security_path);
  }
  const ValidatedParams v = validate_params(c.scenario.protocol, c.scenario.security);
  if (!v.ok()) throw std::invalid_argument(v.summary());
  c.scenario.protocol = v.protocol;
  c.scenario.security = v.security;
  return c;
}

void emit(const Options& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw IoError("cannot write " + o.out);
  f << text;
  if (!f) throw IoError("write failed for " + o.out);
}

std::string fmt(double x) {
  if (std::isnan(x)) return "";
  std::ostringstream ss;
  ss << std::setprecision(10) << x;
  return ss.str();
}

SimMode parse_mode(const std::string& m) {
  if (m == "expected") return SimMode::kExpected;
  if (m == "montecarlo") return SimMode::kMonteCarlo;
  throw std::invalid_argument("--mode must be 'expected' or 'montecarlo'");
}

// ---------------------------------------------------------------- verbs

struct SimulateOpts {
  double windows = 1e6;
  double rc = -1.0;
  double ds = -1.0;
};

int cmd_simulate(const Options& o, const SimulateOpts& so) {
  Context c = load_context(o, "simulate");
  SimConfig cfg = c.scenario.sim_config();
  cfg.mode = parse_mode(o.mode);
  cfg.master_seed = o.seed;
  cfg.shard_count = o.shards;
  cfg.n_windows = so.windows;
  if (so.rc > 0.0) cfg.tracking.rc = so.rc;
  if (so.ds > 0.0) cfg.ds_half_deg = so.ds;
  DetectionTally t = run_simulation(cfg);
  t.metadata["provenance"] = c.prov.to_json();
  t.metadata["mode"] = o.mode;
  emit(o, tally_to_json(t).dump(2) + "\n");
  return 0;
}

int cmd_analyze(const Options& o, const std::string& tally_path, double ds, bool calibrate) {
  Context c = load_context(o, "analyze");
  json out;
  if (calibrate) {
    std::vector<std::string> names{"350km", "408km", "509km"};
    std::vector<Scenario> scenarios;
    std::vector<DetectionTally> tallies;
    for (const auto& n : names) {
      scenarios.push_back(load_scenario(n));
      c.prov.add(scenarios.back().tally_path);
      tallies.push_back(scenarios.back().recorded_tally());
    }
    std::vector<FCalibrationCase> cases;
    for (std::size_t i = 0; i < names.size(); ++i) {
      cases.push_back({&tallies[i], scenarios[i].protocol, scenarios[i].security, scenarios[i].ds_half_deg,
                       scenarios[i].reported.at("R").get<double>()});
    }
    const FCalibration cal = calibrate_f(cases);
    out["f_calibration"] = {{"f", cal.f}, {"rms_log_error", cal.rms_log_error}, {"rates", cal.rates},
                            {"scenarios", names}};
    out["provenance"] = c.prov.to_json();
    emit(o, out.dump(2) + "\n");
    return 0;
  }
  const std::string path = tally_path.empty() ? c.scenario.tally_path : tally_path;
  if (path.empty()) throw std::invalid_argument("no tally given and the scenario has none");
  c.prov.add(path);
  const DetectionTally t = tally_from_json(read_json(path));
  std::optional<double> cut;
  if (ds > 0.0) cut = ds;
  else if (tally_path.empty()) cut = c.scenario.ds_half_deg;
  const AnalysisReport rep = analyze(t, c.scenario.protocol, c.scenario.security, cut);
  out = report_to_json(rep);
  out["provenance"] = c.prov.to_json();
  emit(o, out.dump(2) + "\n");
  return 0;
}

int cmd_grid(const Options& o, const std::string& fixture_path, bool simulated) {
  Context c = load_context(o, "grid");
  GridResult g;
  std::vector<std::vector<double>> reference;
  if (simulated) {
    SimConfig cfg = c.scenario.sim_config();
    cfg.mode = parse_mode(o.mode);
    cfg.master_seed = o.seed;
    cfg.shard_count = o.shards;
    g = keyrate_grid(simulated_provider(cfg), c.scenario.protocol, c.scenario.security, GridSpec{});
  } else {
    std::string path = fixture_path;
    if (path.empty()) {
      if (!c.scenario.grid_path) throw std::invalid_argument("scenario has no grid fixture; pass --fixture");
      path = *c.scenario.grid_path;
    }
    c.prov.add(path);
    const GridFixture fx = load_grid_fixture(path);
    reference = fx.reference_r;
    g = keyrate_grid(fixture_provider(fx), c.scenario.protocol, c.scenario.security, fx.spec());
  }
  std::ostringstream ss;
  ss << c.prov.csv_header();
  ss << "# argmax rc=" << g.spec.rc[g.best_rc] << " ds_half_deg=" << g.spec.ds_half_deg[g.best_ds]
     << " R=" << fmt(g.best_r) << "\n";
  ss << "rc,ds_half_deg,R,e1ph,qber_x11,reference_R\n";
  for (std::size_t i = 0; i < g.spec.rc.size(); ++i) {
    for (std::size_t j = 0; j < g.spec.ds_half_deg.size(); ++j) {
      const double ref = reference.empty() ? std::nan("") : reference[i][j];
      ss << fmt(g.spec.rc[i]) << "," << fmt(g.spec.ds_half_deg[j]) << "," << fmt(g.r[i][j]) << ","
         << fmt(g.e1ph[i][j]) << "," << fmt(g.qber_x11[i][j]) << "," << fmt(ref) << "\n";
    }
  }
  emit(o, ss.str());
  return 0;
}

int cmd_bounds(const Options& o, const std::vector<double>& losses, double station_eff) {
  Context c = load_context(o, "bounds");
  const double eff = station_eff >= 0.0 ? station_eff : c.scenario.channel.station_efficiency();
  std::vector<BoundsRow> rows;
  if (losses.empty()) {
    const double loss = c.scenario.channel.fiber.total_loss_db();
    double r = std::nan("");
    if (!c.scenario.tally_path.empty()) {
      c.prov.add(c.scenario.tally_path);
      r = analyze(c.scenario.recorded_tally(), c.scenario.protocol, c.scenario.security, c.scenario.ds_half_deg)
              .key.r;
    }
    rows.push_back(repeaterless_bounds(loss, eff, r));
  } else {
    for (double l : losses) {
      if (!(l >= 0.0)) throw std::invalid_argument("--loss must be >= 0");
      rows.push_back(repeaterless_bounds(l, eff));
    }
  }
  std::ostringstream ss;
  ss << c.prov.csv_header() << "# station_efficiency=" << fmt(eff) << " capacity_sentinel=" << kCapacitySentinel
     << "\n";
  ss << "loss_db,plob_abs,plob_cond,tgw,simulated_R\n";
  for (const auto& r : rows) {
    ss << fmt(r.loss_db) << "," << fmt(r.plob_abs) << "," << fmt(r.plob_cond) << "," << fmt(r.tgw) << ","
       << fmt(r.simulated_r) << "\n";
  }
  emit(o, ss.str());
  return 0;
}

struct NoiseOpts {
  std::vector<double> lengths;
  std::string fit_path;
  double ref_rate_hz = 2e6;
  double scatter = -1.0;
  double alpha = -1.0;
  bool no_rrsors = false;
};

std::vector<NoisePoint> read_noise_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<NoisePoint> pts;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || !(std::isdigit(static_cast<unsigned char>(line[0])) || line[0] == '.')) {
      continue;
    }
    NoisePoint p;
    char comma = 0;
    std::istringstream ls(line);
    if (!(ls >> p.length_km >> comma >> p.noise_hz) || comma != ',') {
      throw std::invalid_argument(path + ": expected 'length_km,noise_hz' rows");
    }
    pts.push_back(p);
  }
  return pts;
}

int cmd_noise(const Options& o, NoiseOpts no) {
  Context c = load_context(o, "noise");
  NoiseModel model;
  model.alpha_per_km = no.alpha > 0.0 ? no.alpha : c.scenario.channel.fiber.alpha_per_km;
  model.scatter_per_km = no.scatter >= 0.0 ? no.scatter : c.scenario.channel.fiber.scatter_per_km;
  model.dark_count_hz = c.scenario.channel.noise.dark_count_hz;
  model.include_rrsors = !no.no_rrsors;
  ReferencePowerPolicy policy{no.ref_rate_hz, c.scenario.channel.station_efficiency(),
                              c.scenario.channel.fiber.wavelength_nm};
  std::ostringstream ss;
  if (!no.fit_path.empty()) {
    c.prov.add(no.fit_path);
    const NoiseFit fit = fit_noise_curve(read_noise_csv(no.fit_path), model.alpha_per_km, policy);
    model.scatter_per_km = fit.scatter_per_km;
    model.dark_count_hz = fit.dark_count_hz;
    ss << c.prov.csv_header() << "# fit scatter_per_km=" << fmt(fit.scatter_per_km)
       << " dark_count_hz=" << fmt(fit.dark_count_hz) << " rms_residual_hz=" << fmt(fit.rms_residual_hz) << "\n";
  } else {
    ss << c.prov.csv_header();
  }
  ss << "# alpha_per_km=" << fmt(model.alpha_per_km) << " reference_count_rate_hz=" << fmt(no.ref_rate_hz) << "\n";
  if (no.lengths.empty()) {
    for (int l = 0; l <= 600; l += 25) no.lengths.push_back(l);
  }
  ss << "length_km,noise_hz,rrsors_hz,dark_hz\n";
  for (const auto& p : noise_curve(no.lengths, model, policy)) {
    ss << fmt(p.length_km) << "," << fmt(p.noise_hz) << "," << fmt(p.rrsors_hz) << "," << fmt(p.dark_hz) << "\n";
  }
  emit(o, ss.str());
  return 0;
}

int cmd_phase(const Options& o, double duration_ms, double rc) {
  Context c = load_context(o, "phase");
  SimConfig cfg = c.scenario.sim_config();
  cfg.master_seed = o.seed;
  if (rc > 0.0) cfg.tracking.rc = rc;
  if (!(duration_ms > 0.0)) throw std::invalid_argument("--duration-ms must be > 0");
  const auto frames = simulate_reference_stream(cfg, duration_ms);
  std::vector<PhaseEstimate> est;
  est.reserve(frames.size());
  for (const auto& f : frames) {
    const double total = f.counts[0] + f.counts[1] + f.counts[2] + f.counts[3];
    est.push_back(total > 0.0 ? estimate_phase(f) : PhaseEstimate{0.0, 2.0, false});
  }
  const std::vector<bool> keep = cfg.tracking.selection == FrameSelection::kFraction
                                     ? accept_frames(est, cfg.tracking.rc)
                                     : accept_frames_below_residual(est, cfg.tracking.rc);
  std::ostringstream ss;
  ss << c.prov.csv_header();
  ss << "t_ms,true_phase_rad,est_phase_rad,residual,accepted\n";
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const double truth = std::fmod(std::fmod(frames[i].true_phase, kTwoPi) + kTwoPi, kTwoPi);
    ss << fmt(frames[i].t_ms) << "," << fmt(truth) << "," << fmt(est[i].delta_phi_t) << "," << fmt(est[i].residual)
       << "," << (keep[i] ? 1 : 0) << "\n";
  }
  emit(o, ss.str());
  return 0;
}

int cmd_optimize(const Options& o, double spread, int restarts, int sweeps) {
  Context c = load_context(o, "optimize");
  SimConfig cfg = c.scenario.sim_config();
  cfg.mode = SimMode::kExpected;
  cfg.tracking.error_model_frames = std::min(cfg.tracking.error_model_frames, 5000);
  OperatingPoint start{c.scenario.protocol, c.scenario.ds_half_deg, c.scenario.rc};
  SearchSpace space = SearchSpace::around(start, spread);
  OptimizeOptions opt;
  opt.restarts = restarts;
  opt.max_sweeps = sweeps;
  opt.seed = o.seed;
  const OptimizeResult r = optimize_params(expected_keyrate_objective(cfg), start, space, opt);
  json out = optimize_to_json(r);
  out["provenance"] = c.prov.to_json();
  emit(o, out.dump(2) + "\n");
  return 0;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--scenario", o.scenario, "Scenario name or JSON path")->capture_default_str();
  cmd->add_option("--params", o.params_path, "Protocol parameter overrides (JSON)");
  cmd->add_option("--channel", o.channel_path, "Channel overrides (JSON)");
  cmd->add_option("--security", o.security_path, "Security overrides (JSON)");
  cmd->add_option("--seed", o.seed, "Master seed")->capture_default_str();
  cmd->add_option("--shards", o.shards, "Shard count")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--mode", o.mode, "expected | montecarlo")->capture_default_str();
  cmd->add_option("--out", o.out, "Output file (stdout when omitted)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SNS twin-field QKD simulator and finite-key analyzer"};
  app.set_version_flag("--version", TFQKD_VERSION);
  app.require_subcommand(1);
  Options o;

  SimulateOpts so;
  auto* sim = app.add_subcommand("simulate", "Simulate a run and write its tally");
  add_common(sim, o);
  sim->add_option("--windows", so.windows, "Monte Carlo window count")->capture_default_str();
  sim->add_option("--rc", so.rc, "Frame acceptance override");
  sim->add_option("--ds", so.ds, "Phase-mismatch half-width in degrees");

  std::string tally_path;
  double ana_ds = -1.0;
  bool calibrate = false;
  auto* ana = app.add_subcommand("analyze", "Finite-key analysis of a tally");
  add_common(ana, o);
  ana->add_option("--tally", tally_path, "Tally JSON (default: the scenario's recorded tally)");
  ana->add_option("--ds", ana_ds, "Phase-mismatch half-width in degrees");
  ana->add_flag("--calibrate-f", calibrate, "Fit f to the shipped scenarios' reported key rates");

  std::string fixture_path;
  bool simulated = false;
  auto* grid = app.add_subcommand("grid", "Key rate over (rc, ds_half)");
  add_common(grid, o);
  grid->add_option("--fixture", fixture_path, "Grid fixture JSON");
  grid->add_flag("--simulated", simulated, "Use simulated tallies instead of the fixture");

  std::vector<double> losses;
  double station_eff = -1.0;
  auto* bnd = app.add_subcommand("bounds", "Repeaterless bounds");
  add_common(bnd, o);
  bnd->add_option("--loss", losses, "Fiber loss in dB (repeatable)");
  bnd->add_option("--station-efficiency", station_eff, "Efficiency for the conditional bound");

  NoiseOpts no;
  auto* noise = app.add_subcommand("noise", "Detection noise versus fiber length");
  add_common(noise, o);
  noise->add_option("--lengths", no.lengths, "Fiber lengths in km");
  noise->add_option("--fit", no.fit_path, "Measured 'length_km,noise_hz' CSV to fit");
  noise->add_option("--reference-rate", no.ref_rate_hz, "Reference detections held fixed, 1/s")
      ->capture_default_str();
  noise->add_option("--scatter", no.scatter, "Rayleigh capture coefficient S, 1/km");
  noise->add_option("--alpha", no.alpha, "Loss coefficient, 1/km");
  noise->add_flag("--no-rrsors", no.no_rrsors, "Dark counts only");

  double duration_ms = 10.0, phase_rc = -1.0;
  auto* ph = app.add_subcommand("phase", "Reference-pulse phase tracking trace");
  add_common(ph, o);
  ph->add_option("--duration-ms", duration_ms, "Trace length")->capture_default_str();
  ph->add_option("--rc", phase_rc, "Frame acceptance override");

  double spread = 0.2;
  int restarts = 3, sweeps = 3;
  auto* opt = app.add_subcommand("optimize", "Search source parameters for the best key rate");
  add_common(opt, o);
  opt->add_option("--spread", spread, "Relative half-width of each search range")->capture_default_str();
  opt->add_option("--restarts", restarts, "Restarts")->capture_default_str();
  opt->add_option("--sweeps", sweeps, "Coordinate sweeps per restart")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*sim) return cmd_simulate(o, so);
    if (*ana) return cmd_analyze(o, tally_path, ana_ds, calibrate);
    if (*grid) return cmd_grid(o, fixture_path, simulated);
    if (*bnd) return cmd_bounds(o, losses, station_eff);
    if (*noise) return cmd_noise(o, no);
    if (*ph) return cmd_phase(o, duration_ms, phase_rc);
    if (*opt) return cmd_optimize(o, spread, restarts, sweeps);
  } catch (const IoError& e) {
    std::cerr << "tfqkd: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::runtime_error& e) {
    std::cerr << "tfqkd: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "tfqkd: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
