#include "snstf/grid.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <stdexcept>

namespace snstf {

namespace {

void check_axis(const std::vector<double>& v, double lo, double hi, const char* name) {
  if (v.empty()) throw std::invalid_argument(std::string(name) + " list is empty");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > lo && v[i] <= hi)) throw std::invalid_argument(std::string(name) + " value out of range");
    if (i && !(v[i] > v[i - 1])) throw std::invalid_argument(std::string(name) + " must be strictly ascending");
  }
}

std::size_t index_of(const std::vector<double>& v, double x, const char* name) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::abs(v[i] - x) < 1e-9) return i;
  }
  throw std::out_of_range(std::string("fixture has no ") + name + " column for this value");
}

std::vector<std::vector<double>> matrix(const nlohmann::json& j, std::size_t rows, std::size_t cols,
                                        double scale = 1.0) {
  auto m = j.get<std::vector<std::vector<double>>>();
  if (m.size() != rows) throw std::invalid_argument("grid fixture: wrong row count");
  for (auto& row : m) {
    if (row.size() != cols) throw std::invalid_argument("grid fixture: wrong column count");
    for (double& x : row) x *= scale;
  }
  return m;
}

}  // namespace

void GridSpec::validate() const {
  check_axis(rc, 0.0, 1.0, "rc");
  check_axis(ds_half_deg, 0.0, 90.0, "ds_half");
}

GridResult keyrate_grid(const TallyProvider& provider, const ProtocolParams& p,
                        const SecurityParams& s, const GridSpec& spec) {
  spec.validate();
  GridResult g;
  g.spec = spec;
  const std::size_t nr = spec.rc.size(), nd = spec.ds_half_deg.size();
  g.r.assign(nr, std::vector<double>(nd, 0.0));
  g.e1ph = g.r;
  g.qber_x11 = g.r;
  for (std::size_t i = 0; i < nr; ++i) {
    for (std::size_t j = 0; j < nd; ++j) {
      const double ds = spec.ds_half_deg[j];
      const DetectionTally t = provider(spec.rc[i], ds);
      if (t.empty()) throw std::invalid_argument("empty grid cell");
      const AnalysisReport rep = analyze(t, p, s, ds);
      g.r[i][j] = std::isfinite(rep.key.r) ? rep.key.r : 0.0;
      g.e1ph[i][j] = rep.phase.e1ph_upper;
      g.qber_x11[i][j] = rep.phase.qber_x11;
      if (g.r[i][j] > g.best_r) {
        g.best_r = g.r[i][j];
        g.best_rc = i;
        g.best_ds = j;
      }
    }
  }
  return g;
}

GridFixture load_grid_fixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grid fixture " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("schema_version", "") != "grid_v1") throw std::invalid_argument("grid fixture: bad schema");
  GridFixture g;
  const auto base_path = std::filesystem::path(path).parent_path() / j.at("base_tally").get<std::string>();
  g.base = load_tally(base_path.string());
  g.base_rc = j.at("base_rc").get<double>();
  g.rc = j.at("rc").get<std::vector<double>>();
  g.ds_half_deg = j.at("ds_half_deg").get<std::vector<double>>();
  const std::size_t nr = g.rc.size(), nd = g.ds_half_deg.size();
  g.xx11_detected = matrix(j.at("xx11_detected"), nr, nd);
  g.xx11_qber = matrix(j.at("xx11_qber_percent"), nr, nd, 0.01);
  g.xx22_detected = matrix(j.at("xx22_detected"), nr, nd);
  g.xx22_qber = matrix(j.at("xx22_qber_percent"), nr, nd, 0.01);
  if (j.contains("reference_key_rate")) g.reference_r = matrix(j.at("reference_key_rate"), nr, nd);
  g.spec().validate();
  index_of(g.rc, g.base_rc, "rc");
  return g;
}

DetectionTally fixture_cell(const GridFixture& g, double rc, double ds_half_deg) {
  const std::size_t i = index_of(g.rc, rc, "rc");
  const std::size_t j = index_of(g.ds_half_deg, ds_half_deg, "ds_half");
  const std::size_t base_i = index_of(g.rc, g.base_rc, "rc");
  const std::size_t wide = g.ds_half_deg.size() - 1;
  const double kappa = g.xx11_detected[i][wide] / g.xx11_detected[base_i][wide];

  DetectionTally t = scale_tally(g.base, kappa);
  t.counts["N_emitted"] = g.base.n_total();
  t.xx11_bins.reset();
  t.xx22_bins.reset();
  t.xx11_cuts.clear();
  t.xx22_cuts.clear();

  const auto exact = g.base.xx11_cuts.find(ds_half_deg);
  if (i == base_i && exact != g.base.xx11_cuts.end()) {
    t.xx11_cuts[ds_half_deg] = exact->second;
  } else {
    const double det = g.xx11_detected[i][j];
    t.xx11_cuts[ds_half_deg] = XCut{-1.0, det, det * g.xx11_qber[i][j]};
  }
  const double det22 = g.xx22_detected[i][j];
  t.xx22_cuts[ds_half_deg] = XCut{-1.0, det22, det22 * g.xx22_qber[i][j]};
  t.ds_half_deg = ds_half_deg;
  t.rc = rc;
  return t;
}

TallyProvider fixture_provider(const GridFixture& g) {
  auto shared = std::make_shared<GridFixture>(g);
  return [shared](double rc, double ds) { return fixture_cell(*shared, rc, ds); };
}

TallyProvider simulated_provider(const SimConfig& base) {
  auto cache = std::make_shared<std::map<double, DetectionTally>>();
  return [base, cache](double rc, double ds) {
    auto it = cache->find(rc);
    if (it == cache->end()) {
      SimConfig cfg = base;
      cfg.tracking.rc = rc;
      it = cache->emplace(rc, run_simulation(cfg)).first;
    }
    DetectionTally t = it->second;
    t.ds_half_deg = ds;
    return t;
  };
}

}  // namespace snstf
