#include "snstf/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>

#include "snstf/finite_key.hpp"

namespace snstf {

namespace {

const char* const kNames[] = {"mu1", "mu2", "mu_z", "p0", "p1", "p_z1", "p_z", "ds_half", "rc"};

void normalize(OperatingPoint& p) {
  ProtocolParams& q = p.protocol;
  q.p2 = 1.0 - q.p0 - q.p1;
  q.p_x = 1.0 - q.p_z;
  q.p_z0 = 1.0 - q.p_z1;
}

std::pair<double, double> domain(const std::string& name) {
  if (name == "ds_half") return {0.5, 90.0};
  if (name == "rc") return {1e-3, 1.0};
  if (name.rfind("mu", 0) == 0) return {0.0, 5.0};
  return {0.0, 1.0};
}

}  // namespace

double get_coordinate(const OperatingPoint& p, const std::string& name) {
  const ProtocolParams& q = p.protocol;
  if (name == "mu1") return q.mu1;
  if (name == "mu2") return q.mu2;
  if (name == "mu_z") return q.mu_z;
  if (name == "p0") return q.p0;
  if (name == "p1") return q.p1;
  if (name == "p_z1") return q.p_z1;
  if (name == "p_z") return q.p_z;
  if (name == "ds_half") return p.ds_half_deg;
  if (name == "rc") return p.rc;
  throw std::invalid_argument("unknown coordinate " + name);
}

void set_coordinate(OperatingPoint& p, const std::string& name, double v) {
  ProtocolParams& q = p.protocol;
  if (name == "mu1") q.mu1 = v;
  else if (name == "mu2") q.mu2 = v;
  else if (name == "mu_z") q.mu_z = v;
  else if (name == "p0") q.p0 = v;
  else if (name == "p1") q.p1 = v;
  else if (name == "p_z1") q.p_z1 = v;
  else if (name == "p_z") q.p_z = v;
  else if (name == "ds_half") p.ds_half_deg = v;
  else if (name == "rc") p.rc = v;
  else throw std::invalid_argument("unknown coordinate " + name);
  normalize(p);
}

bool admissible(const OperatingPoint& p) {
  OperatingPoint q = p;
  normalize(q);
  if (!(q.ds_half_deg > 0.0 && q.ds_half_deg <= 90.0 && q.rc > 0.0 && q.rc <= 1.0)) return false;
  if (q.protocol.p2 < 0.0) return false;
  return validate_params(q.protocol, SecurityParams{}).ok();
}

SearchSpace SearchSpace::around(const OperatingPoint& p, double fraction) {
  SearchSpace s;
  for (const char* n : kNames) {
    const double v = get_coordinate(p, n);
    const auto [lo, hi] = domain(n);
    s.ranges.push_back({n, std::clamp(v * (1.0 - fraction), lo, hi), std::clamp(v * (1.0 + fraction), lo, hi)});
  }
  return s;
}

void SearchSpace::validate() const {
  if (ranges.empty()) throw std::invalid_argument("empty search space");
  for (const auto& r : ranges) {
    get_coordinate(OperatingPoint{}, r.name);
    if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
      throw std::invalid_argument("invalid range for " + r.name);
    }
  }
}

OptimizeResult optimize_params(const Objective& f, const OperatingPoint& start,
                               const SearchSpace& space, const OptimizeOptions& opt) {
  space.validate();
  OptimizeResult res;
  auto eval = [&](const OperatingPoint& p) {
    ++res.evaluations;
    if (!admissible(p)) return 0.0;
    const double v = f(p);
    return std::isfinite(v) ? v : 0.0;
  };
  std::mt19937_64 rng(opt.seed);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  bool have_best = false;

  for (int r = 0; r < std::max(1, opt.restarts); ++r) {
    OperatingPoint x = start;
    for (const auto& rg : space.ranges) {
      double v = get_coordinate(x, rg.name);
      if (r > 0) v = rg.lo + (rg.hi - rg.lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      set_coordinate(x, rg.name, std::clamp(v, rg.lo, rg.hi));
    }
    double fx = eval(x);
    res.trace.push_back({r, 0, "start", 0.0, fx});
    for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
      const double before = fx;
      for (const auto& rg : space.ranges) {
        if (rg.hi == rg.lo) continue;
        auto at = [&](double v) {
          OperatingPoint y = x;
          set_coordinate(y, rg.name, v);
          return eval(y);
        };
        double a = rg.lo, b = rg.hi;
        double c = b - g * (b - a), d = a + g * (b - a);
        double fc = at(c), fd = at(d);
        for (int k = 0; k < opt.line_evaluations; ++k) {
          if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = at(c);
          } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = at(d);
          }
        }
        const double v = fc > fd ? c : d;
        const double fv = std::max(fc, fd);
        if (fv > fx) {
          set_coordinate(x, rg.name, v);
          fx = fv;
        }
        res.trace.push_back({r, sweep, rg.name, get_coordinate(x, rg.name), fx});
      }
      if (fx <= before * (1.0 + 1e-4)) break;
    }
    if (!have_best || fx > res.best_value) {
      res.best = x;
      res.best_value = fx;
      have_best = true;
    }
  }
  normalize(res.best);
  return res;
}

Objective expected_keyrate_objective(const SimConfig& base) {
  auto models = std::make_shared<std::map<double, PhaseErrorModel>>();
  return [base, models](const OperatingPoint& p) {
    SimConfig cfg = base;
    cfg.protocol = p.protocol;
    cfg.tracking.rc = p.rc;
    cfg.ds_half_deg = p.ds_half_deg;
    auto it = models->find(p.rc);
    if (it == models->end()) it = models->emplace(p.rc, phase_error_model(cfg)).first;
    const DetectionTally t = expected_tally(cfg, it->second);
    return analyze(t, cfg.protocol, cfg.security, p.ds_half_deg).key.r;
  };
}

nlohmann::json optimize_to_json(const OptimizeResult& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& e : r.trace) {
    trace.push_back({{"restart", e.restart},
                     {"sweep", e.sweep},
                     {"coordinate", e.coordinate},
                     {"value", e.value},
                     {"objective", e.objective}});
  }
  nlohmann::json best;
  for (const char* n : kNames) best[n] = get_coordinate(r.best, n);
  best["p2"] = r.best.protocol.p2;
  best["p_x"] = r.best.protocol.p_x;
  best["p_z0"] = r.best.protocol.p_z0;
  return {{"best", best}, {"R", r.best_value}, {"evaluations", r.evaluations}, {"trace", trace}};
}

}  // namespace snstf
