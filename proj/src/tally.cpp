#include "snstf/tally.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace snstf {

namespace {

using nlohmann::json;

const char* const kReservedKeys[] = {"schema_version", "Ds",         "rc",        "r_rc",
                                     "r_gate",         "XX11-Bins",  "XX22-Bins", "XX11-Cuts",
                                     "XX22-Cuts",      "metadata"};

bool reserved(const std::string& k) {
  for (const char* r : kReservedKeys) {
    if (k == r) return true;
  }
  return false;
}

json number(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9.0e15) {
    return static_cast<long long>(v);
  }
  return v;
}

json vec_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

std::vector<double> vec_from(const json& j, int bins) {
  auto v = j.get<std::vector<double>>();
  if (static_cast<int>(v.size()) != bins) throw std::invalid_argument("histogram arrays differ in length");
  return v;
}

json hist_json(const MismatchHistogram& h) {
  return json{{"Sent", vec_json(h.sent)},
              {"Detected-Ch1", vec_json(h.detected[0])},
              {"Detected-Ch2", vec_json(h.detected[1])},
              {"Correct-Ch1", vec_json(h.correct[0])},
              {"Correct-Ch2", vec_json(h.correct[1])}};
}

MismatchHistogram hist_from(const json& j) {
  MismatchHistogram h;
  h.sent = j.at("Sent").get<std::vector<double>>();
  const int n = h.bins();
  h.detected[0] = vec_from(j.at("Detected-Ch1"), n);
  h.detected[1] = vec_from(j.at("Detected-Ch2"), n);
  h.correct[0] = vec_from(j.at("Correct-Ch1"), n);
  h.correct[1] = vec_from(j.at("Correct-Ch2"), n);
  return h;
}

// skip is NaN when every cut is written.
json cuts_json(const std::map<double, XCut>& cuts, double skip) {
  json a = json::array();
  for (const auto& [ds, c] : cuts) {
    if (skip == ds) continue;
    json e{{"Ds", number(ds)}, {"Detected", number(c.detected)}, {"Wrong", number(c.wrong)}};
    if (c.sent >= 0.0) e["Sent"] = number(c.sent);
    a.push_back(e);
  }
  return a;
}

std::map<double, XCut> cuts_from(const json& j) {
  std::map<double, XCut> out;
  for (const auto& e : j) {
    XCut c;
    c.detected = e.at("Detected").get<double>();
    c.wrong = e.at("Wrong").get<double>();
    c.sent = e.contains("Sent") ? e.at("Sent").get<double>() : -1.0;
    out[e.at("Ds").get<double>()] = c;
  }
  return out;
}

void merge_cuts(std::map<double, XCut>& into, const std::map<double, XCut>& from) {
  for (const auto& [ds, c] : from) {
    auto it = into.find(ds);
    if (it == into.end()) {
      into[ds] = c;
      continue;
    }
    it->second.detected += c.detected;
    it->second.wrong += c.wrong;
    it->second.sent = (it->second.sent >= 0.0 && c.sent >= 0.0) ? it->second.sent + c.sent : -1.0;
  }
}

void merge_hist(std::optional<MismatchHistogram>& into, const std::optional<MismatchHistogram>& from) {
  if (!from) return;
  if (!into) {
    into = from;
    return;
  }
  if (into->bins() != from->bins()) throw std::invalid_argument("tally layout mismatch: histogram bins differ");
  into->add(*from);
}

void merge_annotation(std::optional<double>& into, const std::optional<double>& from, const char* name) {
  if (!from) return;
  if (into && *into != *from) {
    throw std::invalid_argument(std::string("tally layout mismatch: ") + name + " differs");
  }
  into = from;
}

bool has_ds_rows(const DetectionTally& t) {
  return t.has("Detected-XX11-Ds-Ch1") && t.has("Detected-XX11-Ds-Ch2") &&
         t.has("Correct-XX11-Ds-Ch1") && t.has("Correct-XX11-Ds-Ch2");
}

}  // namespace

MismatchHistogram MismatchHistogram::zeros(int bins) {
  MismatchHistogram h;
  h.sent.assign(bins, 0.0);
  for (int c = 0; c < 2; ++c) {
    h.detected[c].assign(bins, 0.0);
    h.correct[c].assign(bins, 0.0);
  }
  return h;
}

XCut MismatchHistogram::cut(double ds_half_deg) const {
  const double width = 90.0 / bins();
  const double n = ds_half_deg / width;
  if (!(ds_half_deg > 0.0) || ds_half_deg > 90.0 || std::abs(n - std::round(n)) > 1e-9) {
    throw std::invalid_argument("cut must be a positive whole number of bins up to 90 degrees");
  }
  const int upto = static_cast<int>(std::round(n));
  XCut c;
  for (int b = 0; b < upto; ++b) {
    c.sent += sent[b];
    for (int ch = 0; ch < 2; ++ch) {
      c.detected += detected[ch][b];
      c.wrong += detected[ch][b] - correct[ch][b];
    }
  }
  return c;
}

void MismatchHistogram::add(const MismatchHistogram& o) {
  for (int b = 0; b < bins(); ++b) {
    sent[b] += o.sent[b];
    for (int ch = 0; ch < 2; ++ch) {
      detected[ch][b] += o.detected[ch][b];
      correct[ch][b] += o.correct[ch][b];
    }
  }
}

void MismatchHistogram::scale(double k) {
  for (int b = 0; b < bins(); ++b) {
    sent[b] *= k;
    for (int ch = 0; ch < 2; ++ch) {
      detected[ch][b] *= k;
      correct[ch][b] *= k;
    }
  }
}

double DetectionTally::get(const std::string& key) const {
  auto it = counts.find(key);
  return it == counts.end() ? 0.0 : it->second;
}

double DetectionTally::zz_error() const {
  if (has("Detected-ZZError")) return get("Detected-ZZError");
  return get("Detected-ZZ33") + get("Detected-ZZ00");
}

double DetectionTally::zz_correct() const {
  if (has("Detected-ZZCorrect")) return get("Detected-ZZCorrect");
  return get("Detected-ZZ30") + get("Detected-ZZ03");
}

bool DetectionTally::has_z_categories() const {
  return has("Detected-ZZ00") && has("Detected-ZZ03") && has("Detected-ZZ30") && has("Detected-ZZ33");
}

XCut DetectionTally::xx11_cut(double ds_half_deg) const {
  if (xx11_bins) return xx11_bins->cut(ds_half_deg);
  auto it = xx11_cuts.find(ds_half_deg);
  if (it == xx11_cuts.end()) throw std::out_of_range("no X1 counts recorded for this phase cut");
  return it->second;
}

XCut DetectionTally::xx22_cut(double ds_half_deg) const {
  if (xx22_bins) return xx22_bins->cut(ds_half_deg);
  auto it = xx22_cuts.find(ds_half_deg);
  if (it == xx22_cuts.end()) throw std::out_of_range("no X2 counts recorded for this phase cut");
  return it->second;
}

DetectionTally tally_merge(const DetectionTally& a, const DetectionTally& b) {
  DetectionTally out = a;
  for (const auto& [k, v] : b.counts) out.counts[k] += v;
  merge_hist(out.xx11_bins, b.xx11_bins);
  merge_hist(out.xx22_bins, b.xx22_bins);
  merge_cuts(out.xx11_cuts, b.xx11_cuts);
  merge_cuts(out.xx22_cuts, b.xx22_cuts);
  merge_annotation(out.ds_half_deg, b.ds_half_deg, "Ds");
  merge_annotation(out.rc, b.rc, "rc");
  merge_annotation(out.r_rc, b.r_rc, "r_rc");
  merge_annotation(out.r_gate, b.r_gate, "r_gate");
  if (out.metadata.empty()) out.metadata = b.metadata;
  return out;
}

DetectionTally scale_tally(const DetectionTally& t, double k) {
  DetectionTally out = t;
  for (auto& [key, v] : out.counts) v *= k;
  if (out.xx11_bins) out.xx11_bins->scale(k);
  if (out.xx22_bins) out.xx22_bins->scale(k);
  for (auto* cuts : {&out.xx11_cuts, &out.xx22_cuts}) {
    for (auto& [ds, c] : *cuts) {
      c.detected *= k;
      c.wrong *= k;
      if (c.sent >= 0.0) c.sent *= k;
    }
  }
  return out;
}

nlohmann::json tally_to_json(const DetectionTally& t) {
  json j = json::object();
  j["schema_version"] = kTallySchema;
  for (const auto& [k, v] : t.counts) j[k] = number(v);
  if (t.ds_half_deg) j["Ds"] = number(*t.ds_half_deg);
  if (t.rc) j["rc"] = number(*t.rc);
  if (t.r_rc) j["r_rc"] = *t.r_rc;
  if (t.r_gate) j["r_gate"] = *t.r_gate;
  if (t.xx11_bins) j["XX11-Bins"] = hist_json(*t.xx11_bins);
  if (t.xx22_bins) j["XX22-Bins"] = hist_json(*t.xx22_bins);
  const double derived = has_ds_rows(t) && t.ds_half_deg ? *t.ds_half_deg : std::nan("");
  if (!t.xx11_cuts.empty()) {
    auto c = cuts_json(t.xx11_cuts, derived);
    if (!c.empty()) j["XX11-Cuts"] = c;
  }
  if (!t.xx22_cuts.empty()) j["XX22-Cuts"] = cuts_json(t.xx22_cuts, std::nan(""));
  if (!t.metadata.empty()) j["metadata"] = t.metadata;
  return j;
}

DetectionTally tally_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("schema_version")) {
    throw std::invalid_argument("tally: missing schema_version");
  }
  if (j.at("schema_version") != kTallySchema) {
    throw std::invalid_argument("tally: unsupported schema " + j.at("schema_version").dump());
  }
  DetectionTally t;
  for (const auto& [k, v] : j.items()) {
    if (reserved(k)) continue;
    if (!v.is_number()) throw std::invalid_argument("tally: non-numeric value for " + k);
    t.counts[k] = v.get<double>();
  }
  if (j.contains("Ds")) t.ds_half_deg = j.at("Ds").get<double>();
  if (j.contains("rc")) t.rc = j.at("rc").get<double>();
  if (j.contains("r_rc")) t.r_rc = j.at("r_rc").get<double>();
  if (j.contains("r_gate")) t.r_gate = j.at("r_gate").get<double>();
  if (j.contains("XX11-Bins")) t.xx11_bins = hist_from(j.at("XX11-Bins"));
  if (j.contains("XX22-Bins")) t.xx22_bins = hist_from(j.at("XX22-Bins"));
  if (j.contains("XX11-Cuts")) t.xx11_cuts = cuts_from(j.at("XX11-Cuts"));
  if (j.contains("XX22-Cuts")) t.xx22_cuts = cuts_from(j.at("XX22-Cuts"));
  if (j.contains("metadata")) t.metadata = j.at("metadata");

  if (t.ds_half_deg && has_ds_rows(t)) {
    XCut c;
    c.sent = t.has("N_X1") ? t.get("N_X1") : -1.0;
    c.detected = t.get("Detected-XX11-Ds-Ch1") + t.get("Detected-XX11-Ds-Ch2");
    c.wrong = c.detected - t.get("Correct-XX11-Ds-Ch1") - t.get("Correct-XX11-Ds-Ch2");
    t.xx11_cuts[*t.ds_half_deg] = c;
  }
  return t;
}

DetectionTally load_tally(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tally file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("tally: malformed JSON in " + path + ": " + e.what());
  }
  return tally_from_json(j);
}

void save_tally(const DetectionTally& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write tally file " + path);
  out << tally_to_json(t).dump(2) << '\n';
}

}  // namespace snstf
