#include "snstf/protocol.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace snstf {

namespace {

char basis_char(Basis b) { return b == Basis::kX ? 'X' : 'Z'; }

bool valid_choice(SourceChoice c) {
  if (c.basis == Basis::kX) return c.intensity != Intensity::kMuZ;
  return c.intensity == Intensity::kVacuum || c.intensity == Intensity::kMuZ;
}

}  // namespace

int source_index(SourceChoice c) {
  for (int i = 0; i < kNumSourceChoices; ++i) {
    if (kSourceChoices[i] == c) return i;
  }
  throw std::invalid_argument("invalid source choice");
}

std::string SourcePairLabel::code() const {
  std::string s(4, ' ');
  s[0] = basis_char(alice.basis);
  s[1] = basis_char(bob.basis);
  s[2] = static_cast<char>('0' + static_cast<int>(alice.intensity));
  s[3] = static_cast<char>('0' + static_cast<int>(bob.intensity));
  return s;
}

SourcePairLabel SourcePairLabel::parse(std::string_view code) {
  if (code.size() != 4) throw std::invalid_argument("label must have 4 characters");
  auto basis = [&](char ch) {
    if (ch == 'X') return Basis::kX;
    if (ch == 'Z') return Basis::kZ;
    throw std::invalid_argument("bad basis in label " + std::string(code));
  };
  auto intensity = [&](char ch) {
    if (ch < '0' || ch > '3') throw std::invalid_argument("bad intensity in label " + std::string(code));
    return static_cast<Intensity>(ch - '0');
  };
  SourcePairLabel l{{basis(code[0]), intensity(code[2])}, {basis(code[1]), intensity(code[3])}};
  if (!valid_choice(l.alice) || !valid_choice(l.bob)) {
    throw std::invalid_argument("impossible source pair " + std::string(code));
  }
  return l;
}

std::vector<SourcePairLabel> all_source_pairs() {
  std::vector<SourcePairLabel> out;
  out.reserve(kNumSourceChoices * kNumSourceChoices);
  for (const auto& a : kSourceChoices) {
    for (const auto& b : kSourceChoices) out.push_back({a, b});
  }
  return out;
}

double ProtocolParams::intensity(Intensity i) const {
  switch (i) {
    case Intensity::kVacuum: return 0.0;
    case Intensity::kMu1: return mu1;
    case Intensity::kMu2: return mu2;
    case Intensity::kMuZ: return mu_z;
  }
  return 0.0;
}

double ProtocolParams::choice_probability(SourceChoice c) const {
  if (c.basis == Basis::kX) {
    switch (c.intensity) {
      case Intensity::kVacuum: return p_x * p0;
      case Intensity::kMu1: return p_x * p1;
      case Intensity::kMu2: return p_x * p2;
      case Intensity::kMuZ: return 0.0;
    }
  }
  if (c.intensity == Intensity::kMuZ) return p_z * p_z1;
  if (c.intensity == Intensity::kVacuum) return p_z * p_z0;
  return 0.0;
}

SecurityParams SecurityParams::with_xi(double xi, double f) {
  SecurityParams s;
  s.xi = s.eps_cor = s.eps_pa = s.eps_hat = xi;
  s.f = f;
  return s;
}

std::string ValidatedParams::summary() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (i) os << "; ";
    os << errors[i].field << ": " << errors[i].message;
  }
  return os.str();
}

ValidatedParams validate_params(const ProtocolParams& p, const SecurityParams& s) {
  ValidatedParams out{p, s, {}};
  auto fail = [&](std::string field, std::string msg) {
    out.errors.push_back({std::move(field), std::move(msg)});
  };
  constexpr double kSumTol = 1e-6;

  const std::pair<const char*, double> intensities[] = {
      {"mu1", p.mu1}, {"mu2", p.mu2}, {"mu_z", p.mu_z}, {"mu_ref", p.mu_ref}};
  for (const auto& [name, v] : intensities) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail(name, "intensity must be >= 0");
  }
  if (!(p.mu1 < p.mu2)) fail("mu1", "mu1 < mu2 required");

  const std::pair<const char*, double> probs[] = {{"p_x", p.p_x}, {"p_z", p.p_z}, {"p0", p.p0},
                                                  {"p1", p.p1},   {"p2", p.p2},   {"p_z0", p.p_z0},
                                                  {"p_z1", p.p_z1}};
  for (const auto& [name, v] : probs) {
    if (!(v >= 0.0 && v <= 1.0)) fail(name, "probability must lie in [0, 1]");
  }
  const double basis_sum = p.p_x + p.p_z;
  if (std::abs(basis_sum - 1.0) > kSumTol) fail("p_x", "window probabilities must sum to 1");
  const double decoy_sum = p.p0 + p.p1 + p.p2;
  if (std::abs(decoy_sum - 1.0) > kSumTol) fail("p0", "decoy probabilities must sum to 1");
  const double send_sum = p.p_z0 + p.p_z1;
  if (std::abs(send_sum - 1.0) > kSumTol) fail("p_z1", "signal send probabilities must sum to 1");

  if (!(p.n_total > 0.0)) fail("n_total", "N_total must be > 0");
  if (p.n_phase_slices <= 0) fail("n_phase_slices", "must be > 0");
  if (p.pulses_per_period <= 0) fail("pulses_per_period", "must be > 0");
  if (!(p.period_ns > 0.0)) fail("period_ns", "must be > 0");

  if (!(s.xi > 0.0 && s.xi < 1.0)) fail("xi", "0 < xi < 1 required");
  const std::pair<const char*, double> eps[] = {
      {"eps_cor", s.eps_cor}, {"eps_pa", s.eps_pa}, {"eps_hat", s.eps_hat}};
  for (const auto& [name, v] : eps) {
    if (!(v > 0.0 && v < 1.0)) fail(name, "must lie in (0, 1)");
  }
  if (!(s.f >= 1.0)) fail("f", "error-correction efficiency must be >= 1");

  if (out.ok()) {
    out.protocol.p_x /= basis_sum;
    out.protocol.p_z /= basis_sum;
    out.protocol.p0 /= decoy_sum;
    out.protocol.p1 /= decoy_sum;
    out.protocol.p2 /= decoy_sum;
    out.protocol.p_z0 /= send_sum;
    out.protocol.p_z1 /= send_sum;
  }
  return out;
}

ProtocolParams require_valid(const ProtocolParams& p, const SecurityParams& s) {
  auto v = validate_params(p, s);
  if (!v.ok()) throw std::invalid_argument(v.summary());
  return v.protocol;
}

WindowClass classify_window(Basis a_window, Basis b_window, Intensity a_intensity,
                            Intensity b_intensity, double theta_a, double theta_b,
                            double psi_ab, double lambda) {
  if (a_window == Basis::kZ && b_window == Basis::kZ) return WindowClass::kZ;
  if (a_window != Basis::kX || b_window != Basis::kX) return WindowClass::kDiscard;
  if (a_intensity != b_intensity) return WindowClass::kDiscard;
  if (a_intensity != Intensity::kMu1 && a_intensity != Intensity::kMu2) return WindowClass::kDiscard;
  if (1.0 - std::abs(std::cos(theta_a - theta_b - psi_ab)) > lambda) return WindowClass::kDiscard;
  return a_intensity == Intensity::kMu1 ? WindowClass::kX1 : WindowClass::kX2;
}

}  // namespace snstf
