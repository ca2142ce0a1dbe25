#include <doctest.h>

#include <random>
#include <set>
#include <stdexcept>

#include "snstf/protocol.hpp"

using namespace snstf;

namespace {

bool has_error(const ValidatedParams& v, const std::string& text) {
  for (const auto& e : v.errors) {
    if (e.message.find(text) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("509 km source settings validate") {
  ProtocolParams p;  // defaults are the 509 km column
  const auto v = validate_params(p, SecurityParams{});
  CHECK(v.ok());
  CHECK(v.protocol.p0 + v.protocol.p1 + v.protocol.p2 == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("validation reports each violated invariant by field") {
  ProtocolParams p;
  p.mu1 = 0.4;
  p.mu2 = 0.4;
  auto v = validate_params(p, SecurityParams{});
  CHECK_FALSE(v.ok());
  CHECK(has_error(v, "mu1 < mu2 required"));

  p = ProtocolParams{};
  p.p0 = 0.05;
  p.p1 = 0.8;
  p.p2 = 0.05;
  v = validate_params(p, SecurityParams{});
  CHECK(has_error(v, "decoy probabilities must sum to 1"));
  CHECK(v.errors.front().field == "p0");

  p = ProtocolParams{};
  p.mu_z = -0.1;
  p.n_total = 0;
  SecurityParams s;
  s.xi = 1.5;
  v = validate_params(p, s);
  CHECK(v.errors.size() >= 3);
  CHECK_THROWS_AS(require_valid(p, s), std::invalid_argument);
}

TEST_CASE("small rounding in probability sums is renormalized") {
  ProtocolParams p;
  p.p_x = 0.2240004;
  const auto v = validate_params(p, SecurityParams{});
  REQUIRE(v.ok());
  CHECK(v.protocol.p_x + v.protocol.p_z == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("eps_tol is 22 xi") {
  const auto s = SecurityParams::with_xi(1e-10);
  CHECK(s.eps_tol() == doctest::Approx(2.2e-9));
  CHECK(s.eps_cor == s.xi);
  CHECK(s.eps_pa == s.xi);
  CHECK(s.eps_hat == s.xi);
}

TEST_CASE("source pair labels") {
  const auto all = all_source_pairs();
  CHECK(all.size() == 25);
  std::set<std::string> codes;
  for (const auto& l : all) {
    codes.insert(l.code());
    CHECK(SourcePairLabel::parse(l.code()) == l);
  }
  CHECK(codes.size() == 25);
  CHECK(codes.count("ZX01"));
  CHECK(codes.count("XZ03"));
  CHECK(SourcePairLabel::parse("ZX31").sent_key() == "Sent-ZX31");
  CHECK(SourcePairLabel::parse("XX11").detected_key() == "Detected-XX11");
  CHECK_THROWS_AS(SourcePairLabel::parse("XZ33"), std::invalid_argument);
  CHECK_THROWS_AS(SourcePairLabel::parse("ZX13"), std::invalid_argument);
  CHECK_THROWS_AS(SourcePairLabel::parse("XX4"), std::invalid_argument);
  CHECK_THROWS_AS(SourcePairLabel::parse("QX00"), std::invalid_argument);
}

TEST_CASE("choice probabilities sum to one per party") {
  ProtocolParams p;
  double sum = 0.0;
  for (const auto& c : kSourceChoices) sum += p.choice_probability(c);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("window classification") {
  using B = Basis;
  using I = Intensity;
  CHECK(classify_window(B::kZ, B::kZ, I::kMuZ, I::kVacuum, 0.3, 1.2, 0.0, 0.01) == WindowClass::kZ);
  CHECK(classify_window(B::kX, B::kX, I::kMu1, I::kMu1, 0.5, 0.5, 0.0, 1e-9) == WindowClass::kX1);
  CHECK(classify_window(B::kX, B::kX, I::kMu1, I::kMu1, kPi / 2, 0.0, 0.0, 0.015) == WindowClass::kDiscard);
  CHECK(classify_window(B::kX, B::kX, I::kMu2, I::kMu2, kPi, 0.0, 0.0, 0.015) == WindowClass::kX2);
  CHECK(classify_window(B::kX, B::kX, I::kMu1, I::kMu2, 0.0, 0.0, 0.0, 1.0) == WindowClass::kDiscard);
  CHECK(classify_window(B::kX, B::kX, I::kVacuum, I::kVacuum, 0.0, 0.0, 0.0, 1.0) == WindowClass::kDiscard);
  CHECK(classify_window(B::kX, B::kZ, I::kMu1, I::kMuZ, 0.0, 0.0, 0.0, 1.0) == WindowClass::kDiscard);
}

TEST_CASE("classification is symmetric under party swap with psi negated") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10.0, 10.0), lam(0.001, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double a = u(rng), b = u(rng), psi = u(rng), l = lam(rng);
    const auto x = classify_window(Basis::kX, Basis::kX, Intensity::kMu1, Intensity::kMu1, a, b, psi, l);
    const auto y = classify_window(Basis::kX, Basis::kX, Intensity::kMu1, Intensity::kMu1, b, a, -psi, l);
    CHECK(x == y);
  }
}

TEST_CASE("window records never herald double clicks") {
  WindowRecord r;
  r.outcome = DetectorOutcome::kBoth;
  CHECK_FALSE(r.heralded());
  r.outcome = DetectorOutcome::kDet2;
  CHECK(r.heralded());
}
