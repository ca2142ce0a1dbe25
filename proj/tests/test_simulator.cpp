#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "snstf/scenario.hpp"
#include "snstf/simulator.hpp"

using namespace snstf;

namespace {

SimConfig base_config(double windows = 2e5) {
  SimConfig cfg = load_scenario("509km").sim_config();
  cfg.mode = SimMode::kMonteCarlo;
  cfg.n_windows = windows;
  cfg.master_seed = 11;
  cfg.threads = 2;
  cfg.tracking.error_model_frames = 2000;
  return cfg;
}

}  // namespace

TEST_CASE("seed streams are distinct and stable") {
  CHECK(stream_seed(1, 0, 0) != stream_seed(1, 1, 0));
  CHECK(stream_seed(1, 2, 5) != stream_seed(1, 2, 6));
  CHECK(stream_seed(1, 2, 5) != stream_seed(2, 2, 5));
  CHECK(stream_seed(9, 3, 4) == stream_seed(9, 3, 4));
  CHECK(splitmix64(0) == 0xE220A8397B1DCDAFULL);
}

TEST_CASE("Monte Carlo runs are deterministic and shard invariant") {
  auto cfg = base_config();
  cfg.shard_count = 1;
  const auto ref = simulate_experiment(cfg);
  for (int shards : {1, 4, 16}) {
    cfg.shard_count = shards;
    cfg.threads = shards == 16 ? 3 : 1;
    const auto t = simulate_experiment(cfg);
    CHECK(t.counts == ref.counts);
    CHECK(t.xx11_bins->detected[0] == ref.xx11_bins->detected[0]);
    CHECK(t.xx22_bins->correct[1] == ref.xx22_bins->correct[1]);
  }
  cfg.master_seed = 12;
  CHECK(simulate_experiment(cfg).counts != ref.counts);
}

TEST_CASE("detections never exceed emissions and Z rows are consistent") {
  const auto t = simulate_experiment(base_config());
  for (const auto& l : all_source_pairs()) CHECK(t.detected(l) <= t.sent(l));
  CHECK(t.zz_error() == t.get("Detected-ZZ33") + t.get("Detected-ZZ00"));
  CHECK(t.zz_correct() == t.get("Detected-ZZ30") + t.get("Detected-ZZ03"));
  CHECK(t.has_z_categories());
  double sent = 0.0;
  for (const auto& l : all_source_pairs()) sent += t.sent(l);
  CHECK(sent <= t.n_total());
  CHECK(t.get("N_emitted") == 2e5);
}

TEST_CASE("a dark channel with zero efficiency produces nothing") {
  auto cfg = base_config(5e4);
  cfg.channel.efficiency_override = ArmEfficiency{0.0, 0.0};
  cfg.channel.noise.dark_count_hz = 0.0;
  cfg.channel.noise.rrsors_rate_hz = 0.0;
  cfg.channel.noise.extra_rate_hz = 0.0;
  cfg.tracking.ideal = true;
  const auto t = simulate_experiment(cfg);
  for (const auto& l : all_source_pairs()) CHECK(t.detected(l) == 0.0);
  cfg.protocol.n_total = 1e10;
  const auto e = expected_tally(cfg);
  for (const auto& l : all_source_pairs()) CHECK(e.detected(l) == 0.0);
}

TEST_CASE("expected vacuum heralding rate is two noise clicks exclusive") {
  auto cfg = base_config();
  cfg.tracking.ideal = true;
  const auto t = expected_tally(cfg);
  const double p = cfg.channel.p_noise();
  const auto l = SourcePairLabel::parse("XX00");
  CHECK(t.detected(l) / t.sent(l) == doctest::Approx(2.0 * p * (1.0 - p)).epsilon(1e-9));
  // Sent counts follow the product of choice probabilities.
  const auto zx = SourcePairLabel::parse("ZX31");
  const double expect = cfg.protocol.n_total * cfg.protocol.choice_probability(zx.alice) *
                        cfg.protocol.choice_probability(zx.bob);
  CHECK(t.sent(zx) == doctest::Approx(expect));
}

TEST_CASE("Monte Carlo agrees with expected counts on a bright channel") {
  auto cfg = base_config(2e6);
  cfg.channel.efficiency_override = ArmEfficiency{0.3, 0.3};
  cfg.tracking.ideal = true;
  const auto mc = simulate_experiment(cfg);
  cfg.protocol.n_total = 2e6;
  const auto ex = expected_tally(cfg);
  for (const char* code : {"ZZ33", "ZX31", "XX11", "XX22", "XZ03"}) {
    const auto l = SourcePairLabel::parse(code);
    const double mean = ex.detected(l);
    REQUIRE(mean > 100.0);
    CHECK(std::abs(mc.detected(l) - mean) < 5.0 * std::sqrt(mean));
  }
}

TEST_CASE("reference frames carry about 44 counts") {
  const auto cfg = base_config();
  CHECK(reference_counts_per_frame(cfg) == doctest::Approx(44.4).epsilon(0.02));
  const auto frames = simulate_reference_stream(cfg, 20.0);
  REQUIRE(frames.size() > 100);
  double sum = 0.0;
  for (const auto& f : frames) sum += f.counts[0] + f.counts[1] + f.counts[2] + f.counts[3];
  CHECK(sum / frames.size() == doctest::Approx(reference_counts_per_frame(cfg)).epsilon(0.05));
}

TEST_CASE("phase error model is a distribution") {
  const auto cfg = base_config();
  const auto m = phase_error_model(cfg);
  double s = 0.0;
  for (double w : m.weight) s += w;
  CHECK(s == doctest::Approx(1.0));
  CHECK(m.kept_fraction > 0.0);
  CHECK(m.kept_fraction <= 1.0);
}

TEST_CASE("invalid runs are rejected") {
  auto cfg = base_config();
  cfg.n_windows = std::ldexp(1.0, 41);
  CHECK_THROWS_AS(simulate_experiment(cfg), std::invalid_argument);
  cfg = base_config();
  cfg.shard_count = 0;
  CHECK_THROWS_AS(simulate_experiment(cfg), std::invalid_argument);
  cfg = base_config();
  cfg.protocol.mu1 = 0.5;
  CHECK_THROWS_AS(simulate_experiment(cfg), std::invalid_argument);
}
