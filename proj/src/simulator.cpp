#include "snstf/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

namespace snstf {

namespace {

constexpr double kDeg = kPi / 180.0;
constexpr int kChoices = kNumSourceChoices;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double wrap_pi(double x) {
  double r = std::fmod(x + kPi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  return r - kPi;
}

int thread_count(const SimConfig& cfg) {
  int n = cfg.threads;
  if (n <= 0) {
    if (const char* env = std::getenv("TFQKD_THREADS")) n = std::atoi(env);
  }
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  return std::max(1, n);
}

// Runs f(i) for i in [0, n) on up to `threads` workers.
template <typename F>
void parallel_for(int n, int threads, F f) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) f(i);
    });
  }
  for (auto& th : pool) th.join();
}

struct Accumulator {
  double sent[kChoices][kChoices] = {};
  double det[kChoices][kChoices] = {};
  double valid[2] = {};
  MismatchHistogram h11 = MismatchHistogram::zeros();
  MismatchHistogram h22 = MismatchHistogram::zeros();
  double windows = 0.0;
  double frames = 0.0;
  double frames_kept = 0.0;

  void add(const Accumulator& o) {
    for (int a = 0; a < kChoices; ++a) {
      for (int b = 0; b < kChoices; ++b) {
        sent[a][b] += o.sent[a][b];
        det[a][b] += o.det[a][b];
      }
    }
    valid[0] += o.valid[0];
    valid[1] += o.valid[1];
    h11.add(o.h11);
    h22.add(o.h22);
    windows += o.windows;
    frames += o.frames;
    frames_kept += o.frames_kept;
  }
};

struct Setup {
  const SimConfig& cfg;
  std::array<double, kChoices> prob{};
  std::array<double, kChoices> mu{};
  ArmEfficiency eta;
  double p_noise = 0.0;
  double visibility = 1.0;
  int wpf = 0;
  double frame_ms = 0.0;
  double ref_mean = 0.0;
  DriftPath path;

  explicit Setup(const SimConfig& c) : cfg(c) {
    const ProtocolParams& p = cfg.protocol;
    for (int i = 0; i < kChoices; ++i) {
      prob[i] = p.choice_probability(kSourceChoices[i]);
      mu[i] = p.intensity(kSourceChoices[i].intensity);
    }
    eta = cfg.channel.signal_efficiency();
    p_noise = cfg.channel.p_noise();
    visibility = cfg.channel.visibility();
    wpf = windows_per_frame(cfg);
    frame_ms = frame_duration_ms(cfg);
    ref_mean = reference_counts_per_frame(cfg);
  }

  ClickProbabilities clicks(int a, int b, double delta) const {
    return click_probabilities(mu[a], mu[b], delta, eta.eta_a, eta.eta_b, p_noise, visibility);
  }

  double window_time_ms(double frame_start, int k) const {
    const ProtocolParams& p = cfg.protocol;
    const int period = k / p.pulses_per_period;
    const int slot = k % p.pulses_per_period;
    return frame_start + (period * p.period_ns + slot * p.signal_spacing_ns) * 1e-6;
  }

  ReferenceFrame reference_frame(const DriftPath& drift, double t0, std::uint64_t seed) const {
    const ProtocolParams& p = cfg.protocol;
    const int periods = cfg.tracking.periods_per_frame;
    std::mt19937_64 rng(seed);
    ReferenceFrame f;
    f.periods_accumulated = periods;
    f.t_ms = t0;
    f.true_phase = drift.phase_at(t0 + 0.5 * frame_ms);
    const double cell = ref_mean / (4.0 * periods);
    const double first = p.pulses_per_period * p.signal_spacing_ns;
    for (int per = 0; per < periods; ++per) {
      for (int i = 0; i < 4; ++i) {
        const double t = t0 + (per * p.period_ns + first + (i + 0.5) * p.ref_width_ns) * 1e-6;
        const double c = visibility * std::cos(kReferenceOffsets[i] + drift.phase_at(t));
        const double m1 = cell * 0.5 * (1.0 + c), m2 = cell * 0.5 * (1.0 - c);
        // det1 at setting i and det2 at the opposite setting share the same fringe.
        if (m1 > 0.0) f.counts[i] += std::poisson_distribution<long long>(m1)(rng);
        if (m2 > 0.0) f.counts[(i + 2) % 4] += std::poisson_distribution<long long>(m2)(rng);
      }
    }
    return f;
  }
};

std::uint64_t drift_seed(const SimConfig& cfg) {
  return stream_seed(cfg.master_seed, 0, cfg.tracking.drift.seed);
}

DriftPath run_drift(const SimConfig& cfg, double duration_ms, std::uint64_t seed) {
  DriftModel m = cfg.tracking.drift;
  m.seed = seed;
  return sample_drift(m, std::max(duration_ms, m.resample_interval_ms));
}

PhaseEstimate estimate_or_reject(const ReferenceFrame& f) {
  const double total = f.counts[0] + f.counts[1] + f.counts[2] + f.counts[3];
  if (!(total > 0.0)) return {0.0, std::numeric_limits<double>::infinity(), false};
  return estimate_phase(f);
}

bool threshold_accept(const SimConfig& cfg, const PhaseEstimate& e) {
  return cfg.tracking.ideal || e.residual <= cfg.tracking.rc;
}

void simulate_frame(const Setup& s, std::int64_t index, int n_win, double phi_est, Accumulator& acc) {
  const SimConfig& cfg = s.cfg;
  std::mt19937_64 rng(stream_seed(cfg.master_seed, 2, static_cast<std::uint64_t>(index)));
  const double t0 = static_cast<double>(index) * s.frame_ms;
  const int slices = cfg.protocol.n_phase_slices;
  const double slice_step = kTwoPi / slices;
  auto pick = [&](double u) {
    int i = 0;
    for (; i < kChoices - 1; ++i) {
      if (u < s.prob[i]) break;
      u -= s.prob[i];
    }
    return i;
  };
  for (int k = 0; k < n_win; ++k) {
    const int a = pick(uniform01(rng));
    const int b = pick(uniform01(rng));
    const int sa = static_cast<int>(rng() % static_cast<std::uint64_t>(slices));
    const int sb = static_cast<int>(rng() % static_cast<std::uint64_t>(slices));
    const double u = uniform01(rng);
    const double t = s.window_time_ms(t0, k);
    const double phi_true = s.path.phase_at(t);
    const double dtheta = (sa - sb) * slice_step;
    const ClickProbabilities c = s.clicks(a, b, dtheta + phi_true);

    acc.sent[a][b] += 1.0;
    DetectorOutcome out = DetectorOutcome::kNone;
    if (u < c.det1_only()) {
      out = DetectorOutcome::kDet1;
    } else if (u < c.det1_only() + c.det2_only()) {
      out = DetectorOutcome::kDet2;
    }
    if (out != DetectorOutcome::kNone) {
      acc.det[a][b] += 1.0;
      acc.valid[out == DetectorOutcome::kDet1 ? 0 : 1] += 1.0;
    }

    if (a != b || kSourceChoices[a].basis != Basis::kX) continue;
    MismatchHistogram* h = nullptr;
    if (kSourceChoices[a].intensity == Intensity::kMu1) h = &acc.h11;
    if (kSourceChoices[a].intensity == Intensity::kMu2) h = &acc.h22;
    if (!h) continue;
    const double est = cfg.tracking.ideal ? phi_true : phi_est;
    const SliceDecision sd = wrap_mismatch(dtheta + est);
    const int bin = std::min(kMismatchBins - 1, static_cast<int>(sd.mismatch_deg));
    h->sent[bin] += 1.0;
    if (out == DetectorOutcome::kNone) continue;
    const int ch = out == DetectorOutcome::kDet1 ? 0 : 1;
    const int expected = sd.inverted ? 1 : 0;
    h->detected[ch][bin] += 1.0;
    if (ch == expected) h->correct[ch][bin] += 1.0;
  }
  acc.windows += n_win;
}

DetectionTally to_tally(const Accumulator& acc, const SimConfig& cfg, double n_emitted, const char* mode) {
  DetectionTally t;
  double sent_zz = 0.0;
  for (int a = 0; a < kChoices; ++a) {
    for (int b = 0; b < kChoices; ++b) {
      const SourcePairLabel l{kSourceChoices[a], kSourceChoices[b]};
      t.counts[l.sent_key()] = acc.sent[a][b];
      t.counts[l.detected_key()] = acc.det[a][b];
      if (l.alice.basis == Basis::kZ && l.bob.basis == Basis::kZ) sent_zz += acc.sent[a][b];
    }
  }
  t.counts["Sent-ZZ"] = sent_zz;
  t.counts["Detected-ZZError"] = t.get("Detected-ZZ33") + t.get("Detected-ZZ00");
  t.counts["Detected-ZZCorrect"] = t.get("Detected-ZZ30") + t.get("Detected-ZZ03");
  t.counts["Detected-Valid-Det1"] = acc.valid[0];
  t.counts["Detected-Valid-Det2"] = acc.valid[1];
  t.counts["N_total"] = acc.windows;
  t.counts["N_emitted"] = n_emitted;
  t.xx11_bins = acc.h11;
  t.xx22_bins = acc.h22;
  t.ds_half_deg = cfg.ds_half_deg;
  t.rc = cfg.tracking.rc;
  t.r_gate = cfg.channel.r_gate;
  // Per-channel rows at the configured cut, in the recorded-table layout.
  const auto& h = acc.h11;
  const int upto = std::clamp(static_cast<int>(std::round(cfg.ds_half_deg)), 1, kMismatchBins);
  double d[2] = {0, 0}, c[2] = {0, 0}, sent = 0.0;
  for (int b = 0; b < upto; ++b) {
    sent += h.sent[b];
    for (int ch = 0; ch < 2; ++ch) {
      d[ch] += h.detected[ch][b];
      c[ch] += h.correct[ch][b];
    }
  }
  t.counts["Detected-XX11-Ds-Ch1"] = d[0];
  t.counts["Detected-XX11-Ds-Ch2"] = d[1];
  t.counts["Correct-XX11-Ds-Ch1"] = c[0];
  t.counts["Correct-XX11-Ds-Ch2"] = c[1];
  t.counts["N_X1"] = sent;
  t.metadata = {{"mode", mode},
                {"master_seed", cfg.master_seed},
                {"frames", acc.frames},
                {"frames_kept", acc.frames_kept},
                {"selection", cfg.tracking.selection == FrameSelection::kFraction ? "fraction" : "residual"},
                {"ideal_tracking", cfg.tracking.ideal}};
  return t;
}

void validate(const SimConfig& cfg) {
  require_valid(cfg.protocol, cfg.security);
  if (!(cfg.tracking.rc > 0.0)) throw std::invalid_argument("rc must be > 0");
  if (cfg.tracking.selection == FrameSelection::kFraction && cfg.tracking.rc > 1.0) {
    throw std::invalid_argument("rc fraction must lie in (0, 1]");
  }
  if (cfg.tracking.periods_per_frame <= 0) throw std::invalid_argument("periods_per_frame must be > 0");
  if (!(cfg.ds_half_deg > 0.0 && cfg.ds_half_deg <= 90.0)) throw std::invalid_argument("ds_half out of range");
  const auto e = cfg.channel.signal_efficiency();
  if (!(e.eta_a >= 0.0 && e.eta_a <= 1.0 && e.eta_b >= 0.0 && e.eta_b <= 1.0)) {
    throw std::invalid_argument("arm efficiency must lie in [0, 1]");
  }
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(master) ^ stream) + index);
}

int windows_per_frame(const SimConfig& cfg) {
  return cfg.tracking.periods_per_frame * cfg.protocol.pulses_per_period;
}

double frame_duration_ms(const SimConfig& cfg) {
  return cfg.tracking.periods_per_frame * cfg.protocol.period_ns * 1e-6;
}

double reference_counts_per_frame(const SimConfig& cfg) {
  return cfg.channel.reference_detection_rate_hz * frame_duration_ms(cfg) * 1e-3;
}

double PhaseErrorModel::bin_center(int k) const { return -kPi + k * (kTwoPi / kBins); }

std::vector<ReferenceFrame> simulate_reference_stream(const SimConfig& cfg, double duration_ms) {
  if (!(duration_ms > 0.0)) throw std::invalid_argument("duration must be > 0");
  const Setup s(cfg);
  const auto n = static_cast<std::int64_t>(std::floor(duration_ms / s.frame_ms));
  const DriftPath path = run_drift(cfg, (n + 1) * s.frame_ms, drift_seed(cfg));
  std::vector<ReferenceFrame> out;
  out.reserve(n);
  for (std::int64_t i = 0; i < n; ++i) {
    out.push_back(s.reference_frame(path, i * s.frame_ms, stream_seed(cfg.master_seed, 1, i)));
  }
  return out;
}

DetectionTally simulate_experiment(const SimConfig& cfg) {
  validate(cfg);
  if (!(cfg.n_windows >= 0.0) || cfg.n_windows > std::ldexp(1.0, 40)) {
    throw std::invalid_argument("n_windows must lie in [0, 2^40]");
  }
  if (cfg.shard_count <= 0) throw std::invalid_argument("shard_count must be > 0");
  Setup s(cfg);
  const auto n_windows = static_cast<std::int64_t>(cfg.n_windows);
  const std::int64_t n_frames = (n_windows + s.wpf - 1) / s.wpf;
  s.path = run_drift(cfg, (n_frames + 1) * s.frame_ms, drift_seed(cfg));
  const int threads = thread_count(cfg);
  const int shards = cfg.shard_count;
  auto shard_range = [&](int k) {
    return std::pair<std::int64_t, std::int64_t>{n_frames * k / shards, n_frames * (k + 1) / shards};
  };
  auto frame_windows = [&](std::int64_t i) {
    return static_cast<int>(std::min<std::int64_t>(s.wpf, n_windows - i * s.wpf));
  };

  std::vector<PhaseEstimate> estimates;
  std::vector<bool> keep;
  const bool fraction = cfg.tracking.selection == FrameSelection::kFraction && !cfg.tracking.ideal;
  if (fraction) {
    if (n_frames > 200'000'000) throw std::invalid_argument("too many frames for fraction selection");
    estimates.resize(n_frames);
    parallel_for(shards, threads, [&](int k) {
      auto [lo, hi] = shard_range(k);
      for (std::int64_t i = lo; i < hi; ++i) {
        estimates[i] = estimate_or_reject(
            s.reference_frame(s.path, i * s.frame_ms, stream_seed(cfg.master_seed, 1, i)));
      }
    });
    keep = accept_frames(estimates, cfg.tracking.rc);
    for (std::int64_t i = 0; i < n_frames; ++i) {
      if (!std::isfinite(estimates[i].residual)) keep[i] = false;
    }
  }

  std::vector<Accumulator> acc(shards);
  parallel_for(shards, threads, [&](int k) {
    auto [lo, hi] = shard_range(k);
    for (std::int64_t i = lo; i < hi; ++i) {
      acc[k].frames += 1.0;
      PhaseEstimate est;
      bool accepted = true;
      if (fraction) {
        est = estimates[i];
        accepted = keep[i];
      } else if (!cfg.tracking.ideal) {
        est = estimate_or_reject(
            s.reference_frame(s.path, i * s.frame_ms, stream_seed(cfg.master_seed, 1, i)));
        accepted = est.accepted && threshold_accept(cfg, est);
      }
      if (!accepted) continue;
      acc[k].frames_kept += 1.0;
      simulate_frame(s, i, frame_windows(i), est.delta_phi_t, acc[k]);
    }
  });
  Accumulator total;
  for (const auto& a : acc) total.add(a);
  return to_tally(total, cfg, static_cast<double>(n_windows), "montecarlo");
}

PhaseErrorModel phase_error_model(const SimConfig& cfg) {
  PhaseErrorModel m;
  m.weight.assign(PhaseErrorModel::kBins, 0.0);
  if (cfg.tracking.ideal) {
    m.weight[PhaseErrorModel::kBins / 2] = 1.0;
    return m;
  }
  const Setup s(cfg);
  const int n = std::max(1, cfg.tracking.error_model_frames);
  const double spacing = std::max(cfg.tracking.error_model_spacing_ms, s.frame_ms);
  const DriftPath path =
      run_drift(cfg, n * spacing + s.frame_ms, stream_seed(cfg.master_seed, 3, 0));
  std::vector<PhaseEstimate> est(n);
  std::vector<double> t0(n);
  for (int k = 0; k < n; ++k) {
    t0[k] = k * spacing;
    est[k] = estimate_or_reject(
        s.reference_frame(path, t0[k], stream_seed(cfg.master_seed, 3, static_cast<std::uint64_t>(k) + 1)));
  }
  std::vector<bool> keep;
  if (cfg.tracking.selection == FrameSelection::kFraction) {
    keep = accept_frames(est, cfg.tracking.rc);
  } else {
    keep = accept_frames_below_residual(est, cfg.tracking.rc);
  }
  const double bin_w = kTwoPi / PhaseErrorModel::kBins;
  double kept = 0.0, total_w = 0.0;
  for (int k = 0; k < n; ++k) {
    if (!keep[k] || !std::isfinite(est[k].residual)) continue;
    kept += 1.0;
    m.residual_threshold = std::max(m.residual_threshold, est[k].residual);
    for (int w = 0; w < s.wpf; ++w) {
      const double eps = wrap_pi(est[k].delta_phi_t - path.phase_at(s.window_time_ms(t0[k], w)));
      const int bin = static_cast<int>(std::floor((eps + kPi) / bin_w + 0.5)) % PhaseErrorModel::kBins;
      m.weight[bin] += 1.0;
      total_w += 1.0;
    }
  }
  m.kept_fraction = kept / n;
  if (total_w > 0.0) {
    for (double& w : m.weight) w /= total_w;
  }
  return m;
}

DetectionTally expected_tally(const SimConfig& cfg) {
  validate(cfg);
  return expected_tally(cfg, phase_error_model(cfg));
}

DetectionTally expected_tally(const SimConfig& cfg, const PhaseErrorModel& em) {
  validate(cfg);
  if (static_cast<int>(em.weight.size()) != PhaseErrorModel::kBins) {
    throw std::invalid_argument("phase error model has the wrong bin count");
  }
  const Setup s(cfg);
  const double n_emitted = cfg.protocol.n_total;
  const double n_kept = n_emitted * em.kept_fraction;

  constexpr int kPhaseGrid = 256;
  Accumulator acc;
  acc.windows = n_kept;
  for (int a = 0; a < kChoices; ++a) {
    for (int b = 0; b < kChoices; ++b) {
      const double sent = n_kept * s.prob[a] * s.prob[b];
      acc.sent[a][b] = sent;
      double p1 = 0.0, p2 = 0.0;
      for (int k = 0; k < kPhaseGrid; ++k) {
        const ClickProbabilities c = s.clicks(a, b, kTwoPi * (k + 0.5) / kPhaseGrid);
        p1 += c.det1_only();
        p2 += c.det2_only();
      }
      p1 /= kPhaseGrid;
      p2 /= kPhaseGrid;
      acc.det[a][b] = sent * (p1 + p2);
      acc.valid[0] += sent * p1;
      acc.valid[1] += sent * p2;
    }
  }

  // Mismatch histograms. The reference angle x is uniform and the true
  // interference phase is x minus the estimator error. Sub-points sit at
  // 1/8 degree offsets so every x - error lands on one fine grid.
  std::vector<int> support;
  for (int k = 0; k < PhaseErrorModel::kBins; ++k) {
    if (em.weight[k] > 0.0) support.push_back(k);
  }
  constexpr int kSub = 8;
  constexpr int kFine = 360 * kSub;
  for (int choice : {1, 2}) {  // X-mu1 and X-mu2 in kSourceChoices
    std::vector<double> p1(kFine), p2(kFine);
    for (int m = 0; m < kFine; ++m) {
      const ClickProbabilities c = s.clicks(choice, choice, (m + 0.5) / kSub * kDeg);
      p1[m] = c.det1_only();
      p2[m] = c.det2_only();
    }
    auto fine = [&](int m) { return ((m % kFine) + kFine) % kFine; };
    MismatchHistogram& h = choice == 1 ? acc.h11 : acc.h22;
    const double sent_bin = acc.sent[choice][choice] / kMismatchBins;
    for (int bin = 0; bin < kMismatchBins; ++bin) {
      double right = 0.0, wrong = 0.0;
      for (int j = 0; j < kSub; ++j) {
        for (int k : support) {
          // error centre k sits at (2k - 1440) / 8 degrees
          const int plus = fine(kSub * bin + j + 1440 - 2 * k);
          const int minus = fine(-kSub * bin - j - 1 + 1440 - 2 * k);
          right += em.weight[k] * (p1[plus] + p1[minus]);
          wrong += em.weight[k] * (p2[plus] + p2[minus]);
        }
      }
      right /= 2.0 * kSub;
      wrong /= 2.0 * kSub;
      h.sent[bin] = sent_bin;
      // Half of the angles sit near pi, where the ports swap roles.
      for (int ch = 0; ch < 2; ++ch) {
        h.detected[ch][bin] = sent_bin * 0.5 * (right + wrong);
        h.correct[ch][bin] = sent_bin * 0.5 * right;
      }
    }
  }
  acc.frames = n_emitted / s.wpf;
  acc.frames_kept = acc.frames * em.kept_fraction;
  DetectionTally t = to_tally(acc, cfg, n_emitted, "expected");
  t.metadata["kept_fraction"] = em.kept_fraction;
  return t;
}

DetectionTally run_simulation(const SimConfig& cfg) {
  return cfg.mode == SimMode::kExpected ? expected_tally(cfg) : simulate_experiment(cfg);
}

}  // namespace snstf
