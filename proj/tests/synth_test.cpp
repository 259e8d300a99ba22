#include "leash/synth.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "leash/harness.hpp"
#include "support/oracle.hpp"

namespace leash {
namespace {

SynthSpec spec_for(Regime kind, std::uint64_t seed, std::int64_t vocab = 32000) {
  SynthSpec spec;
  spec.kind = kind;
  spec.steps = 320;
  spec.vocab = vocab;
  spec.seed = seed;
  return spec;
}

std::string serialize(const Trace& trace) {
  std::ostringstream out;
  write_trace(trace, out);
  return out.str();
}

Decision replay_oracle(const Trace& trace, const StopConfig& cfg) {
  return testing::oracle_stop(step_signals(trace, cfg), cfg);
}

TEST(Synthesize, SeededDeterminism) {
  const auto spec = spec_for(Regime::Converging, 7);
  EXPECT_EQ(serialize(synthesize(spec)), serialize(synthesize(spec)));
  auto noisy = spec_for(Regime::Noisy, 7);
  EXPECT_EQ(serialize(synthesize(noisy)), serialize(synthesize(noisy)));
  noisy.seed = 8;
  EXPECT_NE(serialize(synthesize(noisy)), serialize(synthesize(spec_for(Regime::Noisy, 7))));
  EXPECT_EQ(serialize(synthesize_logits(spec_for(Regime::Saturating, 3, 64))),
            serialize(synthesize_logits(spec_for(Regime::Saturating, 3, 64))));
}

TEST(Synthesize, EmitsValidSignals) {
  for (Regime r : {Regime::Converging, Regime::Plateau, Regime::Noisy, Regime::Saturating}) {
    for (std::int64_t vocab : {2, 5, 32000}) {
      auto spec = spec_for(r, 5, vocab);
      spec.noise_scale = 0.5;
      const Trace trace = synthesize(spec);
      ASSERT_EQ(trace.step_count(), 320);
      for (const auto& s : trace.signals) {
        EXPECT_NO_THROW(validate(s, vocab, StopConfig{})) << to_string(r);
      }
    }
  }
}

TEST(Synthesize, ConvergingHaltsOnPlateau) {
  const StopConfig cfg;
  const Decision d = replay_oracle(synthesize(spec_for(Regime::Converging, 7)), cfg);
  EXPECT_EQ(d.reason, HaltReason::PlateauVote);
  EXPECT_LT(d.tau, cfg.M);
  EXPECT_GE(d.tau, cfg.t_min());
}

TEST(Synthesize, PlateauRunsToCap) {
  const StopConfig cfg;
  EXPECT_EQ(replay_oracle(synthesize(spec_for(Regime::Plateau, 7)), cfg),
            Decision::halt(cfg.M, HaltReason::MaxLengthCap));
}

TEST(Synthesize, NoisyHaltsOnPlateauAtDefaultJitter) {
  const StopConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_EQ(replay_oracle(synthesize(spec_for(Regime::Noisy, seed)), cfg).reason,
              HaltReason::PlateauVote);
  }
}

TEST(Synthesize, SaturatingMarksRuns) {
  const StopConfig cfg;
  const Trace trace = synthesize(spec_for(Regime::Saturating, 1));
  const auto signals = step_signals(trace, cfg);
  int saturated = 0;
  for (const auto& s : signals) saturated += s.saturated ? 1 : 0;
  EXPECT_EQ(saturated, 35 * 3);  // steps 316..320 open a new period, unsaturated
}

TEST(Synthesize, SaturatingHaltsOnPlateau) {
  const StopConfig cfg;
  EXPECT_EQ(replay_oracle(synthesize(spec_for(Regime::Saturating, 1)), cfg).reason,
            HaltReason::PlateauVote);
}

TEST(Synthesize, LogitRegimesHitTargets) {
  const StopConfig cfg;
  EXPECT_EQ(replay_oracle(synthesize_logits(spec_for(Regime::Converging, 2, 64)), cfg).reason,
            HaltReason::PlateauVote);
  EXPECT_EQ(replay_oracle(synthesize_logits(spec_for(Regime::Plateau, 2, 64)), cfg).reason,
            HaltReason::MaxLengthCap);
}

TEST(Synthesize, LogitTracesContainNonFiniteEntries) {
  const Trace trace = synthesize_logits(spec_for(Regime::Converging, 4, 64));
  EXPECT_FALSE(trace.logits.allFinite());
  EXPECT_EQ(trace.token_ids.size(), 320u);
}

TEST(Synthesize, RejectsInvalidSpec) {
  auto spec = spec_for(Regime::Converging, 1);
  spec.steps = 0;
  EXPECT_THROW(synthesize(spec), ConfigError);
  spec = spec_for(Regime::Converging, 1, 1);
  EXPECT_THROW(synthesize(spec), ConfigError);
  spec = spec_for(Regime::Converging, 1);
  spec.decay_rate = std::numeric_limits<double>::infinity();
  EXPECT_THROW(synthesize(spec), ConfigError);
  spec = spec_for(Regime::Saturating, 1);
  spec.saturation_run = 10;
  EXPECT_THROW(synthesize(spec), ConfigError);
}

TEST(Regime, ParsesNames) {
  EXPECT_EQ(parse_regime("noisy"), Regime::Noisy);
  EXPECT_EQ(parse_regime("saturating"), Regime::Saturating);
  EXPECT_FALSE(parse_regime("wobbly"));
}

}  // namespace
}  // namespace leash
