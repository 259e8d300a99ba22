#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "leash/trace.hpp"

namespace leash {

/// Convergence regimes for synthetic traces.
///
///  - Converging: entropy decays exponentially toward an asymptote while the
///    margin rises and flattens. Default config halts on a plateau vote.
///  - Plateau: entropy and margin flat from step 1. The entropy-drop gate
///    never opens, so replay runs to the cap.
///  - Noisy: `onset` steps at the initial entropy, then a flat lower level,
///    all with Gaussian jitter of `noise_scale`.
///  - Saturating: the converging regime interleaved with runs of
///    near-deterministic steps (p_max = `saturation_p`).
enum class Regime { Converging, Plateau, Noisy, Saturating };

std::string_view to_string(Regime regime);
std::optional<Regime> parse_regime(std::string_view name);

struct SynthSpec {
  Regime kind = Regime::Converging;
  std::int64_t steps = 320;
  std::int64_t vocab = 32000;
  std::uint64_t seed = 0;

  double initial_entropy = 3.0;  // clamped to log V
  double final_entropy = 0.8;
  double decay_rate = 0.05;      // per step
  double initial_margin = 0.2;
  double final_margin = 2.0;
  std::int64_t onset = 8;        // noisy regime: steps before the drop
  double noise_scale = 0.002;    // noisy regime jitter, also used by logit synthesis
  std::int64_t saturation_run = 3;
  std::int64_t saturation_period = 9;
  double saturation_p = 0.995;
  double saturated_entropy = 0.05;
  double saturated_margin = 6.0;
  std::optional<double> dt_seconds;  // fabricated per-step wall clock

  /// Throws ConfigError on an out-of-range field.
  void validate() const;
};

/// Deterministic signal trace for the given spec and seed.
Trace synthesize(const SynthSpec& spec);

/// Deterministic full-logit trace with the same regime semantics, expressed in
/// logit space: a fixed random score profile scaled by an inverse temperature
/// that follows the regime. A small fraction of entries are non-finite or far
/// below the band so replay exercises sanitization without creating spurious
/// near-one-hot steps.
Trace synthesize_logits(const SynthSpec& spec);

}  // namespace leash
