#include "leash/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "leash/errors.hpp"

namespace leash {

namespace {

// Non-saturated steps never report p_max above this.
constexpr double kUnsaturatedPeakCap = 0.98;

// Inverse-temperature schedule for logit synthesis.
constexpr double kColdBeta = 0.5;
constexpr double kHotBeta = 4.0;
constexpr double kSaturationBoost = 20.0;
constexpr double kCorruptionRate = 0.01;

bool saturated_step(const SynthSpec& spec, std::int64_t t) {
  return spec.kind == Regime::Saturating &&
         (t - 1) % spec.saturation_period >= spec.saturation_period - spec.saturation_run;
}

Trace blank_trace(const SynthSpec& spec, TraceKind kind) {
  Trace trace;
  trace.meta.kind = kind;
  trace.meta.vocab_size = spec.vocab;
  trace.meta.model_id = "synthetic";
  trace.meta.prompt_id = std::string(to_string(spec.kind)) + "-s" + std::to_string(spec.seed);
  trace.meta.synthetic = true;
  trace.meta.dt_fabricated = spec.dt_seconds.has_value();
  trace.meta.extra["regime"] = std::string(to_string(spec.kind));
  trace.meta.extra["seed"] = spec.seed;
  return trace;
}

}  // namespace

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::Converging: return "converging";
    case Regime::Plateau: return "plateau";
    case Regime::Noisy: return "noisy";
    case Regime::Saturating: return "saturating";
  }
  return "converging";
}

std::optional<Regime> parse_regime(std::string_view name) {
  for (Regime r : {Regime::Converging, Regime::Plateau, Regime::Noisy, Regime::Saturating}) {
    if (to_string(r) == name) return r;
  }
  return std::nullopt;
}

void SynthSpec::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid synth spec: " + what); };
  if (steps < 1) fail("steps must be >= 1");
  if (vocab < 2) fail("vocab must be >= 2");
  for (double x : {initial_entropy, final_entropy, decay_rate, initial_margin, final_margin,
                   noise_scale, saturation_p, saturated_entropy, saturated_margin}) {
    if (!std::isfinite(x)) fail("all rates and levels must be finite");
  }
  if (initial_entropy < 0 || final_entropy < 0 || saturated_entropy < 0) fail("entropies must be >= 0");
  if (initial_margin < 0 || final_margin < 0 || saturated_margin < 0) fail("margins must be >= 0");
  if (decay_rate < 0) fail("decay_rate must be >= 0");
  if (noise_scale < 0) fail("noise_scale must be >= 0");
  if (onset < 0) fail("onset must be >= 0");
  if (saturation_period < 1 || saturation_run < 0 || saturation_run > saturation_period) {
    fail("need 0 <= saturation_run <= saturation_period, period >= 1");
  }
  if (!(saturation_p > 0.0 && saturation_p <= 1.0)) fail("saturation_p must lie in (0, 1]");
  if (dt_seconds && (!std::isfinite(*dt_seconds) || *dt_seconds < 0)) fail("dt must be >= 0");
}

Trace synthesize(const SynthSpec& spec) {
  spec.validate();
  Trace trace = blank_trace(spec, TraceKind::Signal);

  const double log_v = std::log(static_cast<double>(spec.vocab));
  const double h0 = std::min(spec.initial_entropy, log_v);
  const double h_inf = std::min(spec.final_entropy, h0);
  const double h_sat = std::min(spec.saturated_entropy, log_v);

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> jitter(0.0, 1.0);

  trace.signals.reserve(static_cast<std::size_t>(spec.steps));
  for (std::int64_t t = 1; t <= spec.steps; ++t) {
    const double decay = std::exp(-spec.decay_rate * static_cast<double>(t - 1));
    double h = h_inf + (h0 - h_inf) * decay;
    double m = spec.final_margin - (spec.final_margin - spec.initial_margin) * decay;
    double p_max = 0.0;
    switch (spec.kind) {
      case Regime::Plateau:
        h = h0;
        m = spec.initial_margin;
        break;
      case Regime::Noisy: {
        const bool early = t <= spec.onset;
        h = (early ? h0 : h_inf) + spec.noise_scale * jitter(rng);
        m = (early ? spec.initial_margin : spec.final_margin) + spec.noise_scale * jitter(rng);
        break;
      }
      case Regime::Converging:
      case Regime::Saturating:
        break;
    }
    if (saturated_step(spec, t)) {
      h = h_sat;
      m = spec.saturated_margin;
      p_max = spec.saturation_p;
    }
    h = std::clamp(h, 0.0, log_v);
    m = std::max(m, 0.0);
    if (p_max == 0.0) p_max = std::min(std::exp(-h), kUnsaturatedPeakCap);

    StepSignals s;
    s.t = t;
    s.H = h;
    s.M = m;
    s.p_max = p_max;
    s.dt = spec.dt_seconds;
    trace.signals.push_back(s);
  }
  return trace;
}

Trace synthesize_logits(const SynthSpec& spec) {
  spec.validate();
  Trace trace = blank_trace(spec, TraceKind::FullLogit);

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Vector<double> profile(spec.vocab);
  for (Eigen::Index v = 0; v < profile.size(); ++v) profile[v] = gauss(rng);
  Eigen::Index top = 0;
  profile.maxCoeff(&top);

  trace.logits.resize(spec.steps, spec.vocab);
  trace.token_ids.reserve(static_cast<std::size_t>(spec.steps));
  for (std::int64_t t = 1; t <= spec.steps; ++t) {
    const double decay = std::exp(-spec.decay_rate * static_cast<double>(t - 1));
    double beta = kHotBeta - (kHotBeta - kColdBeta) * decay;
    if (spec.kind == Regime::Plateau) beta = kColdBeta;
    if (spec.kind == Regime::Noisy) beta = t <= spec.onset ? kColdBeta : kHotBeta;

    Vector<double> row = beta * profile;
    for (Eigen::Index v = 0; v < row.size(); ++v) row[v] += spec.noise_scale * gauss(rng);
    if (saturated_step(spec, t)) row[top] += kSaturationBoost;

    Eigen::Index argmax = 0;
    row.maxCoeff(&argmax);
    trace.token_ids.push_back(static_cast<std::int64_t>(argmax));

    auto out = trace.logits.row(t - 1);
    out = row.cast<float>().transpose();
    for (Eigen::Index v = 0; v < out.size(); ++v) {
      if (unit(rng) >= kCorruptionRate) continue;
      switch (static_cast<int>(unit(rng) * 4.0)) {
        case 0: out[v] = std::numeric_limits<float>::quiet_NaN(); break;
        case 1: out[v] = std::numeric_limits<float>::infinity(); break;
        case 2: out[v] = -std::numeric_limits<float>::infinity(); break;
        default: out[v] = -1.0e4f; break;
      }
    }
  }
  if (spec.dt_seconds) trace.dt_seconds.assign(static_cast<std::size_t>(spec.steps), *spec.dt_seconds);
  return trace;
}

}  // namespace leash
