#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>

#include "leash/config.hpp"
#include "leash/numerics.hpp"

namespace leash {

/// Per-step convergence signals; the stopper's only input.
struct StepSignals {
  std::int64_t t = 0;  // 1-based
  double H = 0.0;      // entropy, nats
  double M = 0.0;      // top-two log-probability margin
  double p_max = 1.0;
  bool saturated = false;
  std::optional<std::int64_t> token_id;
  std::optional<double> dt;  // wall-clock seconds for this step

  bool operator==(const StepSignals&) const = default;
};

/// Sanitize, normalize and score one raw logit vector. Kernels run in double
/// regardless of the input scalar.
template <typename Derived>
StepSignals extract(const Eigen::MatrixBase<Derived>& raw, std::int64_t t,
                    const StopConfig& cfg) {
  if (t < 1) throw ProtocolError("step index must be >= 1");
  const Vector<double> z = sanitize(raw, cfg.B);
  const ProbView<double> p = probabilities(z);
  StepSignals s;
  s.t = t;
  s.H = entropy(p);
  s.M = margin(p);
  s.p_max = peak_probability(p);
  s.saturated = s.p_max >= cfg.tau_p;
  return s;
}

/// Checks a precomputed record against its vocabulary size and recomputes
/// the saturation flag from p_max. Throws MalformedInput on a bound violation.
StepSignals validate(StepSignals signals, std::int64_t vocab_size,
                     const StopConfig& cfg);

}  // namespace leash
