#include "leash/signals.hpp"

#include <cmath>
#include <sstream>

namespace leash {

namespace {

constexpr double kEntropySlack = 1e-6;

[[noreturn]] void reject(const StepSignals& s, const std::string& what) {
  std::ostringstream os;
  os << "step " << s.t << ": " << what;
  throw MalformedInput(os.str());
}

}  // namespace

StepSignals validate(StepSignals s, std::int64_t vocab_size, const StopConfig& cfg) {
  if (vocab_size < 2) reject(s, "vocabulary size must be >= 2");
  if (s.t < 1) reject(s, "step index must be >= 1");
  const double h_max = std::log(static_cast<double>(vocab_size));
  if (!std::isfinite(s.H) || s.H < -kEntropySlack || s.H > h_max + kEntropySlack) {
    std::ostringstream os;
    os << "entropy " << s.H << " outside [0, log V = " << h_max << "]";
    reject(s, os.str());
  }
  if (!std::isfinite(s.M) || s.M < 0.0) reject(s, "margin must be finite and >= 0");
  if (!std::isfinite(s.p_max) || !(s.p_max > 0.0) || s.p_max > 1.0) {
    reject(s, "p_max must lie in (0, 1]");
  }
  if (s.dt && (!std::isfinite(*s.dt) || *s.dt < 0.0)) {
    reject(s, "dt_seconds must be finite and >= 0");
  }
  s.saturated = s.p_max >= cfg.tau_p;
  return s;
}

}  // namespace leash
