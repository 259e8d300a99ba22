#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

namespace leash {

/// Hyperparameters of the stopping rule plus the logit clip band.
struct StopConfig {
  std::int64_t k = 8;           // trend window
  std::int64_t L = 5;           // vote span
  double epsilon_H = 0.005;     // entropy slope slack
  double delta_M = 0.05;        // margin improvement slack
  std::int64_t m = 64;          // minimum rationale length
  std::int64_t M = 320;         // maximum rationale length
  std::int64_t w = 8;           // warmup
  double tau_p = 0.99;          // saturation threshold on p_max
  double gamma = 0.1;           // entropy-drop gate, nats
  double B = 80.0;              // logit clip band
  bool vanilla = false;         // disable plateau voting, always run to M

  /// First step at which a plateau halt may fire: max(m + w, k + L).
  std::int64_t t_min() const { return std::max(m + w, k + L); }

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;

  bool operator==(const StopConfig&) const = default;
};

/// Parses the flat `key = value` config format. Keys are the StopConfig field
/// names; omitted keys keep their defaults, unknown keys are rejected, `#`
/// starts a comment.
StopConfig parse_config(const std::string& text);
StopConfig load_config(const std::string& path);
std::string format_config(const StopConfig& cfg);

}  // namespace leash
