#include "support/oracle.hpp"

#include <algorithm>
#include <stdexcept>

namespace leash::testing {

namespace {

double reference_entropy(const std::vector<StepSignals>& trace, std::int64_t k) {
  std::vector<double> first;
  for (std::int64_t j = 1; j <= k; ++j) first.push_back(trace[j - 1].H);
  std::sort(first.begin(), first.end());
  const std::size_t n = first.size();
  return n % 2 == 1 ? first[n / 2] : (first[n / 2 - 1] + first[n / 2]) / 2.0;
}

bool plateau(const std::vector<StepSignals>& trace, std::int64_t j, const StopConfig& cfg) {
  const StepSignals& now = trace[j - 1];
  const StepSignals& then = trace[j - 1 - cfg.k];
  const double slope = (now.H - then.H) / static_cast<double>(cfg.k);
  const double improvement = now.M - then.M;
  const bool saturated = now.p_max >= cfg.tau_p;
  return slope >= -cfg.epsilon_H && improvement <= cfg.delta_M && !saturated;
}

}  // namespace

Decision oracle_stop(const std::vector<StepSignals>& trace, const StopConfig& cfg) {
  const std::int64_t t_min = std::max(cfg.m + cfg.w, cfg.k + cfg.L);
  for (std::int64_t t = 1; t <= cfg.M; ++t) {
    if (t > static_cast<std::int64_t>(trace.size())) {
      throw std::runtime_error("oracle: trace shorter than the decision horizon");
    }
    if (!cfg.vanilla && t >= t_min) {
      // J_L(t): the last L non-saturated steps at or before t with a trend.
      std::vector<std::int64_t> window;
      for (std::int64_t j = t; j > cfg.k && static_cast<std::int64_t>(window.size()) < cfg.L; --j) {
        if (trace[j - 1].p_max < cfg.tau_p) window.push_back(j);
      }
      if (static_cast<std::int64_t>(window.size()) == cfg.L) {
        std::int64_t votes = 0;
        for (std::int64_t j : window) votes += plateau(trace, j, cfg) ? 1 : 0;
        const std::int64_t needed = (cfg.L + 1) / 2;
        const bool gate = reference_entropy(trace, cfg.k) - trace[t - 1].H >= cfg.gamma;
        if (votes >= needed && gate) return Decision::halt(t, HaltReason::PlateauVote);
      }
    }
  }
  return Decision::halt(cfg.M, HaltReason::MaxLengthCap);
}

}  // namespace leash::testing
