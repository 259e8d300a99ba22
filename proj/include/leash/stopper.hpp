#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "leash/config.hpp"
#include "leash/ring_buffer.hpp"
#include "leash/signals.hpp"

namespace leash {

enum class DecisionKind { Continue, Halt };
enum class HaltReason { None, PlateauVote, MaxLengthCap };

struct Decision {
  DecisionKind kind = DecisionKind::Continue;
  std::int64_t tau = 0;
  HaltReason reason = HaltReason::None;

  static Decision proceed() { return {}; }
  static Decision halt(std::int64_t tau, HaltReason reason) {
    return {DecisionKind::Halt, tau, reason};
  }
  bool halted() const { return kind == DecisionKind::Halt; }
  bool operator==(const Decision&) const = default;
};

std::string_view to_string(HaltReason reason);
std::string_view to_string(DecisionKind kind);

/// One plateau vote cast by a non-saturated step.
struct Vote {
  std::int64_t t = 0;
  bool passed = false;
};

/// Pi_t: entropy slope has flattened, margin improvement has stalled, and the
/// step is not saturated.
bool plateau_test(double entropy_slope, double margin_improvement, bool saturated,
                  const StopConfig& cfg);

/// Streaming stopping rule for one generation stream.
///
/// Keeps the last k+1 entropies and margins, the reference entropy (median of
/// the first k entropies) and the last L votes of non-saturated steps whose
/// trends were computable. State size does not grow with the step count.
/// Trends difference raw step indices, so a saturated step still occupies its
/// slot in the history buffers; it just never votes.
///
/// Not safe to share between threads mid-stream; may be handed off at step
/// boundaries.
class Stopper {
 public:
  explicit Stopper(const StopConfig& cfg);

  /// Consumes step t = step() + 1. Throws ProtocolError on an out-of-order
  /// step or when called after a halt.
  Decision feed(const StepSignals& signals);

  const Decision& decision() const { return decision_; }
  const StopConfig& config() const { return cfg_; }
  std::int64_t step() const { return t_; }
  std::optional<double> reference_entropy() const { return h_ref_; }

  /// True once k+1 values are buffered.
  bool trends_ready() const;
  /// (H_t - H_{t-k}) / k. Throws ProtocolError before trends_ready().
  double entropy_slope() const;
  /// M_t - M_{t-k}. Throws ProtocolError before trends_ready().
  double margin_improvement() const;

  /// Retained votes, oldest first. At most L entries.
  std::vector<Vote> votes() const;
  std::int64_t passed_votes() const { return passed_; }

  /// Bytes owned by this instance, heap included.
  std::size_t state_bytes() const;

 private:
  StopConfig cfg_;
  std::int64_t t_ = 0;
  RingBuffer<double> entropies_;
  RingBuffer<double> margins_;
  RingBuffer<Vote> ledger_;
  std::int64_t passed_ = 0;
  std::optional<double> h_ref_;
  Decision decision_;
};

/// Median of the values; even counts average the two middle order statistics.
double median(std::vector<double> values);

}  // namespace leash
