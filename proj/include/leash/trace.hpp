#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "leash/config.hpp"
#include "leash/signals.hpp"

namespace leash {

using Json = nlohmann::ordered_json;

/// Row-per-step raw logits, stored before sanitization.
using LogitMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class TraceKind { FullLogit, Signal };

inline constexpr std::uint16_t kTraceFormatVersion = 1;
inline constexpr char kTraceMagic[4] = {'L', 'S', 'H', '1'};

struct TraceMeta {
  std::uint16_t format_version = kTraceFormatVersion;
  std::int64_t vocab_size = 0;
  std::string model_id;
  std::string prompt_id;
  Json config_snapshot = Json::object();
  TraceKind kind = TraceKind::Signal;
  std::optional<std::int64_t> answer_tokens;
  std::optional<std::int64_t> tau;  // stopping step recorded by a live run
  bool synthetic = false;
  bool dt_fabricated = false;
  Json extra = Json::object();  // unrecognized metadata, carried through

  bool operator==(const TraceMeta&) const = default;
};

/// A decoded rationale: either full logits per step or precomputed signals.
///
/// Full-logit traces keep per-step token ids and wall-clock deltas in the
/// metadata (`token_ids`, `dt_seconds`); each vector is empty or has one
/// entry per step.
struct Trace {
  TraceMeta meta;
  LogitMatrix logits;
  std::vector<std::int64_t> token_ids;
  std::vector<double> dt_seconds;
  std::vector<StepSignals> signals;

  std::int64_t step_count() const;
  bool operator==(const Trace&) const;
};

class TraceError : public std::runtime_error {
 public:
  enum class Code {
    Io,
    BadMagic,
    Truncated,
    TrailingData,
    VocabMismatch,
    NonContiguous,
    Validation,
    Malformed,
  };

  TraceError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

std::string_view to_string(TraceKind kind);

/// Serializes `trace`. Full-logit traces use the `LSH1` binary layout,
/// signal traces one JSON object per line. Returns bytes written.
std::size_t write_trace(const Trace& trace, std::ostream& out);
std::size_t write_trace(const Trace& trace, const std::filesystem::path& path);

/// Parses either format, dispatching on the first byte. Signal records are
/// validated against the header's vocabulary size; `cfg.tau_p` sets their
/// saturation flag.
Trace read_trace(std::istream& in, const StopConfig& cfg = {});
Trace read_trace(const std::filesystem::path& path, const StopConfig& cfg = {});

/// Per-step signals for replay: extracted from logits, or revalidated
/// under `cfg` for signal traces.
std::vector<StepSignals> step_signals(const Trace& trace, const StopConfig& cfg);

/// Signal trace carrying the same metadata, token ids and timings.
Trace to_signal_trace(const Trace& full, const StopConfig& cfg);

}  // namespace leash
