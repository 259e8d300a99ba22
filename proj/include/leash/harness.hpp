#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leash/stopper.hpp"
#include "leash/trace.hpp"

namespace leash {

inline constexpr int kReportVersion = 1;

/// Process exit statuses shared by every subcommand.
enum ExitStatus : int { kExitOk = 0, kExitPartialFailure = 1, kExitUsage = 2 };

/// One replayed (or analyzed) trace against the run-to-M baseline.
struct TraceOutcome {
  std::string trace_id;
  std::string path;
  std::optional<std::string> error;

  Decision decision;
  std::int64_t max_length = 0;  // M of the baseline
  std::int64_t vocab_size = 0;
  std::int64_t answer_tokens = 0;
  std::int64_t baseline_tokens = 0;
  std::int64_t leash_tokens = 0;
  double token_reduction_pct = 0.0;
  std::optional<double> latency_leash;
  std::optional<double> latency_baseline;
  std::optional<double> latency_reduction_pct;

  bool ok() const { return !error.has_value(); }
};

struct Aggregate {
  std::int64_t traces = 0;
  std::int64_t failed = 0;
  std::optional<double> mean_token_reduction_pct;
  std::optional<double> mean_latency_reduction_pct;
  std::map<std::string, std::int64_t> halt_reasons;
};

struct ReplayReport {
  StopConfig config;
  std::vector<TraceOutcome> rows;  // sorted by trace_id
  Aggregate aggregate;
  std::vector<std::string> warnings;

  Json to_json() const;
  static ReplayReport from_json(const Json& j);
  int exit_status() const;
};

Json config_to_json(const StopConfig& cfg);

/// 100 * (1 - leash / baseline).
double token_reduction_pct(std::int64_t leash_tokens, std::int64_t baseline_tokens);

/// 100 * (1 - sum(dt[0..tau)) / sum(dt[0..M))). Empty when fewer than M
/// timings exist or the baseline time is zero.
std::optional<double> latency_reduction_pct(std::span<const double> dt, std::int64_t tau,
                                            std::int64_t max_length);

/// Fills the token and latency columns of a row from tau, M, answer tokens
/// and per-step timings.
void score(TraceOutcome& row, std::int64_t tau, std::int64_t max_length,
           std::int64_t answer_tokens, std::span<const double> dt);

/// Mean-of-ratios aggregation over successful rows plus a halt-reason
/// histogram. Rows without latency are skipped for the latency mean.
Aggregate aggregate(std::span<const TraceOutcome> rows);

/// Feeds signals into a fresh stopper until it halts. Throws ProtocolError
/// when the signals run out before a decision.
Decision run_stopper(std::span<const StepSignals> signals, const StopConfig& cfg);

TraceOutcome replay_trace(const Trace& trace, const StopConfig& cfg, std::string trace_id);

/// Reads and replays each path on a worker pool. Unreadable or corrupt traces
/// become error rows.
ReplayReport replay(const std::vector<std::filesystem::path>& paths, const StopConfig& cfg,
                    unsigned workers = 0);

/// Aggregates replay reports and/or traces against a baseline of M steps.
/// Trace inputs take tau from their metadata (or their length). Throws
/// ConfigError when `inputs` is empty.
ReplayReport analyze(const std::vector<std::filesystem::path>& inputs, std::int64_t max_length);

void write_report(const ReplayReport& report, const std::filesystem::path& path);

}  // namespace leash
