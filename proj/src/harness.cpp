#include "leash/harness.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "leash/errors.hpp"

namespace leash {

namespace {

template <typename T>
Json optional_json(const std::optional<T>& value) {
  return value ? Json(*value) : Json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

HaltReason parse_reason(const std::string& s) {
  if (s == "PlateauVote") return HaltReason::PlateauVote;
  if (s == "MaxLengthCap") return HaltReason::MaxLengthCap;
  return HaltReason::None;
}

Json row_to_json(const TraceOutcome& r) {
  Json j;
  j["trace_id"] = r.trace_id;
  j["path"] = r.path;
  j["status"] = r.ok() ? "ok" : "error";
  if (!r.ok()) {
    j["error"] = *r.error;
    return j;
  }
  j["decision"] = std::string(to_string(r.decision.kind));
  j["reason"] = std::string(to_string(r.decision.reason));
  j["tau"] = r.decision.tau;
  j["M"] = r.max_length;
  j["vocab_size"] = r.vocab_size;
  j["answer_tokens"] = r.answer_tokens;
  j["baseline_tokens"] = r.baseline_tokens;
  j["leash_tokens"] = r.leash_tokens;
  j["token_reduction_pct"] = r.token_reduction_pct;
  j["latency_leash"] = optional_json(r.latency_leash);
  j["latency_baseline"] = optional_json(r.latency_baseline);
  j["latency_reduction_pct"] = optional_json(r.latency_reduction_pct);
  return j;
}

TraceOutcome row_from_json(const Json& j) {
  TraceOutcome r;
  r.trace_id = j.at("trace_id").get<std::string>();
  r.path = j.value("path", std::string());
  if (j.value("status", std::string("ok")) != "ok") {
    r.error = j.value("error", std::string("unknown error"));
    return r;
  }
  r.decision = Decision::halt(j.at("tau").get<std::int64_t>(),
                              parse_reason(j.at("reason").get<std::string>()));
  r.max_length = j.at("M").get<std::int64_t>();
  r.vocab_size = j.value("vocab_size", std::int64_t{0});
  r.answer_tokens = j.value("answer_tokens", std::int64_t{0});
  r.baseline_tokens = j.at("baseline_tokens").get<std::int64_t>();
  r.leash_tokens = j.at("leash_tokens").get<std::int64_t>();
  r.token_reduction_pct = j.at("token_reduction_pct").get<double>();
  r.latency_leash = optional_from<double>(j, "latency_leash");
  r.latency_baseline = optional_from<double>(j, "latency_baseline");
  r.latency_reduction_pct = optional_from<double>(j, "latency_reduction_pct");
  return r;
}

void sort_rows(std::vector<TraceOutcome>& rows) {
  std::sort(rows.begin(), rows.end(), [](const TraceOutcome& a, const TraceOutcome& b) {
    return std::tie(a.trace_id, a.path) < std::tie(b.trace_id, b.path);
  });
}

void warn_mixed_vocab(ReplayReport& report) {
  std::set<std::int64_t> sizes;
  for (const auto& r : report.rows) {
    if (r.ok() && r.vocab_size > 0) sizes.insert(r.vocab_size);
  }
  if (sizes.size() > 1) {
    std::ostringstream os;
    os << "mixed vocabulary sizes:";
    for (auto v : sizes) os << ' ' << v;
    report.warnings.push_back(os.str());
  }
}

std::vector<double> step_timings(const Trace& trace) {
  if (trace.meta.kind == TraceKind::FullLogit) return trace.dt_seconds;
  std::vector<double> dt;
  dt.reserve(trace.signals.size());
  for (const auto& s : trace.signals) {
    if (!s.dt) break;
    dt.push_back(*s.dt);
  }
  return dt;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError(TraceError::Code::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Json config_to_json(const StopConfig& cfg) {
  Json j;
  j["k"] = cfg.k;
  j["L"] = cfg.L;
  j["epsilon_H"] = cfg.epsilon_H;
  j["delta_M"] = cfg.delta_M;
  j["m"] = cfg.m;
  j["M"] = cfg.M;
  j["w"] = cfg.w;
  j["tau_p"] = cfg.tau_p;
  j["gamma"] = cfg.gamma;
  j["B"] = cfg.B;
  j["vanilla"] = cfg.vanilla;
  return j;
}

double token_reduction_pct(std::int64_t leash_tokens, std::int64_t baseline_tokens) {
  if (baseline_tokens <= 0) throw std::invalid_argument("baseline token count must be positive");
  return 100.0 * (1.0 - static_cast<double>(leash_tokens) / static_cast<double>(baseline_tokens));
}

std::optional<double> latency_reduction_pct(std::span<const double> dt, std::int64_t tau,
                                            std::int64_t max_length) {
  if (tau < 0 || max_length < 1 || tau > max_length ||
      dt.size() < static_cast<std::size_t>(max_length)) {
    return std::nullopt;
  }
  const double leash = std::accumulate(dt.begin(), dt.begin() + tau, 0.0);
  const double baseline = std::accumulate(dt.begin(), dt.begin() + max_length, 0.0);
  if (!(baseline > 0.0)) return std::nullopt;
  return 100.0 * (1.0 - leash / baseline);
}

void score(TraceOutcome& row, std::int64_t tau, std::int64_t max_length,
           std::int64_t answer_tokens, std::span<const double> dt) {
  row.max_length = max_length;
  row.answer_tokens = answer_tokens;
  row.baseline_tokens = max_length + answer_tokens;
  row.leash_tokens = tau + answer_tokens;
  row.token_reduction_pct = token_reduction_pct(row.leash_tokens, row.baseline_tokens);
  row.latency_leash.reset();
  row.latency_baseline.reset();
  row.latency_reduction_pct = latency_reduction_pct(dt, tau, max_length);
  if (row.latency_reduction_pct) {
    row.latency_leash = std::accumulate(dt.begin(), dt.begin() + tau, 0.0);
    row.latency_baseline = std::accumulate(dt.begin(), dt.begin() + max_length, 0.0);
  }
}

Aggregate aggregate(std::span<const TraceOutcome> rows) {
  Aggregate agg;
  agg.traces = static_cast<std::int64_t>(rows.size());
  double token_sum = 0.0;
  double latency_sum = 0.0;
  std::int64_t ok = 0;
  std::int64_t timed = 0;
  for (const auto& r : rows) {
    if (!r.ok()) {
      ++agg.failed;
      continue;
    }
    ++ok;
    token_sum += r.token_reduction_pct;
    if (r.latency_reduction_pct) {
      ++timed;
      latency_sum += *r.latency_reduction_pct;
    }
    ++agg.halt_reasons[std::string(to_string(r.decision.reason))];
  }
  if (ok > 0) agg.mean_token_reduction_pct = token_sum / static_cast<double>(ok);
  if (timed > 0) agg.mean_latency_reduction_pct = latency_sum / static_cast<double>(timed);
  return agg;
}

Decision run_stopper(std::span<const StepSignals> signals, const StopConfig& cfg) {
  Stopper stopper(cfg);
  for (const StepSignals& s : signals) {
    if (stopper.feed(s).halted()) return stopper.decision();
  }
  throw ProtocolError("trace ended at step " + std::to_string(stopper.step()) +
                      " before a stopping decision (M = " + std::to_string(cfg.M) + ")");
}

TraceOutcome replay_trace(const Trace& trace, const StopConfig& cfg, std::string trace_id) {
  TraceOutcome row;
  row.trace_id = std::move(trace_id);
  row.vocab_size = trace.meta.vocab_size;
  const std::vector<StepSignals> signals = step_signals(trace, cfg);
  row.decision = run_stopper(signals, cfg);
  const std::vector<double> dt = step_timings(trace);
  score(row, row.decision.tau, cfg.M, trace.meta.answer_tokens.value_or(0), dt);
  return row;
}

ReplayReport replay(const std::vector<std::filesystem::path>& paths, const StopConfig& cfg,
                    unsigned workers) {
  cfg.validate();
  ReplayReport report;
  report.config = cfg;
  report.rows.resize(paths.size());
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, std::max<std::size_t>(paths.size(), 1));

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < paths.size(); i = next++) {
      TraceOutcome& row = report.rows[i];
      try {
        row = replay_trace(read_trace(paths[i], cfg), cfg, paths[i].filename().string());
      } catch (const std::exception& e) {
        row = TraceOutcome{};
        row.trace_id = paths[i].filename().string();
        row.error = e.what();
      }
      row.path = paths[i].string();
    }
  };
  std::vector<std::jthread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  pool.clear();

  sort_rows(report.rows);
  report.aggregate = aggregate(report.rows);
  warn_mixed_vocab(report);
  return report;
}

ReplayReport analyze(const std::vector<std::filesystem::path>& inputs, std::int64_t max_length) {
  if (inputs.empty()) throw ConfigError("analyze needs at least one input");
  if (max_length < 1) throw ConfigError("baseline M must be >= 1");
  ReplayReport report;
  report.config.M = max_length;
  for (const auto& path : inputs) {
    try {
      const std::string bytes = read_file(path);
      Json j;
      bool is_report = false;
      if (!bytes.empty() && bytes.front() == '{') {
        j = Json::parse(bytes, nullptr, false);
        is_report = !j.is_discarded() && j.is_object() && j.contains("report_version");
      }
      if (is_report) {
        const ReplayReport input = ReplayReport::from_json(j);
        for (TraceOutcome row : input.rows) {
          if (row.ok()) {
            // Timings cannot be re-windowed without the trace; keep them only
            // when the baseline horizon is unchanged.
            const bool same_horizon = row.max_length == max_length;
            const auto leash = row.latency_leash;
            const auto baseline = row.latency_baseline;
            const auto reduction = row.latency_reduction_pct;
            if (row.decision.tau > max_length) {
              throw ConfigError(row.trace_id + ": tau exceeds baseline M");
            }
            score(row, row.decision.tau, max_length, row.answer_tokens, {});
            if (same_horizon) {
              row.latency_leash = leash;
              row.latency_baseline = baseline;
              row.latency_reduction_pct = reduction;
            }
          }
          report.rows.push_back(std::move(row));
        }
        continue;
      }
      std::istringstream in(bytes);
      const Trace trace = read_trace(in);
      TraceOutcome row;
      row.trace_id = path.filename().string();
      row.path = path.string();
      row.vocab_size = trace.meta.vocab_size;
      const std::int64_t tau = std::min(trace.meta.tau.value_or(trace.step_count()), max_length);
      const auto recorded = trace.meta.extra.find("reason");
      HaltReason reason = tau < max_length ? HaltReason::PlateauVote : HaltReason::MaxLengthCap;
      if (recorded != trace.meta.extra.end() && recorded->is_string()) {
        reason = parse_reason(recorded->get<std::string>());
      }
      row.decision = Decision::halt(tau, reason);
      score(row, tau, max_length, trace.meta.answer_tokens.value_or(0), step_timings(trace));
      report.rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      TraceOutcome row;
      row.trace_id = path.filename().string();
      row.path = path.string();
      row.error = e.what();
      report.rows.push_back(std::move(row));
    }
  }
  sort_rows(report.rows);
  report.aggregate = aggregate(report.rows);
  warn_mixed_vocab(report);
  for (const auto& r : report.rows) {
    if (r.ok() && !r.latency_reduction_pct) {
      report.warnings.push_back(r.trace_id + ": no per-step timings, latency omitted");
    }
  }
  return report;
}

Json ReplayReport::to_json() const {
  Json j;
  j["report_version"] = kReportVersion;
  j["latency_kind"] = "counterfactual-replay";
  j["config"] = config_to_json(config);
  Json traces = Json::array();
  for (const auto& r : rows) traces.push_back(row_to_json(r));
  j["traces"] = std::move(traces);
  Json agg;
  agg["traces"] = aggregate.traces;
  agg["succeeded"] = aggregate.traces - aggregate.failed;
  agg["failed"] = aggregate.failed;
  agg["mean_token_reduction_pct"] = optional_json(aggregate.mean_token_reduction_pct);
  agg["mean_latency_reduction_pct"] = optional_json(aggregate.mean_latency_reduction_pct);
  agg["halt_reasons"] = Json::object();
  for (const auto& [reason, n] : aggregate.halt_reasons) agg["halt_reasons"][reason] = n;
  j["aggregate"] = std::move(agg);
  j["warnings"] = warnings;
  return j;
}

ReplayReport ReplayReport::from_json(const Json& j) {
  if (j.at("report_version").get<int>() != kReportVersion) {
    throw std::runtime_error("unsupported report_version");
  }
  ReplayReport report;
  if (j.contains("config")) {
    const Json& c = j.at("config");
    report.config.k = c.value("k", report.config.k);
    report.config.L = c.value("L", report.config.L);
    report.config.epsilon_H = c.value("epsilon_H", report.config.epsilon_H);
    report.config.delta_M = c.value("delta_M", report.config.delta_M);
    report.config.m = c.value("m", report.config.m);
    report.config.M = c.value("M", report.config.M);
    report.config.w = c.value("w", report.config.w);
    report.config.tau_p = c.value("tau_p", report.config.tau_p);
    report.config.gamma = c.value("gamma", report.config.gamma);
    report.config.B = c.value("B", report.config.B);
    report.config.vanilla = c.value("vanilla", report.config.vanilla);
  }
  for (const Json& row : j.at("traces")) report.rows.push_back(row_from_json(row));
  report.aggregate = leash::aggregate(report.rows);
  if (j.contains("warnings")) report.warnings = j.at("warnings").get<std::vector<std::string>>();
  return report;
}

int ReplayReport::exit_status() const {
  return aggregate.failed == 0 ? kExitOk : kExitPartialFailure;
}

void write_report(const ReplayReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << report.to_json().dump(2) << '\n';
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

}  // namespace leash
