// Command-line front end: replay traces through the stopper, generate
// synthetic traces, aggregate efficiency metrics.

#include <iostream>

#include "CLI11.hpp"
#include "leash/errors.hpp"
#include "leash/harness.hpp"
#include "leash/synth.hpp"

namespace {

using leash::kExitOk;
using leash::kExitPartialFailure;
using leash::kExitUsage;

void print_summary(const leash::ReplayReport& report) {
  const auto& agg = report.aggregate;
  std::cout << "traces: " << agg.traces << " (failed " << agg.failed << ")\n";
  if (agg.mean_token_reduction_pct) {
    std::cout << "mean token reduction: " << *agg.mean_token_reduction_pct << "%\n";
  }
  if (agg.mean_latency_reduction_pct) {
    std::cout << "mean latency reduction (counterfactual): " << *agg.mean_latency_reduction_pct
              << "%\n";
  }
  for (const auto& [reason, n] : agg.halt_reasons) std::cout << reason << ": " << n << '\n';
  for (const auto& row : report.rows) {
    if (!row.ok()) std::cerr << "error: " << row.trace_id << ": " << *row.error << '\n';
  }
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive chain-of-thought stopping: replay, synth, analyze"};
  app.require_subcommand(1);

  // replay
  auto* replay = app.add_subcommand("replay", "Replay traces through the stopping rule");
  std::vector<std::string> replay_inputs;
  std::string config_path;
  std::string replay_out;
  bool force_vanilla = false;
  unsigned jobs = 0;
  replay->add_option("traces", replay_inputs, "Trace files (.lsh or .sig.jsonl)")->required();
  replay->add_option("--config", config_path, "key = value stopper config");
  replay->add_option("--out", replay_out, "Report JSON path")->required();
  replay->add_flag("--vanilla", force_vanilla, "Disable plateau voting (run to M)");
  replay->add_option("--jobs", jobs, "Worker threads (0 = hardware concurrency)");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic trace");
  leash::SynthSpec spec;
  std::string kind = "converging";
  std::string format = "signal";
  std::string synth_out;
  double dt = -1.0;
  synth->add_option("--kind", kind, "converging | plateau | noisy | saturating");
  synth->add_option("--steps", spec.steps, "Number of steps")->required();
  synth->add_option("--vocab", spec.vocab, "Vocabulary size")->required();
  synth->add_option("--seed", spec.seed, "RNG seed");
  synth->add_option("--out", synth_out, "Output path")->required();
  synth->add_option("--format", format, "signal | logits");
  synth->add_option("--h0", spec.initial_entropy, "Initial entropy (nats)");
  synth->add_option("--h-final", spec.final_entropy, "Asymptotic entropy (nats)");
  synth->add_option("--rate", spec.decay_rate, "Per-step decay rate");
  synth->add_option("--m0", spec.initial_margin, "Initial margin");
  synth->add_option("--m-final", spec.final_margin, "Asymptotic margin");
  synth->add_option("--onset", spec.onset, "Noisy regime: steps before the entropy drop");
  synth->add_option("--noise", spec.noise_scale, "Gaussian jitter scale");
  synth->add_option("--sat-run", spec.saturation_run, "Saturated run length");
  synth->add_option("--sat-period", spec.saturation_period, "Saturation period");
  synth->add_option("--sat-p", spec.saturation_p, "p_max of saturated steps");
  synth->add_option("--dt", dt, "Fabricated per-step wall clock (seconds)");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Aggregate reports or traces");
  std::vector<std::string> analyze_inputs;
  std::int64_t baseline_m = 320;
  std::string analyze_out;
  analyze->add_option("inputs", analyze_inputs, "Replay reports or trace files");
  analyze->add_option("--baseline-M", baseline_m, "Baseline rationale length M");
  analyze->add_option("--out", analyze_out, "Aggregate report JSON path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*replay) {
      leash::StopConfig cfg = config_path.empty() ? leash::StopConfig{} : leash::load_config(config_path);
      if (force_vanilla) cfg.vanilla = true;
      std::vector<std::filesystem::path> paths(replay_inputs.begin(), replay_inputs.end());
      const auto report = leash::replay(paths, cfg, jobs);
      leash::write_report(report, replay_out);
      print_summary(report);
      return report.exit_status();
    }
    if (*synth) {
      const auto regime = leash::parse_regime(kind);
      if (!regime) throw leash::ConfigError("unknown --kind '" + kind + "'");
      spec.kind = *regime;
      if (dt >= 0.0) spec.dt_seconds = dt;
      leash::Trace trace;
      if (format == "signal") trace = leash::synthesize(spec);
      else if (format == "logits") trace = leash::synthesize_logits(spec);
      else throw leash::ConfigError("unknown --format '" + format + "'");
      const std::size_t bytes = leash::write_trace(trace, std::filesystem::path(synth_out));
      std::cout << synth_out << ": " << leash::to_string(trace.meta.kind) << " trace, "
                << trace.step_count() << " steps, V = " << trace.meta.vocab_size << ", regime "
                << kind << ", seed " << spec.seed << ", " << bytes << " bytes\n";
      return kExitOk;
    }
    if (*analyze) {
      std::vector<std::filesystem::path> paths(analyze_inputs.begin(), analyze_inputs.end());
      const auto report = leash::analyze(paths, baseline_m);
      leash::write_report(report, analyze_out);
      print_summary(report);
      return report.exit_status();
    }
  } catch (const leash::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitPartialFailure;
  }
  return kExitUsage;
}
