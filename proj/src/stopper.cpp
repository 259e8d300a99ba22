#include "leash/stopper.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "leash/errors.hpp"

namespace leash {

void StopConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid config: " + what); };
  if (k < 1) fail("k must be >= 1");
  if (L < 1) fail("L must be >= 1");
  if (!(epsilon_H > 0.0) || !std::isfinite(epsilon_H)) fail("epsilon_H must be > 0");
  if (!(delta_M > 0.0) || !std::isfinite(delta_M)) fail("delta_M must be > 0");
  if (m < 0) fail("m must be >= 0");
  if (M < 1) fail("M must be >= 1");
  if (w < 0) fail("w must be >= 0");
  if (!(tau_p > 0.0 && tau_p <= 1.0)) fail("tau_p must lie in (0, 1]");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) fail("gamma must be >= 0");
  if (!(B > 0.0) || !std::isfinite(B)) fail("B must be > 0");
  if (m + w > M) fail("m + w must not exceed M");
  if (k + L > M) fail("k + L must not exceed M");
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_value(const std::string& key, const std::string& text, int line) {
  std::istringstream is(text);
  T value{};
  is >> value;
  if (is.fail() || !is.eof()) {
    throw ConfigError("config line " + std::to_string(line) + ": bad value '" + text +
                      "' for " + key);
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text, int line) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config line " + std::to_string(line) + ": bad boolean '" + text +
                    "' for " + key);
}

}  // namespace

StopConfig parse_config(const std::string& text) {
  StopConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string body = trim(raw);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line) + ": expected key = value");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    using I = std::int64_t;
    if (key == "k") cfg.k = parse_value<I>(key, value, line);
    else if (key == "L") cfg.L = parse_value<I>(key, value, line);
    else if (key == "epsilon_H") cfg.epsilon_H = parse_value<double>(key, value, line);
    else if (key == "delta_M") cfg.delta_M = parse_value<double>(key, value, line);
    else if (key == "m") cfg.m = parse_value<I>(key, value, line);
    else if (key == "M") cfg.M = parse_value<I>(key, value, line);
    else if (key == "w") cfg.w = parse_value<I>(key, value, line);
    else if (key == "tau_p") cfg.tau_p = parse_value<double>(key, value, line);
    else if (key == "gamma") cfg.gamma = parse_value<double>(key, value, line);
    else if (key == "B") cfg.B = parse_value<double>(key, value, line);
    else if (key == "vanilla") cfg.vanilla = parse_bool(key, value, line);
    else throw ConfigError("config line " + std::to_string(line) + ": unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

StopConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string format_config(const StopConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "k = " << cfg.k << "\nL = " << cfg.L << "\nepsilon_H = " << cfg.epsilon_H
     << "\ndelta_M = " << cfg.delta_M << "\nm = " << cfg.m << "\nM = " << cfg.M
     << "\nw = " << cfg.w << "\ntau_p = " << cfg.tau_p << "\ngamma = " << cfg.gamma
     << "\nB = " << cfg.B << "\nvanilla = " << (cfg.vanilla ? "true" : "false") << "\n";
  return os.str();
}

std::string_view to_string(HaltReason reason) {
  switch (reason) {
    case HaltReason::PlateauVote: return "PlateauVote";
    case HaltReason::MaxLengthCap: return "MaxLengthCap";
    case HaltReason::None: break;
  }
  return "None";
}

std::string_view to_string(DecisionKind kind) {
  return kind == DecisionKind::Halt ? "Halt" : "Continue";
}

bool plateau_test(double entropy_slope, double margin_improvement, bool saturated,
                  const StopConfig& cfg) {
  return entropy_slope >= -cfg.epsilon_H && margin_improvement <= cfg.delta_M && !saturated;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

namespace {

StopConfig checked(const StopConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

Stopper::Stopper(const StopConfig& cfg)
    : cfg_(checked(cfg)),
      entropies_(static_cast<std::size_t>(cfg.k) + 1),
      margins_(static_cast<std::size_t>(cfg.k) + 1),
      ledger_(static_cast<std::size_t>(cfg.L)) {}

bool Stopper::trends_ready() const { return entropies_.full(); }

double Stopper::entropy_slope() const {
  if (!trends_ready()) throw ProtocolError("entropy slope needs k+1 recorded steps");
  return (entropies_.back() - entropies_[0]) / static_cast<double>(cfg_.k);
}

double Stopper::margin_improvement() const {
  if (!trends_ready()) throw ProtocolError("margin improvement needs k+1 recorded steps");
  return margins_.back() - margins_[0];
}

std::vector<Vote> Stopper::votes() const {
  std::vector<Vote> out;
  out.reserve(ledger_.size());
  for (std::size_t i = 0; i < ledger_.size(); ++i) out.push_back(ledger_[i]);
  return out;
}

std::size_t Stopper::state_bytes() const {
  return sizeof(*this) + entropies_.heap_bytes() + margins_.heap_bytes() + ledger_.heap_bytes();
}

Decision Stopper::feed(const StepSignals& s) {
  if (decision_.halted()) {
    throw ProtocolError("feed after halt at step " + std::to_string(decision_.tau));
  }
  if (s.t != t_ + 1) {
    throw ProtocolError("out-of-order step: expected t = " + std::to_string(t_ + 1) +
                        ", got " + std::to_string(s.t));
  }
  t_ = s.t;
  entropies_.push(s.H);
  margins_.push(s.M);

  if (t_ == cfg_.k) {
    std::vector<double> first(static_cast<std::size_t>(cfg_.k));
    for (std::size_t i = 0; i < first.size(); ++i) first[i] = entropies_[i];
    h_ref_ = median(std::move(first));
  }

  if (!s.saturated && trends_ready()) {
    const bool passed = plateau_test(entropy_slope(), margin_improvement(), false, cfg_);
    if (ledger_.full() && ledger_[0].passed) --passed_;
    ledger_.push(Vote{t_, passed});
    if (passed) ++passed_;
  }

  if (!cfg_.vanilla && t_ >= cfg_.t_min() && ledger_.full()) {
    const std::int64_t needed = (cfg_.L + 1) / 2;
    if (passed_ >= needed && *h_ref_ - s.H >= cfg_.gamma) {
      decision_ = Decision::halt(t_, HaltReason::PlateauVote);
      return decision_;
    }
  }
  if (t_ == cfg_.M) decision_ = Decision::halt(cfg_.M, HaltReason::MaxLengthCap);
  return decision_;
}

}  // namespace leash
