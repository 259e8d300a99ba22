#include "leash/trace.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "leash/errors.hpp"

namespace leash {

namespace {

using Code = TraceError::Code;

constexpr std::size_t kFixedHeaderBytes = 4 + 2 + 4 + 4 + 4;

const char* kind_tag(TraceKind kind) {
  return kind == TraceKind::FullLogit ? "full-logit" : "signal";
}

// Little-endian scalar I/O, independent of host byte order.
template <typename U>
void put_le(std::string& buf, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    buf.push_back(static_cast<char>((value >> (8 * i)) & 0xFFu));
  }
}

template <typename U>
U get_le(const std::string& buf, std::size_t offset) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(static_cast<unsigned char>(buf[offset + i])) << (8 * i);
  }
  return value;
}

Json meta_to_json(const Trace& trace) {
  const TraceMeta& m = trace.meta;
  Json j;
  j["format_version"] = m.format_version;
  j["kind"] = kind_tag(m.kind);
  j["vocab_size"] = m.vocab_size;
  j["model_id"] = m.model_id;
  j["prompt_id"] = m.prompt_id;
  j["config_snapshot"] = m.config_snapshot;
  if (m.answer_tokens) j["answer_tokens"] = *m.answer_tokens;
  if (m.tau) j["tau"] = *m.tau;
  j["synthetic"] = m.synthetic;
  j["dt_fabricated"] = m.dt_fabricated;
  if (m.kind == TraceKind::FullLogit) {
    if (!trace.token_ids.empty()) j["token_ids"] = trace.token_ids;
    if (!trace.dt_seconds.empty()) j["dt_seconds"] = trace.dt_seconds;
  }
  for (const auto& [key, value] : m.extra.items()) {
    if (!j.contains(key)) j[key] = value;
  }
  return j;
}

template <typename T>
T field(const Json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw TraceError(Code::Malformed, where + ": metadata field '" + key + "': " + e.what());
  }
}

void meta_from_json(const Json& j, Trace& trace, const std::string& where) {
  if (!j.is_object()) throw TraceError(Code::Malformed, where + ": metadata is not an object");
  TraceMeta& m = trace.meta;
  m.format_version = field<std::uint16_t>(j, "format_version", where);
  if (m.format_version != kTraceFormatVersion) {
    throw TraceError(Code::Malformed,
                     where + ": unsupported format_version " + std::to_string(m.format_version));
  }
  const auto kind = field<std::string>(j, "kind", where);
  if (kind != kind_tag(m.kind)) {
    throw TraceError(Code::Malformed, where + ": metadata kind '" + kind +
                                          "' does not match the file layout");
  }
  m.vocab_size = field<std::int64_t>(j, "vocab_size", where);
  if (j.contains("model_id")) m.model_id = field<std::string>(j, "model_id", where);
  if (j.contains("prompt_id")) m.prompt_id = field<std::string>(j, "prompt_id", where);
  if (j.contains("config_snapshot")) m.config_snapshot = j.at("config_snapshot");
  if (j.contains("answer_tokens")) m.answer_tokens = field<std::int64_t>(j, "answer_tokens", where);
  if (j.contains("tau")) m.tau = field<std::int64_t>(j, "tau", where);
  if (j.contains("synthetic")) m.synthetic = field<bool>(j, "synthetic", where);
  if (j.contains("dt_fabricated")) m.dt_fabricated = field<bool>(j, "dt_fabricated", where);
  if (m.kind == TraceKind::FullLogit) {
    if (j.contains("token_ids")) trace.token_ids = field<std::vector<std::int64_t>>(j, "token_ids", where);
    if (j.contains("dt_seconds")) trace.dt_seconds = field<std::vector<double>>(j, "dt_seconds", where);
  }
  static const char* known[] = {"format_version", "kind",      "vocab_size",    "model_id",
                                "prompt_id",      "config_snapshot", "answer_tokens", "tau",
                                "synthetic",      "dt_fabricated",   "token_ids",     "dt_seconds"};
  m.extra = Json::object();
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) m.extra[key] = value;
  }
}

void check_invariants(const Trace& trace) {
  const auto n = static_cast<std::size_t>(trace.step_count());
  if (trace.meta.vocab_size < 2) {
    throw TraceError(Code::VocabMismatch, "vocab_size must be >= 2");
  }
  if (trace.meta.kind == TraceKind::FullLogit) {
    if (trace.logits.rows() > 0 && trace.logits.cols() != trace.meta.vocab_size) {
      throw TraceError(Code::VocabMismatch,
                       "logit rows have " + std::to_string(trace.logits.cols()) +
                           " entries, vocab_size is " + std::to_string(trace.meta.vocab_size));
    }
    if (!trace.token_ids.empty() && trace.token_ids.size() != n) {
      throw TraceError(Code::Malformed, "token_ids length does not match step count");
    }
    if (!trace.dt_seconds.empty() && trace.dt_seconds.size() != n) {
      throw TraceError(Code::Malformed, "dt_seconds length does not match step count");
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (trace.signals[i].t != static_cast<std::int64_t>(i) + 1) {
        throw TraceError(Code::NonContiguous, "step " + std::to_string(i + 1) + " has t = " +
                                                  std::to_string(trace.signals[i].t));
      }
    }
  }
}

std::string encode_full_logit(const Trace& trace) {
  const std::string meta = meta_to_json(trace).dump();
  std::string buf(kTraceMagic, sizeof kTraceMagic);
  put_le<std::uint16_t>(buf, trace.meta.format_version);
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(trace.meta.vocab_size));
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(trace.logits.rows()));
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(meta.size()));
  buf += meta;
  buf.reserve(buf.size() + static_cast<std::size_t>(trace.logits.size()) * 4);
  for (Eigen::Index i = 0; i < trace.logits.size(); ++i) {
    put_le<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(trace.logits.data()[i]));
  }
  return buf;
}

Json signal_record(const StepSignals& s) {
  Json j;
  j["t"] = s.t;
  j["H"] = s.H;
  j["M"] = s.M;
  j["p_max"] = s.p_max;
  if (s.token_id) j["token_id"] = *s.token_id;
  if (s.dt) j["dt_seconds"] = *s.dt;
  return j;
}

std::string encode_signal(const Trace& trace) {
  std::string out = meta_to_json(trace).dump();
  out.push_back('\n');
  for (const StepSignals& s : trace.signals) {
    out += signal_record(s).dump();
    out.push_back('\n');
  }
  return out;
}

Trace decode_full_logit(const std::string& buf) {
  if (buf.size() < kFixedHeaderBytes) {
    throw TraceError(Code::Truncated, "header truncated: expected at least " +
                                          std::to_string(kFixedHeaderBytes) + " bytes, got " +
                                          std::to_string(buf.size()));
  }
  if (std::memcmp(buf.data(), kTraceMagic, sizeof kTraceMagic) != 0) {
    throw TraceError(Code::BadMagic, "bad magic bytes, expected LSH1");
  }
  Trace trace;
  trace.meta.kind = TraceKind::FullLogit;
  const auto version = get_le<std::uint16_t>(buf, 4);
  const auto vocab = get_le<std::uint32_t>(buf, 6);
  const auto steps = get_le<std::uint32_t>(buf, 10);
  const auto meta_len = get_le<std::uint32_t>(buf, 14);
  if (version != kTraceFormatVersion) {
    throw TraceError(Code::Malformed, "unsupported format_version " + std::to_string(version));
  }
  if (buf.size() < kFixedHeaderBytes + meta_len) {
    throw TraceError(Code::Truncated, "metadata truncated: expected " + std::to_string(meta_len) +
                                          " bytes, got " +
                                          std::to_string(buf.size() - kFixedHeaderBytes));
  }
  Json meta;
  try {
    meta = Json::parse(buf.begin() + kFixedHeaderBytes,
                       buf.begin() + static_cast<std::ptrdiff_t>(kFixedHeaderBytes + meta_len));
  } catch (const Json::exception& e) {
    throw TraceError(Code::Malformed, std::string("metadata is not valid JSON: ") + e.what());
  }
  meta_from_json(meta, trace, "header");
  if (trace.meta.vocab_size != static_cast<std::int64_t>(vocab)) {
    throw TraceError(Code::VocabMismatch, "header V = " + std::to_string(vocab) +
                                              " but metadata vocab_size = " +
                                              std::to_string(trace.meta.vocab_size));
  }
  const std::size_t offset = kFixedHeaderBytes + meta_len;
  const std::size_t expected = static_cast<std::size_t>(steps) * vocab * 4;
  const std::size_t actual = buf.size() - offset;
  if (actual < expected) {
    throw TraceError(Code::Truncated, "payload truncated: expected " + std::to_string(expected) +
                                          " bytes, got " + std::to_string(actual));
  }
  if (actual > expected) {
    throw TraceError(Code::TrailingData, "payload has " + std::to_string(actual - expected) +
                                             " trailing bytes beyond the expected " +
                                             std::to_string(expected));
  }
  trace.logits.resize(steps, vocab);
  for (Eigen::Index i = 0; i < trace.logits.size(); ++i) {
    trace.logits.data()[i] =
        std::bit_cast<float>(get_le<std::uint32_t>(buf, offset + static_cast<std::size_t>(i) * 4));
  }
  check_invariants(trace);
  return trace;
}

Trace decode_signal(std::istream& in, const StopConfig& cfg) {
  Trace trace;
  trace.meta.kind = TraceKind::Signal;
  std::string line;
  std::int64_t line_no = 0;
  bool have_header = false;
  static const char* allowed[] = {"t", "H", "M", "p_max", "token_id", "dt_seconds"};
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = "line " + std::to_string(line_no);
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw TraceError(Code::Malformed, where + ": invalid JSON: " + e.what());
    }
    if (!have_header) {
      meta_from_json(j, trace, where);
      if (trace.meta.vocab_size < 2) {
        throw TraceError(Code::VocabMismatch, where + ": vocab_size must be >= 2");
      }
      have_header = true;
      continue;
    }
    if (!j.is_object()) throw TraceError(Code::Malformed, where + ": step record is not an object");
    for (const auto& [key, value] : j.items()) {
      if (std::find(std::begin(allowed), std::end(allowed), key) == std::end(allowed)) {
        throw TraceError(Code::Malformed, where + ": unexpected key '" + key + "'");
      }
    }
    StepSignals s;
    s.t = field<std::int64_t>(j, "t", where);
    s.H = field<double>(j, "H", where);
    s.M = field<double>(j, "M", where);
    s.p_max = field<double>(j, "p_max", where);
    if (j.contains("token_id")) s.token_id = field<std::int64_t>(j, "token_id", where);
    if (j.contains("dt_seconds")) s.dt = field<double>(j, "dt_seconds", where);
    const auto expected_t = static_cast<std::int64_t>(trace.signals.size()) + 1;
    if (s.t != expected_t) {
      throw TraceError(Code::NonContiguous, where + ": expected t = " +
                                                std::to_string(expected_t) + ", got " +
                                                std::to_string(s.t));
    }
    try {
      trace.signals.push_back(validate(s, trace.meta.vocab_size, cfg));
    } catch (const MalformedInput& e) {
      throw TraceError(Code::Validation, where + ": " + e.what());
    }
  }
  if (!have_header) throw TraceError(Code::Malformed, "signal trace has no header line");
  return trace;
}

}  // namespace

std::int64_t Trace::step_count() const {
  return meta.kind == TraceKind::FullLogit ? static_cast<std::int64_t>(logits.rows())
                                           : static_cast<std::int64_t>(signals.size());
}

bool Trace::operator==(const Trace& other) const {
  if (!(meta == other.meta) || token_ids != other.token_ids || signals != other.signals) return false;
  if (logits.rows() != other.logits.rows() || logits.cols() != other.logits.cols()) return false;
  // Bitwise, so NaN payloads compare equal to themselves.
  if (logits.size() > 0 &&
      std::memcmp(logits.data(), other.logits.data(), sizeof(float) * logits.size()) != 0) {
    return false;
  }
  if (dt_seconds.size() != other.dt_seconds.size()) return false;
  return dt_seconds.empty() || std::memcmp(dt_seconds.data(), other.dt_seconds.data(),
                                           sizeof(double) * dt_seconds.size()) == 0;
}

std::string_view to_string(TraceKind kind) { return kind_tag(kind); }

std::size_t write_trace(const Trace& trace, std::ostream& out) {
  check_invariants(trace);
  const std::string bytes =
      trace.meta.kind == TraceKind::FullLogit ? encode_full_logit(trace) : encode_signal(trace);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw TraceError(Code::Io, "write failed");
  return bytes.size();
}

std::size_t write_trace(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TraceError(Code::Io, "cannot open " + path.string() + " for writing");
  const std::size_t n = write_trace(trace, out);
  out.close();
  if (!out) throw TraceError(Code::Io, "write to " + path.string() + " failed");
  return n;
}

Trace read_trace(std::istream& in, const StopConfig& cfg) {
  const int first = in.peek();
  if (first == std::char_traits<char>::eof()) throw TraceError(Code::Malformed, "empty trace");
  if (first == '{') return decode_signal(in, cfg);
  if (first != kTraceMagic[0]) throw TraceError(Code::BadMagic, "bad magic bytes, expected LSH1 or '{'");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_full_logit(buf);
}

Trace read_trace(const std::filesystem::path& path, const StopConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError(Code::Io, "cannot open " + path.string());
  return read_trace(in, cfg);
}

std::vector<StepSignals> step_signals(const Trace& trace, const StopConfig& cfg) {
  std::vector<StepSignals> out;
  out.reserve(static_cast<std::size_t>(trace.step_count()));
  if (trace.meta.kind == TraceKind::Signal) {
    for (const StepSignals& s : trace.signals) out.push_back(validate(s, trace.meta.vocab_size, cfg));
    return out;
  }
  for (Eigen::Index i = 0; i < trace.logits.rows(); ++i) {
    StepSignals s = extract(trace.logits.row(i).transpose(), i + 1, cfg);
    const auto u = static_cast<std::size_t>(i);
    if (!trace.token_ids.empty()) s.token_id = trace.token_ids[u];
    if (!trace.dt_seconds.empty()) s.dt = trace.dt_seconds[u];
    out.push_back(s);
  }
  return out;
}

Trace to_signal_trace(const Trace& full, const StopConfig& cfg) {
  Trace out;
  out.meta = full.meta;
  out.meta.kind = TraceKind::Signal;
  out.signals = step_signals(full, cfg);
  return out;
}

}  // namespace leash
