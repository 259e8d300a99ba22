#include "leash/trace.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "leash/synth.hpp"

namespace leash {
namespace {

Trace two_step_logits() {
  Trace trace;
  trace.meta.kind = TraceKind::FullLogit;
  trace.meta.vocab_size = 2;
  trace.meta.model_id = "m";
  trace.meta.prompt_id = "p";
  trace.logits.resize(2, 2);
  trace.logits << 1.5f, -0.25f, std::numeric_limits<float>::quiet_NaN(), 1e9f;
  return trace;
}

std::string bytes_of(const Trace& trace) {
  std::ostringstream out;
  write_trace(trace, out);
  return out.str();
}

Trace parse(const std::string& bytes) {
  std::istringstream in(bytes);
  return read_trace(in);
}

TraceError::Code error_code(const std::string& bytes) {
  try {
    parse(bytes);
  } catch (const TraceError& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a TraceError";
  return TraceError::Code::Io;
}

TEST(FullLogit, LayoutAndSize) {
  const Trace trace = two_step_logits();
  const std::string bytes = bytes_of(trace);
  ASSERT_GE(bytes.size(), 18u);
  EXPECT_EQ(bytes.substr(0, 4), "LSH1");
  // format_version u16, V u32, steps u32, metadata length u32, little-endian.
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[6], 2);
  EXPECT_EQ(bytes[10], 2);
  const auto meta_len = static_cast<unsigned char>(bytes[14]) |
                        static_cast<unsigned char>(bytes[15]) << 8;
  EXPECT_EQ(bytes.size(), 18u + meta_len + 16u);
  // First payload float: 1.5f = 0x3FC00000 little-endian.
  const std::string first = bytes.substr(18 + meta_len, 4);
  EXPECT_EQ(first, std::string("\x00\x00\xC0\x3F", 4));
}

TEST(FullLogit, RoundTripIsBitExact) {
  Trace trace = two_step_logits();
  trace.token_ids = {7, 3};
  trace.dt_seconds = {0.01, 0.02};
  trace.meta.answer_tokens = 4;
  trace.meta.extra["note"] = "kept";
  EXPECT_EQ(parse(bytes_of(trace)), trace);
}

TEST(FullLogit, TruncatedPayload) {
  std::string bytes = bytes_of(two_step_logits());
  bytes.resize(bytes.size() - 4);
  try {
    parse(bytes);
    FAIL();
  } catch (const TraceError& e) {
    EXPECT_EQ(e.code(), TraceError::Code::Truncated);
    EXPECT_NE(std::string(e.what()).find("expected 16 bytes, got 12"), std::string::npos);
  }
}

TEST(FullLogit, DistinctDiagnostics) {
  const std::string good = bytes_of(two_step_logits());
  std::string bad_magic = good;
  bad_magic[3] = '2';
  EXPECT_EQ(error_code(bad_magic), TraceError::Code::BadMagic);
  EXPECT_EQ(error_code("XYZ"), TraceError::Code::BadMagic);
  EXPECT_EQ(error_code(good + "abcd"), TraceError::Code::TrailingData);
  std::string wrong_v = good;
  wrong_v[6] = 3;  // header V disagrees with metadata vocab_size
  EXPECT_EQ(error_code(wrong_v), TraceError::Code::VocabMismatch);
  EXPECT_EQ(error_code(good.substr(0, 10)), TraceError::Code::Truncated);
}

TEST(FullLogit, WriterRejectsRowWidthMismatch) {
  Trace trace = two_step_logits();
  trace.meta.vocab_size = 3;
  std::ostringstream out;
  EXPECT_THROW(write_trace(trace, out), TraceError);
}

Trace three_step_signals() {
  SynthSpec spec;
  spec.steps = 3;
  spec.vocab = 50;
  spec.seed = 1;
  spec.dt_seconds = 0.02;
  Trace trace = synthesize(spec);
  trace.signals[1].token_id = 42;
  return trace;
}

TEST(Signal, OneHeaderPlusOneLinePerStep) {
  const std::string text = bytes_of(three_step_signals());
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
  std::istringstream lines(text);
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  EXPECT_EQ(Json::parse(header).at("kind"), "signal");
  const Json rec = Json::parse(first);
  std::vector<std::string> keys;
  for (const auto& [k, v] : rec.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"t", "H", "M", "p_max", "dt_seconds"}));
}

TEST(Signal, RoundTrip) {
  const Trace trace = three_step_signals();
  EXPECT_EQ(parse(bytes_of(trace)), trace);
}

TEST(Signal, ValidationErrorNamesLine) {
  std::string text = bytes_of(three_step_signals());
  const Json header = Json::parse(text.substr(0, text.find('\n')));
  std::string bad = header.dump() + "\n" + R"({"t":1,"H":1.0,"M":0.1,"p_max":0.3})" + "\n" +
                    R"({"t":2,"H":-0.5,"M":0.1,"p_max":0.3})" + "\n";
  try {
    parse(bad);
    FAIL();
  } catch (const TraceError& e) {
    EXPECT_EQ(e.code(), TraceError::Code::Validation);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Signal, NonContiguousAndUnknownKeys) {
  const std::string header =
      R"({"format_version":1,"kind":"signal","vocab_size":10,"model_id":"","prompt_id":""})";
  EXPECT_EQ(error_code(header + "\n" + R"({"t":2,"H":1.0,"M":0.1,"p_max":0.3})" + "\n"),
            TraceError::Code::NonContiguous);
  EXPECT_EQ(error_code(header + "\n" + R"({"t":1,"H":1.0,"M":0.1,"p_max":0.3,"x":1})" + "\n"),
            TraceError::Code::Malformed);
  EXPECT_EQ(error_code(header + "\n{not json\n"), TraceError::Code::Malformed);
  EXPECT_EQ(error_code(R"({"format_version":1,"kind":"signal","vocab_size":1})" "\n"),
            TraceError::Code::VocabMismatch);
  EXPECT_EQ(error_code(R"({"format_version":1,"kind":"full-logit","vocab_size":4})" "\n"),
            TraceError::Code::Malformed);
}

TEST(Signal, ToSignalTraceCarriesTimings) {
  SynthSpec spec;
  spec.steps = 12;
  spec.vocab = 16;
  spec.dt_seconds = 0.5;
  const Trace full = synthesize_logits(spec);
  const Trace sig = to_signal_trace(full, StopConfig{});
  ASSERT_EQ(sig.step_count(), 12);
  for (std::size_t i = 0; i < sig.signals.size(); ++i) {
    EXPECT_EQ(sig.signals[i].t, static_cast<std::int64_t>(i) + 1);
    EXPECT_EQ(sig.signals[i].dt, 0.5);
    EXPECT_EQ(sig.signals[i].token_id, full.token_ids[i]);
  }
  EXPECT_EQ(parse(bytes_of(sig)), sig);
}

}  // namespace
}  // namespace leash
