#pragma once

#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mtkit/hash.hpp"
#include "mtkit/metrics.hpp"
#include "mtkit/utf8.hpp"

namespace mtkit::backend {

struct GreedyDecode {};
struct SampleDecode {
  double temperature = 1.0;
};
using DecodeMode = std::variant<GreedyDecode, SampleDecode>;

struct GenRequest {
  std::string prompt;
  DecodeMode decode = GreedyDecode{};
  size_t num_samples = 1;
  size_t max_tokens = 1024;
  std::string request_id;

  void validate() const {
    if (num_samples < 1)
      throw std::invalid_argument("generate: num_samples must be >= 1");
    if (max_tokens < 1)
      throw std::invalid_argument("generate: max_tokens must be >= 1");
    if (std::holds_alternative<GreedyDecode>(decode) && num_samples != 1)
      throw std::invalid_argument("generate: greedy implies num_samples == 1");
    if (auto* s = std::get_if<SampleDecode>(&decode); s && s->temperature <= 0)
      throw std::invalid_argument("generate: temperature must be > 0");
  }
};

// One slot per requested sample: either a completion or an error message.
struct SampleResult {
  std::optional<std::string> text;
  std::string error;  // set when text is absent
  bool ok() const { return text.has_value(); }
};

struct ScoreRequest {
  std::string source;
  std::string hypothesis;
  std::optional<std::string> reference;  // absent = QE mode
  std::string scorer_id;
};

struct SpanJudgement {
  std::vector<metrics::SpanAnnotation> spans;
  std::string scorer_id;
  std::vector<std::string> warnings;  // clamp notices etc.
};

class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& msg, std::string request_id = {})
      : std::runtime_error(msg), request_id(std::move(request_id)) {}
  std::string request_id;
};

class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Backend {
 public:
  virtual ~Backend() = default;
  // Exactly num_samples slots, order as produced by the backend.
  virtual std::vector<SampleResult> generate(const GenRequest& req) = 0;
  virtual double score(const ScoreRequest& req) = 0;
  virtual SpanJudgement judge_spans(const ScoreRequest& req) = 0;
};

// Clamp spans to the hypothesis length; drop empty ones. Shared by the
// HTTP client and the mock path so both enforce the same bounds.
inline SpanJudgement validate_spans(SpanJudgement j, const std::string& hypothesis) {
  size_t len = utf8::scalar_count(hypothesis).value_or(hypothesis.size());
  SpanJudgement out;
  out.scorer_id = j.scorer_id;
  out.warnings = std::move(j.warnings);
  for (auto& s : j.spans) {
    if (s.start >= len) {
      out.warnings.push_back("span beyond hypothesis dropped");
      continue;
    }
    if (s.end > len) {
      out.warnings.push_back("span clamped to hypothesis end");
      s.end = len;
    }
    if (s.start < s.end) out.spans.push_back(std::move(s));
  }
  return out;
}

// --- Deterministic mock backend ------------------------------------------
//
// Pure function of (request, seed). Used for offline runs and as the
// behavior behind `mock-serve`.
class MockBackend : public Backend {
 public:
  explicit MockBackend(uint64_t seed = 0) : seed_(seed) {}

  // Test hook: force the judge's spans for a given hypothesis.
  void plant_spans(const std::string& hypothesis,
                   std::vector<metrics::SpanAnnotation> spans) {
    planted_[hypothesis] = std::move(spans);
  }

  std::vector<SampleResult> generate(const GenRequest& req) override {
    req.validate();
    std::vector<SampleResult> out;
    const bool greedy = std::holds_alternative<GreedyDecode>(req.decode);
    for (size_t i = 0; i < req.num_samples; ++i) {
      // greedy uses a fixed stream id so it differs from sampled index 0
      uint64_t stream = greedy ? UINT64_MAX : i;
      out.push_back({pseudo_translation(req.prompt, stream, req.max_tokens), {}});
    }
    return out;
  }

  double score(const ScoreRequest& req) override {
    if (req.scorer_id.empty()) throw ConfigError("score: empty scorer_id");
    if (req.hypothesis.empty()) return 25.0;  // worst
    if (req.reference && req.hypothesis == *req.reference) return 0.0;  // best
    uint64_t h = hash_mix(fnv1a64(req.source),
                          hash_mix(fnv1a64(req.hypothesis),
                                   hash_mix(fnv1a64(req.scorer_id), seed_)));
    return 25.0 * SplitMix64(h).unit();
  }

  SpanJudgement judge_spans(const ScoreRequest& req) override {
    if (req.scorer_id.empty()) throw ConfigError("judge: empty scorer_id");
    SpanJudgement j;
    j.scorer_id = req.scorer_id;
    if (auto it = planted_.find(req.hypothesis); it != planted_.end()) {
      j.spans = it->second;
      return validate_spans(std::move(j), req.hypothesis);
    }
    size_t len = utf8::scalar_count(req.hypothesis).value_or(0);
    if (len == 0) return j;
    // ~1 in 3 hypotheses get one deterministic minor span
    SplitMix64 rng(hash_mix(fnv1a64(req.hypothesis), hash_mix(seed_, 0x5a)));
    if (rng.below(3) == 0) {
      size_t start = static_cast<size_t>(rng.below(len));
      size_t end = std::min<size_t>(len, start + 1 + rng.below(4));
      j.spans.push_back({start, end, metrics::Severity::kMinor, "fluency/grammar",
                         req.scorer_id});
    }
    return validate_spans(std::move(j), req.hypothesis);
  }

  // Deterministic pseudo-translation of the prompt payload (the text after
  // the final triple-newline separator, or the whole prompt if none).
  std::string pseudo_translation(const std::string& prompt, uint64_t stream,
                                 size_t max_tokens) const {
    std::string_view payload = prompt;
    if (auto pos = prompt.rfind("\n\n\n"); pos != std::string::npos)
      payload = std::string_view(prompt).substr(pos + 3);
    SplitMix64 rng(hash_mix(fnv1a64(payload), hash_mix(seed_, stream)));
    static constexpr const char* kSyllables[] = {"ka", "to", "mi", "ren", "ba",
                                                 "lu", "so", "ne", "vi", "da",
                                                 "ri", "po", "ze", "ma", "ul"};
    // one pseudo-word per whitespace-delimited source word
    size_t words = 1;
    for (char c : payload)
      if (c == ' ' || c == '\n' || c == '\t') ++words;
    words = std::min(words, max_tokens);
    std::ostringstream os;
    for (size_t w = 0; w < words; ++w) {
      if (w) os << ' ';
      size_t sylls = 1 + rng.below(3);
      for (size_t s = 0; s < sylls; ++s)
        os << kSyllables[rng.below(std::size(kSyllables))];
    }
    return os.str();
  }

 private:
  uint64_t seed_;
  std::map<std::string, std::vector<metrics::SpanAnnotation>> planted_;
};

}  // namespace mtkit::backend
