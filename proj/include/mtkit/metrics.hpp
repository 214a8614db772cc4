#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mtkit/utf8.hpp"

namespace mtkit::metrics {

// --- ChrF ----------------------------------------------------------------

struct ChrFConfig {
  size_t max_order = 6;
  double beta = 2.0;
  bool strip_whitespace = true;
};

// Character n-gram F-beta in [0, 100]. Per-order clipped precision and
// recall, arithmetic mean across orders 1..max_order; orders with no
// reference n-grams are excluded. 0 when P + R == 0.
inline double chrf(std::string_view hypothesis, std::string_view reference,
                   const ChrFConfig& cfg = {}) {
  if (cfg.max_order < 1) throw std::invalid_argument("chrf: max_order < 1");
  if (cfg.beta <= 0) throw std::invalid_argument("chrf: beta <= 0");
  auto hyp_u = utf8::decode(hypothesis);
  auto ref_u = utf8::decode(reference);
  if (!hyp_u || !ref_u) throw std::invalid_argument("chrf: malformed UTF-8");

  auto prep = [&](std::u32string s) {
    if (cfg.strip_whitespace) {
      std::u32string out;
      for (char32_t c : s)
        if (c != U' ' && c != U'\t' && c != U'\n' && c != U'\r') out.push_back(c);
      return out;
    }
    return s;
  };
  std::u32string hyp = prep(std::move(*hyp_u));
  std::u32string ref = prep(std::move(*ref_u));
  if (ref.empty()) throw std::invalid_argument("chrf: empty reference");

  double prec_sum = 0.0, rec_sum = 0.0;
  size_t orders_used = 0;
  for (size_t n = 1; n <= cfg.max_order; ++n) {
    if (ref.size() < n) break;  // no reference n-grams of this order
    std::map<std::u32string, size_t> ref_counts;
    for (size_t i = 0; i + n <= ref.size(); ++i)
      ++ref_counts[ref.substr(i, n)];

    size_t hyp_total = hyp.size() >= n ? hyp.size() - n + 1 : 0;
    size_t ref_total = ref.size() - n + 1;
    size_t matches = 0;
    std::map<std::u32string, size_t> used;
    for (size_t i = 0; i + n <= hyp.size(); ++i) {
      auto gram = hyp.substr(i, n);
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end() && used[gram] < it->second) {
        ++used[gram];
        ++matches;
      }
    }
    prec_sum += hyp_total ? static_cast<double>(matches) / hyp_total : 0.0;
    rec_sum += static_cast<double>(matches) / ref_total;
    ++orders_used;
  }
  if (orders_used == 0) return 0.0;
  double p = prec_sum / orders_used;
  double r = rec_sum / orders_used;
  if (p + r == 0.0) return 0.0;
  double b2 = cfg.beta * cfg.beta;
  return 100.0 * (1.0 + b2) * p * r / (b2 * p + r);
}

// --- MQM span scoring ----------------------------------------------------

enum class Severity { kMinor, kMajor, kNonTranslation };

inline std::string severity_name(Severity s) {
  switch (s) {
    case Severity::kMinor: return "minor";
    case Severity::kMajor: return "major";
    case Severity::kNonTranslation: return "non_translation";
  }
  throw std::invalid_argument("severity_name: bad value");
}

inline Severity severity_from_name(std::string_view s) {
  if (s == "minor") return Severity::kMinor;
  if (s == "major") return Severity::kMajor;
  if (s == "non_translation" || s == "non-translation")
    return Severity::kNonTranslation;
  throw std::invalid_argument("unknown severity: " + std::string(s));
}

struct SpanAnnotation {
  size_t start = 0;  // char offset, inclusive
  size_t end = 0;    // exclusive
  Severity severity = Severity::kMinor;
  std::string category;  // e.g. "fluency/punctuation"
  std::string source_judge;
};

struct MqmWeightTable {
  double non_translation = 25.0;
  double major = 5.0;
  double minor = 1.0;
  double minor_fluency_punctuation = 0.1;

  void validate() const {
    if (!(non_translation >= major && major >= minor &&
          minor >= minor_fluency_punctuation && minor_fluency_punctuation >= 0))
      throw std::invalid_argument("mqm weights: ordering violated");
  }
};

inline double span_weight(const SpanAnnotation& s, const MqmWeightTable& w) {
  switch (s.severity) {
    case Severity::kNonTranslation:
      return w.non_translation;
    case Severity::kMajor:
      return w.major;
    case Severity::kMinor:
      return s.category == "fluency/punctuation" ? w.minor_fluency_punctuation
                                                 : w.minor;
  }
  throw std::invalid_argument("span_weight: bad severity");
}

// Weighted error count, 0 best. A non-translation span caps the segment
// at the non-translation weight and suppresses all other spans.
inline double mqm_score(const std::vector<SpanAnnotation>& spans,
                        const MqmWeightTable& weights = {}) {
  weights.validate();
  for (const auto& s : spans)
    if (s.severity == Severity::kNonTranslation) return weights.non_translation;
  double total = 0.0;
  for (const auto& s : spans) total += span_weight(s, weights);
  return total;
}

// --- Reward rescaling ----------------------------------------------------

enum class RescaleKind { kMetricXQe, kChrF, kIdentity };

// metricx_qe: s -> 5.0 - s (raw 0 best / 25 worst becomes higher-better).
// chrf: s -> 2 * s, putting ChrF on roughly the same scale.
inline double rescale(double score, RescaleKind kind) {
  switch (kind) {
    case RescaleKind::kMetricXQe: return 5.0 - score;
    case RescaleKind::kChrF: return 2.0 * score;
    case RescaleKind::kIdentity: return score;
  }
  throw std::invalid_argument("rescale: bad kind");
}

inline RescaleKind rescale_kind_from_name(std::string_view s) {
  if (s == "metricx_qe") return RescaleKind::kMetricXQe;
  if (s == "chrf") return RescaleKind::kChrF;
  if (s == "identity") return RescaleKind::kIdentity;
  throw std::invalid_argument("unknown rescale kind: " + std::string(s));
}

}  // namespace mtkit::metrics
