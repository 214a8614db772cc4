#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtkit/metrics.hpp"
#include "mtkit/tokenizer.hpp"

namespace mtkit::rewards {

using metrics::MqmWeightTable;
using metrics::SpanAnnotation;

struct TokenAlignment {
  std::vector<TokenSpan> offsets;  // ascending, non-overlapping char spans

  void validate() const {
    for (size_t i = 0; i < offsets.size(); ++i) {
      if (offsets[i].start >= offsets[i].end)
        throw std::invalid_argument("alignment: empty token span");
      if (i > 0 && offsets[i].start < offsets[i - 1].end)
        throw std::invalid_argument("alignment: overlapping token spans");
    }
  }
};

struct SequenceReward {
  std::string source_id;
  double value = 0.0;
  double weight = 1.0;
};

struct TokenReward {
  std::string source_id;
  std::vector<double> values;  // length == token count
  double weight = 1.0;
};

struct RewardSpec {
  std::vector<SequenceReward> sequence_rewards;
  std::vector<TokenReward> token_rewards;
};

struct Warnings {
  std::vector<std::string> messages;
  void add(std::string m) { messages.push_back(std::move(m)); }
};

// Distribute each span's penalty (negative reward) equally over the
// tokens it overlaps, so the vector total equals -mqm_score of the same
// spans. Non-translation suppression mirrors mqm_score: when present,
// the capped penalty is split across the non-translation spans only.
inline std::vector<double> spans_to_token_rewards(
    const std::vector<SpanAnnotation>& spans, const TokenAlignment& align,
    const MqmWeightTable& weights = {}, Warnings* warnings = nullptr) {
  align.validate();
  weights.validate();
  std::vector<double> out(align.offsets.size(), 0.0);
  if (align.offsets.empty() || spans.empty()) return out;

  bool has_nt = false;
  for (const auto& s : spans)
    if (s.severity == metrics::Severity::kNonTranslation) has_nt = true;

  std::vector<const SpanAnnotation*> active;
  size_t nt_count = 0;
  for (const auto& s : spans) {
    if (has_nt && s.severity != metrics::Severity::kNonTranslation) continue;
    active.push_back(&s);
    if (has_nt) ++nt_count;
  }

  for (const auto* sp : active) {
    double w = has_nt ? weights.non_translation / static_cast<double>(nt_count)
                      : metrics::span_weight(*sp, weights);
    std::vector<size_t> covered;
    for (size_t t = 0; t < align.offsets.size(); ++t) {
      const auto& tok = align.offsets[t];
      if (tok.start < sp->end && sp->start < tok.end) covered.push_back(t);
    }
    if (covered.empty()) {
      // whole penalty to the nearest preceding token (or the first token)
      size_t target = 0;
      for (size_t t = 0; t < align.offsets.size(); ++t)
        if (align.offsets[t].end <= sp->start) target = t;
      out[target] -= w;
      if (warnings)
        warnings->add("span [" + std::to_string(sp->start) + "," +
                      std::to_string(sp->end) +
                      ") overlaps no token; penalty moved to token " +
                      std::to_string(target));
      continue;
    }
    double share = w / static_cast<double>(covered.size());
    for (size_t t : covered) out[t] -= share;
  }
  return out;
}

inline std::vector<double> broadcast_sequence_reward(double value,
                                                     size_t token_count) {
  if (token_count == 0)
    throw std::invalid_argument("broadcast: token_count must be >= 1");
  return std::vector<double>(token_count, value);
}

// Elementwise weighted sum of broadcast sequence rewards and token vectors.
inline std::vector<double> combine(const RewardSpec& spec, size_t token_count) {
  std::vector<double> out(token_count, 0.0);
  if (token_count == 0) throw std::invalid_argument("combine: token_count == 0");
  for (const auto& s : spec.sequence_rewards)
    for (auto& x : out) x += s.weight * s.value;
  for (const auto& t : spec.token_rewards) {
    if (t.values.size() != token_count)
      throw std::invalid_argument("combine: length mismatch for source " +
                                  t.source_id);
    for (size_t i = 0; i < token_count; ++i) out[i] += t.weight * t.values[i];
  }
  return out;
}

struct AdvantageBatch {
  std::vector<std::vector<double>> sequences;
  bool normalized = false;
  double epsilon = 1e-8;
};

// Pooled mean / population std over every token of every sequence;
// x -> (x - mu) / (sigma + eps).
inline AdvantageBatch batch_normalize(AdvantageBatch batch) {
  size_t n = 0;
  double sum = 0.0;
  for (const auto& seq : batch.sequences) {
    n += seq.size();
    sum = std::accumulate(seq.begin(), seq.end(), sum);
  }
  if (n == 0) throw std::invalid_argument("batch_normalize: empty batch");
  double mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (const auto& seq : batch.sequences)
    for (double x : seq) var += (x - mean) * (x - mean);
  var /= static_cast<double>(n);
  double denom = std::sqrt(var) + batch.epsilon;
  for (auto& seq : batch.sequences)
    for (double& x : seq) x = (x - mean) / denom;
  batch.normalized = true;
  return batch;
}

// --- JSONL records for `rewards compute` ---------------------------------
//
// In:  {"sequence_id", "tokens":[{"start","end"}], "spans":[...],
//       "sequence_rewards":[{"source_id","value","weight"}],
//       "token_rewards":[{"source_id","values","weight"}]?}
// Out: {"sequence_id", "advantages":[float]}

struct SequenceRecord {
  std::string sequence_id;
  TokenAlignment alignment;
  std::vector<SpanAnnotation> spans;
  RewardSpec spec;
};

inline SequenceRecord sequence_record_from_json(const nlohmann::json& j) {
  SequenceRecord rec;
  rec.sequence_id = j.at("sequence_id").get<std::string>();
  for (const auto& t : j.at("tokens"))
    rec.alignment.offsets.push_back(
        {t.at("start").get<size_t>(), t.at("end").get<size_t>()});
  for (const auto& s : j.value("spans", nlohmann::json::array())) {
    SpanAnnotation sp;
    sp.start = s.at("start").get<size_t>();
    sp.end = s.at("end").get<size_t>();
    sp.severity = metrics::severity_from_name(s.at("severity").get<std::string>());
    sp.category = s.value("category", "");
    sp.source_judge = s.value("source_judge", "");
    rec.spans.push_back(std::move(sp));
  }
  for (const auto& r : j.value("sequence_rewards", nlohmann::json::array()))
    rec.spec.sequence_rewards.push_back({r.at("source_id").get<std::string>(),
                                         r.at("value").get<double>(),
                                         r.value("weight", 1.0)});
  for (const auto& r : j.value("token_rewards", nlohmann::json::array()))
    rec.spec.token_rewards.push_back({r.at("source_id").get<std::string>(),
                                      r.at("values").get<std::vector<double>>(),
                                      r.value("weight", 1.0)});
  return rec;
}

// Full per-batch computation: span rewards + sequence broadcasts combined
// per sequence, then batch-normalized together.
inline AdvantageBatch compute_advantages(std::vector<SequenceRecord> records,
                                         const MqmWeightTable& weights = {},
                                         double span_source_weight = 1.0,
                                         double epsilon = 1e-8,
                                         Warnings* warnings = nullptr) {
  AdvantageBatch batch;
  batch.epsilon = epsilon;
  for (auto& rec : records) {
    RewardSpec spec = std::move(rec.spec);
    if (!rec.spans.empty())
      spec.token_rewards.push_back(
          {"mqm_spans",
           spans_to_token_rewards(rec.spans, rec.alignment, weights, warnings),
           span_source_weight});
    batch.sequences.push_back(combine(spec, rec.alignment.offsets.size()));
  }
  return batch_normalize(std::move(batch));
}

}  // namespace mtkit::rewards
