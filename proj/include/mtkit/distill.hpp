#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtkit/backend.hpp"
#include "mtkit/corpus.hpp"
#include "mtkit/metrics.hpp"

namespace mtkit::distill {

using corpus::Segment;
using corpus::SourcePool;

// QE scorer handle: a backend scorer plus the transform that turns its
// raw score into a higher-is-better reward.
struct QeScorer {
  backend::Backend* backend = nullptr;
  std::string scorer_id = "metricx24-qe";
  metrics::RescaleKind transform = metrics::RescaleKind::kMetricXQe;

  double raw(const std::string& source, const std::string& hypothesis) const {
    return backend->score({source, hypothesis, std::nullopt, scorer_id});
  }
  double rescaled(const std::string& source, const std::string& hypothesis) const {
    return metrics::rescale(raw(source, hypothesis), transform);
  }
};

constexpr int kGreedySampleIndex = -1;

struct Candidate {
  std::string segment_id;
  std::string text;       // verbatim from the backend
  int sample_index = 0;   // kGreedySampleIndex for greedy
};

struct ScoredCandidate {
  Candidate candidate;
  double qe_raw = 0.0;
  double qe_rescaled = 0.0;
  std::string source_text;
  std::string source_lang;
  std::string target_lang;
  std::string mode = "sentence";  // sentence | blob
};

struct PrefilterRecord {
  std::string segment_id;
  double greedy_score = 0.0;   // rescaled, higher better
  double sampled_score = 0.0;  // rescaled
  double delta = 0.0;          // sampled - greedy; -inf on failure
  std::string error;
};

struct AuditEntry {
  std::string segment_id;
  int sample_index = 0;
  std::string text;
  std::string error;
  double qe_raw = 0.0;
  double qe_rescaled = 0.0;
  bool selected = false;
};

using PromptFn = std::function<std::string(const Segment&)>;

// --- prefilter -----------------------------------------------------------

// Pure top-k step, separated so it can be brute-force checked: largest
// delta wins, ties broken by segment id ascending.
inline std::vector<std::string> select_top_k(std::vector<PrefilterRecord> recs,
                                             size_t k) {
  std::stable_sort(recs.begin(), recs.end(),
                   [](const PrefilterRecord& a, const PrefilterRecord& b) {
                     if (a.delta != b.delta) return a.delta > b.delta;
                     return a.segment_id < b.segment_id;
                   });
  std::vector<std::string> out;
  for (size_t i = 0; i < recs.size() && i < k; ++i)
    out.push_back(recs[i].segment_id);
  return out;
}

struct PrefilterResult {
  std::vector<std::string> selected;       // segment ids, delta-descending
  std::vector<PrefilterRecord> records;    // all, for audit
};

// One greedy + one temperature-1.0 sample per segment; keep the k segments
// whose sampled QE improves most over greedy.
inline PrefilterResult prefilter(const SourcePool& pool, const PromptFn& prompt_fn,
                                 backend::Backend& gen, const QeScorer& qe,
                                 size_t k) {
  if (k < 1) throw std::invalid_argument("prefilter: k must be >= 1");
  if (pool.segments.empty())
    throw std::invalid_argument("prefilter: empty pool");
  PrefilterResult result;
  for (const auto& seg : pool.segments) {
    PrefilterRecord rec;
    rec.segment_id = seg.id;
    try {
      const std::string prompt = prompt_fn(seg);
      backend::GenRequest greedy_req{prompt, backend::GreedyDecode{}, 1, 1024,
                                     seg.id + ":greedy"};
      backend::GenRequest sample_req{prompt, backend::SampleDecode{1.0}, 1, 1024,
                                     seg.id + ":sampled"};
      auto g = gen.generate(greedy_req);
      auto s = gen.generate(sample_req);
      if (!g.at(0).ok() || !s.at(0).ok())
        throw std::runtime_error(g.at(0).ok() ? s.at(0).error : g.at(0).error);
      rec.greedy_score = qe.rescaled(seg.text, *g.at(0).text);
      rec.sampled_score = qe.rescaled(seg.text, *s.at(0).text);
      rec.delta = rec.sampled_score - rec.greedy_score;
    } catch (const std::exception& e) {
      rec.delta = -std::numeric_limits<double>::infinity();
      rec.error = e.what();
    }
    result.records.push_back(std::move(rec));
  }
  result.selected = select_top_k(result.records, k);
  return result;
}

// --- best-of-N -----------------------------------------------------------

struct BestOfNResult {
  std::optional<ScoredCandidate> best;  // absent when every sample errored
  std::vector<AuditEntry> audit;        // one entry per sample, index order
};

inline BestOfNResult best_of_n(const Segment& seg, const std::string& prompt,
                               size_t n, backend::Backend& gen,
                               const QeScorer& qe) {
  if (n < 1) throw std::invalid_argument("best_of_n: n must be >= 1");
  backend::GenRequest req{prompt, backend::SampleDecode{1.0}, n, 1024,
                          seg.id + ":bo" + std::to_string(n)};
  auto samples = gen.generate(req);

  BestOfNResult result;
  size_t best_idx = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  bool any_ok = false;
  for (size_t i = 0; i < samples.size(); ++i) {
    AuditEntry e;
    e.segment_id = seg.id;
    e.sample_index = static_cast<int>(i);
    if (!samples[i].ok()) {
      e.error = samples[i].error;
    } else {
      e.text = *samples[i].text;
      e.qe_raw = qe.raw(seg.text, e.text);
      e.qe_rescaled = metrics::rescale(e.qe_raw, qe.transform);
      if (!any_ok || e.qe_rescaled > best_score) {  // tie keeps lower index
        any_ok = true;
        best_score = e.qe_rescaled;
        best_idx = i;
      }
    }
    result.audit.push_back(std::move(e));
  }
  if (any_ok) {
    result.audit[best_idx].selected = true;
    const auto& win = result.audit[best_idx];
    ScoredCandidate sc;
    sc.candidate = {seg.id, win.text, win.sample_index};
    sc.qe_raw = win.qe_raw;
    sc.qe_rescaled = win.qe_rescaled;
    sc.source_text = seg.text;
    result.best = std::move(sc);
  }
  return result;
}

// Recompute the selection from audit entries alone; must agree with
// best_of_n's live choice.
inline std::map<std::string, std::string> replay_selection(
    const std::vector<AuditEntry>& audit) {
  struct Best {
    double score = -std::numeric_limits<double>::infinity();
    int index = std::numeric_limits<int>::max();
    std::string text;
    bool any = false;
  };
  std::map<std::string, Best> best;
  for (const auto& e : audit) {
    if (!e.error.empty() || e.sample_index == kGreedySampleIndex) continue;
    auto& b = best[e.segment_id];
    if (!b.any || e.qe_rescaled > b.score ||
        (e.qe_rescaled == b.score && e.sample_index < b.index)) {
      b = {e.qe_rescaled, e.sample_index, e.text, true};
    }
  }
  std::map<std::string, std::string> out;
  for (auto& [id, b] : best)
    if (b.any) out[id] = b.text;
  return out;
}

// --- formatting filter ---------------------------------------------------

struct FormatFilterConfig {
  std::vector<std::string> commentary_prefixes = {
      "Translation:", "Here is", "Here's", "Sure,", "The translation is",
      "Translated text:"};
  double prompt_echo_fraction = 0.8;   // reject if >= this much of the prompt
  double source_copy_fraction = 0.8;   // reject if >= this much of the output
  double judge_reject_mqm = 25.0;      // judge span score at/above this rejects
};

struct FilterVerdict {
  bool pass = true;
  std::string reason;  // empty on pass
  std::string warning;
};

namespace detail {

inline size_t longest_common_substring(std::string_view a, std::string_view b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  size_t best = 0;
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = (a[i - 1] == b[j - 1]) ? prev[j - 1] + 1 : 0;
      best = std::max(best, cur[j]);
    }
    std::swap(prev, cur);
  }
  return best;
}

inline bool istarts_with(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (size_t i = 0; i < prefix.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i])))
      return false;
  return true;
}

}  // namespace detail

inline FilterVerdict format_filter(const ScoredCandidate& sc,
                                   const std::string& prompt,
                                   const FormatFilterConfig& cfg = {},
                                   backend::Backend* judge = nullptr,
                                   const std::string& judge_id = "format-judge") {
  const std::string trimmed = corpus::detail::trim(sc.candidate.text);
  if (trimmed.empty()) return {false, "empty", {}};
  for (const auto& p : cfg.commentary_prefixes)
    if (detail::istarts_with(trimmed, p)) return {false, "commentary_prefix", {}};
  if (!prompt.empty()) {
    size_t lcs = detail::longest_common_substring(sc.candidate.text, prompt);
    if (static_cast<double>(lcs) >=
        cfg.prompt_echo_fraction * static_cast<double>(prompt.size()))
      return {false, "prompt_echo", {}};
  }
  if (!sc.source_text.empty() && !sc.candidate.text.empty()) {
    size_t lcs =
        detail::longest_common_substring(sc.candidate.text, sc.source_text);
    if (static_cast<double>(lcs) >=
        cfg.source_copy_fraction * static_cast<double>(sc.candidate.text.size()))
      return {false, "source_copy", {}};
  }
  if (judge) {
    try {
      auto j = judge->judge_spans(
          {sc.source_text, sc.candidate.text, std::nullopt, judge_id});
      if (metrics::mqm_score(j.spans) >= cfg.judge_reject_mqm)
        return {false, "judge_reject", {}};
    } catch (const backend::TransportError& e) {
      return {true, {}, std::string("judge unavailable, heuristic verdict: ") +
                            e.what()};
    }
  }
  return {true, {}, {}};
}

// --- dataset emission ----------------------------------------------------

struct EmitReport {
  std::map<std::string, size_t> kept_per_pair;
  std::map<std::string, size_t> shortfall_per_pair;  // cap minus kept
  std::vector<std::string> shard_paths;
};

inline nlohmann::json dataset_record(const ScoredCandidate& sc) {
  return {{"source_text", sc.source_text},
          {"target_text", sc.candidate.text},
          {"lang_pair", sc.source_lang + "-" + sc.target_lang},
          {"mode", sc.mode},
          {"qe_raw", sc.qe_raw},
          {"qe_rescaled", sc.qe_rescaled},
          {"provenance",
           {{"segment_id", sc.candidate.segment_id},
            {"sample_index", sc.candidate.sample_index}}}};
}

// JSONL shards, one per language pair, capped at `cap_per_pair` records,
// highest rescaled QE first (ties by segment id).
inline EmitReport emit_dataset(std::vector<ScoredCandidate> accepted,
                               const std::string& out_dir, size_t cap_per_pair) {
  if (cap_per_pair < 1)
    throw std::invalid_argument("emit_dataset: cap_per_pair must be >= 1");
  std::filesystem::create_directories(out_dir);
  std::map<std::string, std::vector<ScoredCandidate>> by_pair;
  for (auto& sc : accepted)
    by_pair[sc.source_lang + "-" + sc.target_lang].push_back(std::move(sc));

  EmitReport report;
  for (auto& [pair, recs] : by_pair) {
    std::stable_sort(recs.begin(), recs.end(),
                     [](const ScoredCandidate& a, const ScoredCandidate& b) {
                       if (a.qe_rescaled != b.qe_rescaled)
                         return a.qe_rescaled > b.qe_rescaled;
                       return a.candidate.segment_id < b.candidate.segment_id;
                     });
    size_t keep = std::min(cap_per_pair, recs.size());
    report.kept_per_pair[pair] = keep;
    if (keep < cap_per_pair) report.shortfall_per_pair[pair] = cap_per_pair - keep;

    auto path = std::filesystem::path(out_dir) / (pair + ".jsonl");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
      std::filesystem::remove(path);  // partial-shard cleanup
      throw std::runtime_error("emit_dataset: cannot write " + path.string());
    }
    for (size_t i = 0; i < keep; ++i) out << dataset_record(recs[i]).dump() << '\n';
    if (!out) {
      out.close();
      std::filesystem::remove(path);
      throw std::runtime_error("emit_dataset: write failure on " + path.string());
    }
    report.shard_paths.push_back(path.string());
  }
  return report;
}

// --- audit log serialization ---------------------------------------------

inline nlohmann::json to_json(const AuditEntry& e) {
  nlohmann::json j{{"segment_id", e.segment_id},
                   {"sample_index", e.sample_index},
                   {"selected", e.selected}};
  if (e.error.empty()) {
    j["text"] = e.text;
    j["qe_raw"] = e.qe_raw;
    j["qe_rescaled"] = e.qe_rescaled;
  } else {
    j["error"] = e.error;
  }
  return j;
}

inline AuditEntry audit_entry_from_json(const nlohmann::json& j) {
  AuditEntry e;
  e.segment_id = j.at("segment_id").get<std::string>();
  e.sample_index = j.at("sample_index").get<int>();
  e.selected = j.value("selected", false);
  if (j.contains("error")) {
    e.error = j.at("error").get<std::string>();
  } else {
    e.text = j.at("text").get<std::string>();
    e.qe_raw = j.at("qe_raw").get<double>();
    e.qe_rescaled = j.at("qe_rescaled").get<double>();
  }
  return e;
}

}  // namespace mtkit::distill
