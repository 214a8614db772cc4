#pragma once

#include <algorithm>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtkit/hash.hpp"
#include "mtkit/metrics.hpp"

namespace mtkit::evalprep {

enum class Domain { kLiterary, kNews, kSocial };

inline Domain domain_from_name(std::string_view s) {
  if (s == "literary") return Domain::kLiterary;
  if (s == "news") return Domain::kNews;
  if (s == "social") return Domain::kSocial;
  throw std::invalid_argument("unknown domain: " + std::string(s));
}

struct EvalDocument {
  std::string doc_id;
  Domain domain = Domain::kNews;
  std::vector<std::vector<std::string>> paragraphs;  // paragraphs of sentences

  void validate() const {
    if (paragraphs.empty())
      throw std::invalid_argument("document " + doc_id + ": no paragraphs");
    for (const auto& p : paragraphs)
      if (p.empty())
        throw std::invalid_argument("document " + doc_id + ": empty paragraph");
  }
};

struct Chunk {
  std::string doc_id;
  size_t chunk_index = 0;
  std::vector<std::vector<std::string>> paragraphs;  // contiguous subsequence
  size_t sentence_count = 0;

  std::string id() const { return doc_id + "#" + std::to_string(chunk_index); }
};

inline constexpr size_t kMaxSentencesPerChunk = 12;

struct ChunkResult {
  std::vector<Chunk> chunks;
  bool skipped = false;
  std::string skip_reason;
  std::vector<std::string> warnings;
};

// Rater-fatigue chunking. Non-literary: the longest prefix of whole
// paragraphs totalling <= 12 sentences becomes the single chunk; a first
// paragraph over 12 sentences skips the document. Literary: consecutive
// whole paragraphs are greedily packed into <= 12-sentence chunks covering
// the full document; a single over-limit paragraph is skipped with a warning.
inline ChunkResult chunk_document(const EvalDocument& doc,
                                  size_t max_sentences = kMaxSentencesPerChunk) {
  doc.validate();
  ChunkResult result;
  if (doc.domain != Domain::kLiterary) {
    if (doc.paragraphs.front().size() > max_sentences) {
      result.skipped = true;
      result.skip_reason = "first paragraph exceeds " +
                           std::to_string(max_sentences) + " sentences";
      return result;
    }
    Chunk chunk;
    chunk.doc_id = doc.doc_id;
    for (const auto& para : doc.paragraphs) {
      if (chunk.sentence_count + para.size() > max_sentences) break;
      chunk.paragraphs.push_back(para);
      chunk.sentence_count += para.size();
    }
    result.chunks.push_back(std::move(chunk));
    return result;
  }

  Chunk current;
  current.doc_id = doc.doc_id;
  size_t next_index = 0;
  auto flush = [&] {
    if (current.paragraphs.empty()) return;
    current.chunk_index = next_index++;
    result.chunks.push_back(std::move(current));
    current = Chunk{};
    current.doc_id = doc.doc_id;
  };
  for (size_t pi = 0; pi < doc.paragraphs.size(); ++pi) {
    const auto& para = doc.paragraphs[pi];
    if (para.size() > max_sentences) {
      flush();
      result.warnings.push_back("paragraph " + std::to_string(pi) + " of " +
                                doc.doc_id + " exceeds the sentence limit; skipped");
      continue;
    }
    if (current.sentence_count + para.size() > max_sentences) flush();
    current.paragraphs.push_back(para);
    current.sentence_count += para.size();
  }
  flush();
  if (result.chunks.empty()) {
    result.skipped = true;
    result.skip_reason = "every paragraph exceeds the sentence limit";
  }
  return result;
}

// --- pseudo-SxS rater assignment -----------------------------------------

struct Assignment {
  std::map<std::string, std::string> rater_by_chunk;  // chunk id -> rater id
  std::vector<std::string> systems;
};

// One rater per chunk, shared by every system's output for that chunk.
// Chunk order is shuffled by seed, raters assigned round-robin, so loads
// differ by at most one.
inline Assignment assign_raters(const std::vector<Chunk>& chunks,
                                const std::vector<std::string>& systems,
                                const std::vector<std::string>& raters,
                                uint64_t seed) {
  if (raters.empty())
    throw std::invalid_argument("assign_raters: empty rater list");
  Assignment a;
  a.systems = systems;
  std::vector<std::string> ids;
  ids.reserve(chunks.size());
  for (const auto& c : chunks) ids.push_back(c.id());
  std::sort(ids.begin(), ids.end());
  SplitMix64 rng(seed);
  for (size_t i = ids.size(); i > 1; --i)
    std::swap(ids[i - 1], ids[rng.below(i)]);
  for (size_t i = 0; i < ids.size(); ++i)
    a.rater_by_chunk[ids[i]] = raters[i % raters.size()];
  return a;
}

// --- MQM aggregation -----------------------------------------------------

struct Annotation {
  std::string chunk_id;
  std::string system;
  std::string lang_pair;
  size_t segment_index = 0;
  std::vector<metrics::SpanAnnotation> spans;
};

inline Annotation annotation_from_json(const nlohmann::json& j) {
  Annotation a;
  a.chunk_id = j.at("chunk_id").get<std::string>();
  a.system = j.at("system").get<std::string>();
  a.lang_pair = j.at("lang_pair").get<std::string>();
  a.segment_index = j.value("segment_index", 0);
  for (const auto& s : j.value("spans", nlohmann::json::array())) {
    metrics::SpanAnnotation sp;
    sp.start = s.at("start").get<size_t>();
    sp.end = s.at("end").get<size_t>();
    sp.severity = metrics::severity_from_name(s.at("severity").get<std::string>());
    sp.category = s.value("category", "");
    sp.source_judge = s.value("source_judge", "");
    a.spans.push_back(std::move(sp));
  }
  return a;
}

struct ReportRow {
  std::string lang_pair;
  std::map<std::string, double> score_by_system;  // mean segment MQM
  std::string best_system;                        // row minimum
};

struct Report {
  std::vector<ReportRow> rows;  // ascending by best system score
  std::vector<std::string> systems;
  std::vector<std::string> exclusions;  // annotations for unknown chunks
};

// Mean segment MQM per (language pair, system). Annotations referencing
// unknown chunks land in the exclusions list rather than being dropped.
inline Report aggregate(const std::vector<Annotation>& annotations,
                        const metrics::MqmWeightTable& weights = {},
                        const std::vector<std::string>& known_chunks = {}) {
  Report report;
  std::map<std::string, bool> known;
  for (const auto& c : known_chunks) known[c] = true;

  // (lang_pair, system) -> segment scores
  std::map<std::string, std::map<std::string, std::vector<double>>> cells;
  std::map<std::string, bool> systems_seen;
  for (const auto& a : annotations) {
    if (!known.empty() && !known.count(a.chunk_id)) {
      report.exclusions.push_back(a.chunk_id + "/" + a.system + "/seg" +
                                  std::to_string(a.segment_index));
      continue;
    }
    cells[a.lang_pair][a.system].push_back(metrics::mqm_score(a.spans, weights));
    systems_seen[a.system] = true;
  }
  for (const auto& [sys, _] : systems_seen) report.systems.push_back(sys);

  for (const auto& [pair, by_system] : cells) {
    ReportRow row;
    row.lang_pair = pair;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [sys, scores] : by_system) {
      double mean = 0.0;
      for (double s : scores) mean += s;
      mean /= static_cast<double>(scores.size());
      row.score_by_system[sys] = mean;
      if (mean < best) {
        best = mean;
        row.best_system = sys;
      }
    }
    report.rows.push_back(std::move(row));
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const ReportRow& a, const ReportRow& b) {
                     return a.score_by_system.at(a.best_system) <
                            b.score_by_system.at(b.best_system);
                   });
  return report;
}

inline nlohmann::json report_to_json(const Report& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json scores = nlohmann::json::object();
    for (const auto& [sys, v] : row.score_by_system) scores[sys] = v;
    rows.push_back({{"lang_pair", row.lang_pair},
                    {"scores", scores},
                    {"best", row.best_system}});
  }
  return {{"rows", rows},
          {"systems", report.systems},
          {"exclusions", report.exclusions}};
}

// Plain-text table; the per-row minimum is starred.
inline std::string report_to_text(const Report& report) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "Language Pair";
  for (const auto& sys : report.systems) os << std::right << std::setw(14) << sys;
  os << '\n';
  for (const auto& row : report.rows) {
    os << std::left << std::setw(24) << row.lang_pair;
    for (const auto& sys : report.systems) {
      std::ostringstream cell;
      auto it = row.score_by_system.find(sys);
      if (it == row.score_by_system.end()) {
        cell << "-";
      } else {
        cell << std::fixed << std::setprecision(3) << it->second;
        if (sys == row.best_system) cell << "*";
      }
      os << std::right << std::setw(14) << cell.str();
    }
    os << '\n';
  }
  if (!report.exclusions.empty()) {
    os << "\nExcluded (unknown segments):\n";
    for (const auto& e : report.exclusions) os << "  " << e << '\n';
  }
  return os.str();
}

// --- document file format ------------------------------------------------
//
// {"doc_id": str, "domain": "literary"|"news"|"social",
//  "paragraphs": [[sentence, ...], ...]}
inline EvalDocument document_from_json(const nlohmann::json& j) {
  EvalDocument doc;
  doc.doc_id = j.at("doc_id").get<std::string>();
  doc.domain = domain_from_name(j.at("domain").get<std::string>());
  for (const auto& p : j.at("paragraphs"))
    doc.paragraphs.push_back(p.get<std::vector<std::string>>());
  doc.validate();
  return doc;
}

}  // namespace mtkit::evalprep
