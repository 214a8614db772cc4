#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtkit/hash.hpp"
#include "mtkit/tokenizer.hpp"
#include "mtkit/utf8.hpp"

namespace mtkit::corpus {

struct Segment {
  std::string id;
  std::string text;
  std::string lang;
  size_t token_count = 0;
  size_t char_count = 0;  // Unicode scalar values
  bool oversize = false;  // blob-mode line that alone exceeds the cap
};

enum class IngestMode { kSentence, kBlob };

struct IngestError {
  size_t line_number = 0;  // 1-based
  std::string message;
};

struct IngestResult {
  std::vector<Segment> segments;
  std::vector<IngestError> errors;
  size_t blank_lines_skipped = 0;
};

struct LengthBucket {
  size_t lower = 0;                 // inclusive; SIZE_MAX upper means open
  size_t upper = 0;                 // exclusive
  std::vector<std::string> members;  // segment ids, input order
};

struct SourcePool {
  std::string source_lang;
  std::string target_lang;
  std::vector<Segment> segments;
  uint64_t seed = 0;
  size_t target_size = 0;
  // quota shortfalls: bucket lower bound -> missing count
  std::map<size_t, size_t> shortfalls;
};

inline constexpr size_t kDefaultBlobTokenCap = 512;

inline std::string segment_id(std::string_view lang, IngestMode mode,
                              size_t index, std::string_view text) {
  std::ostringstream os;
  os << lang << (mode == IngestMode::kBlob ? ":b" : ":s") << index << "-"
     << std::hex << (fnv1a64(text) & 0xffffffffu);
  return os.str();
}

namespace detail {

inline std::string trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r\n\f\v");
  if (b == std::string_view::npos) return {};
  size_t e = s.find_last_not_of(" \t\r\n\f\v");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

// One record per line. Sentence mode: one segment per non-blank line.
// Blob mode: consecutive lines packed greedily up to `blob_token_cap`
// tokens, joined with '\n', never splitting a line; a single line over
// the cap becomes its own oversize-flagged segment.
inline IngestResult ingest(std::istream& in, const std::string& lang,
                           IngestMode mode,
                           const Tokenizer& tok = default_tokenizer(),
                           size_t blob_token_cap = kDefaultBlobTokenCap) {
  IngestResult out;
  std::string line;
  size_t line_no = 0;
  size_t seg_index = 0;

  std::string blob_text;
  size_t blob_tokens = 0;

  auto flush_blob = [&] {
    if (blob_text.empty()) return;
    Segment seg;
    seg.text = std::move(blob_text);
    seg.lang = lang;
    seg.token_count = blob_tokens;
    seg.char_count = *utf8::scalar_count(seg.text);
    seg.oversize = blob_tokens > blob_token_cap;
    seg.id = segment_id(lang, IngestMode::kBlob, seg_index++, seg.text);
    out.segments.push_back(std::move(seg));
    blob_text.clear();
    blob_tokens = 0;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) {
      ++out.blank_lines_skipped;
      continue;
    }
    if (!utf8::decode(line)) {
      out.errors.push_back({line_no, "malformed UTF-8"});
      continue;
    }
    const size_t ntok = tok.count(line);
    if (mode == IngestMode::kSentence) {
      Segment seg;
      seg.text = line;
      seg.lang = lang;
      seg.token_count = ntok;
      seg.char_count = *utf8::scalar_count(line);
      seg.id = segment_id(lang, mode, seg_index++, seg.text);
      out.segments.push_back(std::move(seg));
    } else {
      if (!blob_text.empty() && blob_tokens + ntok > blob_token_cap)
        flush_blob();
      if (blob_text.empty()) {
        blob_text = line;
        blob_tokens = ntok;
        if (ntok > blob_token_cap) flush_blob();  // oversize single line
      } else {
        blob_text += '\n';
        blob_text += line;
        blob_tokens += ntok;
      }
    }
  }
  if (mode == IngestMode::kBlob) flush_blob();
  return out;
}

inline IngestResult ingest_file(const std::string& path, const std::string& lang,
                                IngestMode mode,
                                const Tokenizer& tok = default_tokenizer(),
                                size_t blob_token_cap = kDefaultBlobTokenCap) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ingest: cannot open " + path);
  return ingest(in, lang, mode, tok, blob_token_cap);
}

inline std::vector<size_t> default_boundaries() {
  return {1, 2, 4, 8, 16, 32, 64, 128, 256, 512};
}

// Partition segments into [b0,b1), [b1,b2), ..., [b_last, inf).
// A leading [1, b0) bucket is added when b0 > 1 so no segment is dropped.
inline std::vector<LengthBucket> bucket_by_length(
    const std::vector<Segment>& segments, std::vector<size_t> boundaries) {
  if (boundaries.empty()) throw std::invalid_argument("bucket: no boundaries");
  if (boundaries.front() < 1)
    throw std::invalid_argument("bucket: first boundary must be >= 1");
  for (size_t i = 1; i < boundaries.size(); ++i)
    if (boundaries[i] <= boundaries[i - 1])
      throw std::invalid_argument("bucket: boundaries not strictly ascending");

  if (boundaries.front() > 1) boundaries.insert(boundaries.begin(), 1);
  std::vector<LengthBucket> buckets;
  for (size_t i = 0; i < boundaries.size(); ++i) {
    LengthBucket b;
    b.lower = boundaries[i];
    b.upper = (i + 1 < boundaries.size()) ? boundaries[i + 1] : SIZE_MAX;
    buckets.push_back(std::move(b));
  }
  for (const auto& seg : segments) {
    auto it = std::upper_bound(boundaries.begin(), boundaries.end(),
                               seg.token_count);
    size_t idx = static_cast<size_t>(it - boundaries.begin());
    if (idx == 0) idx = 1;  // token_count >= 1 == boundaries[0]
    buckets[idx - 1].members.push_back(seg.id);
  }
  return buckets;
}

// Per-bucket draw without replacement, deterministic in (seed, input order).
// Quotas keyed by bucket lower bound; missing key falls back to
// `uniform_quota` (SIZE_MAX = take everything available).
inline SourcePool sample_pool(const std::vector<Segment>& segments,
                              const std::vector<LengthBucket>& buckets,
                              const std::map<size_t, size_t>& quotas,
                              size_t uniform_quota, uint64_t seed,
                              size_t target_size,
                              const std::string& source_lang,
                              const std::string& target_lang) {
  if (target_size < 1) throw std::invalid_argument("sample_pool: target_size < 1");
  std::map<std::string, const Segment*> by_id;
  for (const auto& s : segments) by_id[s.id] = &s;

  SourcePool pool;
  pool.source_lang = source_lang;
  pool.target_lang = target_lang;
  pool.seed = seed;
  pool.target_size = target_size;

  for (size_t bi = 0; bi < buckets.size(); ++bi) {
    const auto& bucket = buckets[bi];
    size_t quota = uniform_quota;
    if (auto it = quotas.find(bucket.lower); it != quotas.end())
      quota = it->second;
    if (quota == 0 || bucket.members.empty()) {
      if (quota > bucket.members.size() && quota != SIZE_MAX)
        pool.shortfalls[bucket.lower] = quota - bucket.members.size();
      continue;
    }
    size_t take = std::min(quota, bucket.members.size());
    if (quota != SIZE_MAX && quota > bucket.members.size())
      pool.shortfalls[bucket.lower] = quota - bucket.members.size();

    // partial Fisher-Yates over a copy of the member list
    std::vector<std::string> ids = bucket.members;
    SplitMix64 rng(hash_mix(seed, bi));
    for (size_t i = 0; i < take; ++i) {
      size_t j = i + static_cast<size_t>(rng.below(ids.size() - i));
      std::swap(ids[i], ids[j]);
    }
    for (size_t i = 0; i < take && pool.segments.size() < target_size; ++i) {
      auto it = by_id.find(ids[i]);
      if (it == by_id.end())
        throw std::runtime_error("sample_pool: unknown segment id " + ids[i]);
      pool.segments.push_back(*it->second);
    }
    if (pool.segments.size() >= target_size) break;
  }
  return pool;
}

// --- JSONL serialization -------------------------------------------------

inline nlohmann::json to_json(const Segment& s) {
  nlohmann::json j{{"id", s.id},
                   {"text", s.text},
                   {"lang", s.lang},
                   {"token_count", s.token_count},
                   {"char_count", s.char_count}};
  if (s.oversize) j["oversize"] = true;
  return j;
}

inline Segment segment_from_json(const nlohmann::json& j) {
  Segment s;
  s.id = j.at("id").get<std::string>();
  s.text = j.at("text").get<std::string>();
  s.lang = j.at("lang").get<std::string>();
  s.token_count = j.at("token_count").get<size_t>();
  s.char_count = j.at("char_count").get<size_t>();
  s.oversize = j.value("oversize", false);
  return s;
}

inline void write_segments(std::ostream& out, const std::vector<Segment>& segs) {
  for (const auto& s : segs) out << to_json(s).dump() << '\n';
}

inline std::vector<Segment> read_segments(std::istream& in) {
  std::vector<Segment> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(segment_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace mtkit::corpus
