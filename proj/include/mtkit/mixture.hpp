#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtkit/tokenizer.hpp"

namespace mtkit::mixture {

struct MixtureEntry {
  std::string source_name;
  double target_fraction = 0.0;  // of total model tokens
  std::vector<std::string> shard_paths;
};

struct MixtureSpec {
  std::vector<MixtureEntry> entries;
  uint64_t seed = 0;
  double tolerance = 0.01;

  void validate() const {
    if (entries.empty()) throw std::invalid_argument("mixture: no entries");
    double sum = 0.0;
    for (const auto& e : entries) {
      if (e.target_fraction < 0.0 || e.target_fraction > 1.0)
        throw std::invalid_argument("mixture: fraction out of [0,1] for " +
                                    e.source_name);
      sum += e.target_fraction;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("mixture: fractions sum to " +
                                  std::to_string(sum) + ", expected 1");
  }
};

struct MixReport {
  std::map<std::string, size_t> tokens_per_source;
  std::map<std::string, size_t> examples_per_source;
  std::map<std::string, bool> resampled;  // source exhausted and recycled
  size_t total_tokens = 0;

  double realized_fraction(const std::string& source) const {
    if (total_tokens == 0) return 0.0;
    auto it = tokens_per_source.find(source);
    return it == tokens_per_source.end()
               ? 0.0
               : static_cast<double>(it->second) / total_tokens;
  }

  nlohmann::json to_json() const {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [name, toks] : tokens_per_source)
      per[name] = {{"tokens", toks},
                   {"examples", examples_per_source.at(name)},
                   {"fraction", realized_fraction(name)},
                   {"resampled", resampled.count(name) && resampled.at(name)}};
    return {{"total_tokens", total_tokens}, {"sources", per}};
  }
};

struct MixExample {
  std::string source_name;
  nlohmann::json payload;
  size_t token_count = 0;
};

namespace detail {

// Model-token count of one example: explicit "token_count" wins, else the
// tokenizer runs over the text fields the pipeline emits.
inline size_t example_tokens(const nlohmann::json& j, const Tokenizer& tok) {
  if (j.contains("token_count")) return j.at("token_count").get<size_t>();
  std::string text;
  for (const char* key : {"text", "source_text", "target_text"})
    if (j.contains(key) && j.at(key).is_string()) {
      if (!text.empty()) text += '\n';
      text += j.at(key).get<std::string>();
    }
  return tok.count(text);
}

inline std::vector<MixExample> load_source(const MixtureEntry& entry,
                                           const Tokenizer& tok) {
  std::vector<MixExample> out;
  for (const auto& path : entry.shard_paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("mixture: cannot open shard " + path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      size_t toks = example_tokens(j, tok);
      out.push_back({entry.source_name, std::move(j), toks});
    }
  }
  return out;
}

}  // namespace detail

struct ComposeResult {
  std::vector<MixExample> stream;
  MixReport report;
};

// Greedy deficit interleave: each step emits from the source furthest
// below its target fraction. Sources are read in shard order (no shuffle);
// an exhausted source restarts from its beginning with a resample flag.
// Stops once total emitted tokens reach `total_tokens`.
inline ComposeResult compose(const MixtureSpec& spec, size_t total_tokens,
                             const Tokenizer& tok = default_tokenizer()) {
  spec.validate();
  std::vector<std::vector<MixExample>> sources;
  std::vector<size_t> cursor(spec.entries.size(), 0);
  for (const auto& e : spec.entries) {
    sources.push_back(detail::load_source(e, tok));
    if (e.target_fraction > 0.0 && sources.back().empty())
      throw std::runtime_error("mixture: source " + e.source_name +
                               " has no examples");
  }

  ComposeResult result;
  std::vector<size_t> emitted(spec.entries.size(), 0);
  size_t emitted_total = 0;
  while (emitted_total < total_tokens) {
    // source with the largest token deficit relative to target
    size_t pick = spec.entries.size();
    double best_deficit = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < spec.entries.size(); ++i) {
      if (spec.entries[i].target_fraction <= 0.0) continue;
      double realized = emitted_total == 0
                            ? 0.0
                            : static_cast<double>(emitted[i]) / emitted_total;
      double deficit = spec.entries[i].target_fraction - realized;
      if (deficit > best_deficit) {
        best_deficit = deficit;
        pick = i;
      }
    }
    if (pick == spec.entries.size()) break;  // all fractions zero

    auto& pool = sources[pick];
    if (cursor[pick] >= pool.size()) {
      cursor[pick] = 0;  // resample with replacement
      result.report.resampled[spec.entries[pick].source_name] = true;
    }
    const MixExample& ex = pool[cursor[pick]++];
    emitted[pick] += ex.token_count;
    emitted_total += ex.token_count;
    result.report.tokens_per_source[ex.source_name] += ex.token_count;
    result.report.examples_per_source[ex.source_name] += 1;
    result.stream.push_back(ex);
  }
  result.report.total_tokens = emitted_total;
  for (const auto& e : spec.entries) {
    result.report.tokens_per_source.try_emplace(e.source_name, 0);
    result.report.examples_per_source.try_emplace(e.source_name, 0);
  }
  return result;
}

// Recount the stream; must reproduce compose's report exactly.
inline MixReport audit(const MixtureSpec& spec,
                       const std::vector<MixExample>& stream,
                       const MixReport& expected) {
  MixReport recount;
  for (const auto& ex : stream) {
    recount.tokens_per_source[ex.source_name] += ex.token_count;
    recount.examples_per_source[ex.source_name] += 1;
    recount.total_tokens += ex.token_count;
  }
  for (const auto& e : spec.entries) {
    recount.tokens_per_source.try_emplace(e.source_name, 0);
    recount.examples_per_source.try_emplace(e.source_name, 0);
  }
  recount.resampled = expected.resampled;
  if (recount.total_tokens != expected.total_tokens ||
      recount.tokens_per_source != expected.tokens_per_source ||
      recount.examples_per_source != expected.examples_per_source)
    throw std::runtime_error("mixture audit: stream does not match report");
  return recount;
}

// --- spec file -----------------------------------------------------------
//
// {"seed": int, "tolerance": float,
//  "sources": [{"name": str, "fraction": float, "shards": [str]}]}
inline MixtureSpec load_spec(const nlohmann::json& j) {
  MixtureSpec spec;
  spec.seed = j.value("seed", 0);
  spec.tolerance = j.value("tolerance", 0.01);
  for (const auto& s : j.at("sources"))
    spec.entries.push_back({s.at("name").get<std::string>(),
                            s.at("fraction").get<double>(),
                            s.at("shards").get<std::vector<std::string>>()});
  spec.validate();
  return spec;
}

inline void write_stream(std::ostream& out, const std::vector<MixExample>& stream) {
  for (const auto& ex : stream) {
    nlohmann::json j = ex.payload;
    j["source_name"] = ex.source_name;
    j["token_count"] = ex.token_count;
    out << j.dump() << '\n';
  }
}

}  // namespace mtkit::mixture
