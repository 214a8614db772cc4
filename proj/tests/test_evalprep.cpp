#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "mtkit/evalprep.hpp"

using namespace mtkit::evalprep;
using mtkit::metrics::Severity;
using mtkit::metrics::SpanAnnotation;

namespace {

std::vector<std::string> sentences(size_t n, const std::string& tag) {
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i)
    out.push_back(tag + " sentence " + std::to_string(i) + ".");
  return out;
}

EvalDocument doc(const std::string& id, Domain d,
                 const std::vector<size_t>& para_sizes) {
  EvalDocument doc;
  doc.doc_id = id;
  doc.domain = d;
  for (size_t i = 0; i < para_sizes.size(); ++i)
    doc.paragraphs.push_back(sentences(para_sizes[i], "p" + std::to_string(i)));
  return doc;
}

Annotation ann(const std::string& chunk, const std::string& sys,
               const std::string& pair, size_t seg,
               std::vector<SpanAnnotation> spans = {}) {
  return {chunk, sys, pair, seg, std::move(spans)};
}

SpanAnnotation major() { return {0, 3, Severity::kMajor, "accuracy", "j"}; }
SpanAnnotation minor() { return {0, 2, Severity::kMinor, "style", "j"}; }

}  // namespace

TEST_CASE("news document keeps the longest whole-paragraph prefix") {
  // paragraphs of 5, 4, 6 sentences: 5+4=9 fits, adding 6 would exceed 12
  auto res = chunk_document(doc("news1", Domain::kNews, {5, 4, 6}));
  REQUIRE(res.chunks.size() == 1);
  CHECK(res.chunks[0].paragraphs.size() == 2);
  CHECK(res.chunks[0].sentence_count == 9);
  CHECK(res.chunks[0].id() == "news1#0");
  CHECK_FALSE(res.skipped);
}

TEST_CASE("news document whose first paragraph is too long is skipped") {
  auto res = chunk_document(doc("news2", Domain::kNews, {13, 2}));
  CHECK(res.skipped);
  CHECK(res.chunks.empty());
  CHECK_FALSE(res.skip_reason.empty());
}

TEST_CASE("news paragraph of exactly 12 sentences fills one chunk") {
  auto res = chunk_document(doc("news3", Domain::kNews, {12, 1}));
  REQUIRE(res.chunks.size() == 1);
  CHECK(res.chunks[0].sentence_count == 12);
}

TEST_CASE("literary document is packed into chunks covering everything") {
  // 7 + 7 + 3: first chunk [7], second [7, 3] = 10
  auto res = chunk_document(doc("lit1", Domain::kLiterary, {7, 7, 3}));
  REQUIRE(res.chunks.size() == 2);
  CHECK(res.chunks[0].sentence_count == 7);
  CHECK(res.chunks[1].sentence_count == 10);
  CHECK(res.chunks[0].chunk_index == 0);
  CHECK(res.chunks[1].chunk_index == 1);
  size_t total = 0;
  for (const auto& c : res.chunks) total += c.sentence_count;
  CHECK(total == 17);
}

TEST_CASE("literary over-limit paragraph is skipped with a warning") {
  auto res = chunk_document(doc("lit2", Domain::kLiterary, {4, 15, 5}));
  REQUIRE(res.chunks.size() == 2);
  CHECK(res.chunks[0].sentence_count == 4);
  CHECK(res.chunks[1].sentence_count == 5);
  REQUIRE(res.warnings.size() == 1);
  CHECK(res.warnings[0].find("paragraph 1") != std::string::npos);
}

TEST_CASE("literary document where every paragraph is too long") {
  auto res = chunk_document(doc("lit3", Domain::kLiterary, {20, 14}));
  CHECK(res.skipped);
  CHECK(res.chunks.empty());
  CHECK(res.warnings.size() == 2);
}

TEST_CASE("chunk ordering preserves document order within the literary pack") {
  auto res = chunk_document(doc("lit4", Domain::kLiterary, {3, 3, 3, 3, 3}));
  // 3+3+3+3 = 12 fits, fifth starts a new chunk
  REQUIRE(res.chunks.size() == 2);
  CHECK(res.chunks[0].paragraphs.size() == 4);
  CHECK(res.chunks[1].paragraphs.size() == 1);
  CHECK(res.chunks[0].paragraphs[0][0].rfind("p0", 0) == 0);
  CHECK(res.chunks[1].paragraphs[0][0].rfind("p4", 0) == 0);
}

TEST_CASE("rater assignment balances load to within one chunk") {
  std::vector<Chunk> chunks;
  for (int i = 0; i < 17; ++i) {
    Chunk c;
    c.doc_id = "d" + std::to_string(i);
    chunks.push_back(c);
  }
  auto a = assign_raters(chunks, {"sysA", "sysB"}, {"r1", "r2", "r3"}, 9);
  REQUIRE(a.rater_by_chunk.size() == 17);
  std::map<std::string, size_t> load;
  for (const auto& [_, r] : a.rater_by_chunk) ++load[r];
  size_t lo = SIZE_MAX, hi = 0;
  for (const auto& [_, n] : load) {
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  CHECK(load.size() == 3);
  CHECK(hi - lo <= 1);
}

TEST_CASE("rater assignment is deterministic in the seed") {
  std::vector<Chunk> chunks;
  for (int i = 0; i < 10; ++i) {
    Chunk c;
    c.doc_id = "d" + std::to_string(i);
    chunks.push_back(c);
  }
  auto a = assign_raters(chunks, {"s"}, {"r1", "r2"}, 5);
  auto b = assign_raters(chunks, {"s"}, {"r1", "r2"}, 5);
  CHECK(a.rater_by_chunk == b.rater_by_chunk);
}

TEST_CASE("one rater handles every chunk in the degenerate case") {
  std::vector<Chunk> chunks(4);
  for (int i = 0; i < 4; ++i) chunks[i].doc_id = "d" + std::to_string(i);
  auto a = assign_raters(chunks, {"s1", "s2"}, {"solo"}, 0);
  for (const auto& [_, r] : a.rater_by_chunk) CHECK(r == "solo");
  CHECK_THROWS_AS(assign_raters(chunks, {"s1"}, {}, 0), std::invalid_argument);
}

TEST_CASE("a chunk's rater is shared across systems") {
  // pseudo side-by-side: the assignment is keyed by chunk only, so both
  // systems' outputs for one chunk necessarily reach the same rater
  std::vector<Chunk> chunks(3);
  for (int i = 0; i < 3; ++i) chunks[i].doc_id = "d" + std::to_string(i);
  auto a = assign_raters(chunks, {"sysA", "sysB", "sysC"}, {"r1", "r2"}, 3);
  CHECK(a.systems.size() == 3);
  for (const auto& c : chunks) CHECK(a.rater_by_chunk.count(c.id()) == 1);
}

TEST_CASE("aggregate: clean annotations mean zero") {
  std::vector<Annotation> anns{ann("d0#0", "sys", "en-de", 0),
                               ann("d0#0", "sys", "en-de", 1)};
  auto rep = aggregate(anns);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].score_by_system.at("sys") == 0.0);
}

TEST_CASE("aggregate: one major across five segments means 1.0") {
  std::vector<Annotation> anns;
  anns.push_back(ann("d0#0", "sys", "en-de", 0, {major()}));
  for (size_t i = 1; i < 5; ++i) anns.push_back(ann("d0#0", "sys", "en-de", i));
  auto rep = aggregate(anns);
  CHECK(rep.rows[0].score_by_system.at("sys") == Catch::Approx(1.0));
}

TEST_CASE("aggregate: unknown chunks are listed as exclusions") {
  std::vector<Annotation> anns{ann("known#0", "sys", "en-de", 0),
                               ann("ghost#0", "sys", "en-de", 1)};
  auto rep = aggregate(anns, {}, {"known#0"});
  REQUIRE(rep.rows.size() == 1);
  REQUIRE(rep.exclusions.size() == 1);
  CHECK(rep.exclusions[0].find("ghost#0") != std::string::npos);
}

TEST_CASE("aggregate is invariant under annotation order") {
  std::vector<Annotation> anns;
  for (size_t i = 0; i < 6; ++i)
    anns.push_back(ann("d#0", "a", "en-de", i, i % 2 ? std::vector<SpanAnnotation>{minor()}
                                                    : std::vector<SpanAnnotation>{}));
  auto fwd = aggregate(anns);
  std::reverse(anns.begin(), anns.end());
  auto rev = aggregate(anns);
  CHECK(fwd.rows[0].score_by_system.at("a") ==
        Catch::Approx(rev.rows[0].score_by_system.at("a")));
}

TEST_CASE("the row minimum is marked best and starred in the text table") {
  // three systems whose means land at 2.252, 3.177, 2.158: third wins
  std::vector<Annotation> anns;
  auto push_system = [&](const std::string& sys, int majors, int minors,
                         int punct, int clean) {
    size_t seg = 0;
    for (int i = 0; i < majors; ++i)
      anns.push_back(ann("d#0", sys, "en-de", seg++, {major()}));
    for (int i = 0; i < minors; ++i)
      anns.push_back(ann("d#0", sys, "en-de", seg++, {minor()}));
    for (int i = 0; i < punct; ++i)
      anns.push_back(ann("d#0", sys, "en-de", seg++,
                         {{0, 1, Severity::kMinor, "fluency/punctuation", "j"}}));
    for (int i = 0; i < clean; ++i)
      anns.push_back(ann("d#0", sys, "en-de", seg++));
  };
  // each over 1000 segments: 5*majors + minors + 0.1*punct == 1000*mean
  push_system("sysA", 400, 250, 20, 330);   // (2000+250+2)/1000 = 2.252
  push_system("sysB", 600, 175, 20, 205);   // (3000+175+2)/1000 = 3.177
  push_system("sysC", 400, 156, 20, 424);   // (2000+156+2)/1000 = 2.158
  auto rep = aggregate(anns);
  REQUIRE(rep.rows.size() == 1);
  const auto& row = rep.rows[0];
  CHECK(row.score_by_system.at("sysA") == Catch::Approx(2.252));
  CHECK(row.score_by_system.at("sysB") == Catch::Approx(3.177));
  CHECK(row.score_by_system.at("sysC") == Catch::Approx(2.158));
  CHECK(row.best_system == "sysC");

  auto text = report_to_text(rep);
  CHECK(text.find("2.158*") != std::string::npos);
  CHECK(text.find("2.252*") == std::string::npos);
  CHECK(text.find("3.177*") == std::string::npos);
}

TEST_CASE("rows sort ascending by each row's best score") {
  std::vector<Annotation> anns;
  anns.push_back(ann("d#0", "s", "en-ja", 0, {major()}));   // mean 5
  anns.push_back(ann("d#0", "s", "en-de", 0, {minor()}));   // mean 1
  anns.push_back(ann("d#0", "s", "en-cs", 0));              // mean 0
  auto rep = aggregate(anns);
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.rows[0].lang_pair == "en-cs");
  CHECK(rep.rows[1].lang_pair == "en-de");
  CHECK(rep.rows[2].lang_pair == "en-ja");
}

TEST_CASE("annotation and document JSON parsing") {
  auto a = annotation_from_json(nlohmann::json::parse(R"({
    "chunk_id": "d#0", "system": "s", "lang_pair": "en-de",
    "segment_index": 2,
    "spans": [{"start": 0, "end": 4, "severity": "major", "category": "accuracy"}]
  })"));
  CHECK(a.chunk_id == "d#0");
  CHECK(a.segment_index == 2);
  REQUIRE(a.spans.size() == 1);
  CHECK(a.spans[0].severity == Severity::kMajor);

  auto d = document_from_json(nlohmann::json::parse(R"({
    "doc_id": "doc1", "domain": "literary",
    "paragraphs": [["One.", "Two."], ["Three."]]
  })"));
  CHECK(d.domain == Domain::kLiterary);
  CHECK(d.paragraphs.size() == 2);

  CHECK_THROWS_AS(domain_from_name("poetry"), std::invalid_argument);
}
