#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <string>
#include <vector>

#include "mtkit/hash.hpp"
#include "mtkit/metrics.hpp"

using namespace mtkit;
using namespace mtkit::metrics;

namespace {

// Independent brute-force ChrF oracle. Counts n-grams via explicit
// enumeration into vectors and computes clipped overlap by pairwise
// matching, deliberately avoiding the implementation's map-based path.
double chrf_oracle(std::string hyp, std::string ref, size_t max_order,
                   double beta, bool strip_ws) {
  auto strip = [&](std::string s) {
    if (!strip_ws) return s;
    std::string out;
    for (char c : s)
      if (c != ' ' && c != '\t' && c != '\n' && c != '\r') out.push_back(c);
    return out;
  };
  hyp = strip(std::move(hyp));
  ref = strip(std::move(ref));

  auto ngrams = [](const std::string& s, size_t n) {
    std::vector<std::string> out;
    if (s.size() >= n)
      for (size_t i = 0; i + n <= s.size(); ++i) out.push_back(s.substr(i, n));
    return out;
  };

  double psum = 0, rsum = 0;
  size_t used = 0;
  for (size_t n = 1; n <= max_order; ++n) {
    auto hg = ngrams(hyp, n);
    auto rg = ngrams(ref, n);
    if (rg.empty()) continue;
    std::vector<bool> taken(rg.size(), false);
    size_t matches = 0;
    for (const auto& g : hg)
      for (size_t j = 0; j < rg.size(); ++j)
        if (!taken[j] && rg[j] == g) {
          taken[j] = true;
          ++matches;
          break;
        }
    psum += hg.empty() ? 0.0 : double(matches) / hg.size();
    rsum += double(matches) / rg.size();
    ++used;
  }
  if (!used) return 0.0;
  double p = psum / used, r = rsum / used;
  if (p + r == 0) return 0.0;
  double b2 = beta * beta;
  return 100.0 * (1 + b2) * p * r / (b2 * p + r);
}

std::string random_ascii(SplitMix64& rng, size_t max_len) {
  static constexpr char kAlpha[] = "abcdef gh";
  size_t len = 1 + rng.below(max_len);
  std::string s;
  for (size_t i = 0; i < len; ++i) s.push_back(kAlpha[rng.below(sizeof(kAlpha) - 1)]);
  return s;
}

}  // namespace

TEST_CASE("chrf: identical strings score 100") {
  CHECK(chrf("abcdef", "abcdef") == Catch::Approx(100.0).margin(1e-9));
  CHECK(chrf("the quick fox", "the quick fox") == Catch::Approx(100.0).margin(1e-9));
}

TEST_CASE("chrf: disjoint characters score 0") {
  CHECK(chrf("aaaa", "bbbb") == 0.0);
  CHECK(chrf("xyz", "abc") == 0.0);
}

TEST_CASE("chrf: hand-checkable small pair matches oracle") {
  ChrFConfig cfg;
  cfg.max_order = 2;
  double got = chrf("abcd", "abce", cfg);
  double want = chrf_oracle("abcd", "abce", 2, 2.0, true);
  CHECK(got == Catch::Approx(want).margin(1e-9));
}

TEST_CASE("chrf matches brute-force oracle on random pairs") {
  SplitMix64 rng(20250825);
  for (int i = 0; i < 200; ++i) {
    auto h = random_ascii(rng, 30);
    auto r = random_ascii(rng, 30);
    double got = chrf(h, r);
    double want = chrf_oracle(h, r, 6, 2.0, true);
    INFO("hyp=" << h << " ref=" << r);
    CHECK(got == Catch::Approx(want).margin(1e-9));
  }
}

TEST_CASE("chrf is whitespace-invariant when stripping") {
  CHECK(chrf("ab cd", "abcd") == Catch::Approx(chrf("abcd", "abcd")).margin(1e-9));
  CHECK(chrf("a b c", "ab c") == Catch::Approx(chrf("abc", "abc")).margin(1e-9));
}

TEST_CASE("chrf rejects empty reference") {
  CHECK_THROWS_AS(chrf("abc", ""), std::invalid_argument);
  CHECK_THROWS_AS(chrf("abc", "   "), std::invalid_argument);  // stripped empty
}

TEST_CASE("chrf handles multibyte UTF-8 as scalar values") {
  // same score whether characters are 1-byte or multi-byte
  CHECK(chrf("héllo", "héllo") == Catch::Approx(100.0).margin(1e-9));
  CHECK(chrf("日本語", "日本語") == Catch::Approx(100.0).margin(1e-9));
  CHECK(chrf("日本", "中国") == 0.0);
}

TEST_CASE("mqm: empty span list scores 0") {
  CHECK(mqm_score({}) == 0.0);
}

TEST_CASE("mqm: default weights sum majors and minors") {
  std::vector<SpanAnnotation> spans{
      {0, 3, Severity::kMajor, "accuracy/mistranslation", "j"},
      {5, 7, Severity::kMinor, "style/awkward", "j"}};
  CHECK(mqm_score(spans) == Catch::Approx(6.0));
}

TEST_CASE("mqm: minor fluency/punctuation weighs 0.1") {
  std::vector<SpanAnnotation> spans{
      {0, 1, Severity::kMinor, "fluency/punctuation", "j"}};
  CHECK(mqm_score(spans) == Catch::Approx(0.1));
}

TEST_CASE("mqm: non-translation caps the segment and suppresses the rest") {
  std::vector<SpanAnnotation> spans{
      {0, 3, Severity::kNonTranslation, "", "j"},
      {4, 6, Severity::kMajor, "accuracy/mistranslation", "j"},
      {7, 9, Severity::kMajor, "accuracy/omission", "j"}};
  CHECK(mqm_score(spans) == Catch::Approx(25.0));
}

TEST_CASE("mqm is permutation invariant") {
  std::vector<SpanAnnotation> spans{
      {0, 3, Severity::kMajor, "accuracy/mistranslation", "j"},
      {5, 7, Severity::kMinor, "style/awkward", "j"},
      {8, 9, Severity::kMinor, "fluency/punctuation", "j"}};
  double a = mqm_score(spans);
  std::swap(spans[0], spans[2]);
  CHECK(mqm_score(spans) == Catch::Approx(a));
}

TEST_CASE("mqm weight table ordering is validated") {
  MqmWeightTable w;
  w.major = 30.0;  // above non_translation
  CHECK_THROWS_AS(mqm_score({}, w), std::invalid_argument);
}

TEST_CASE("rescale formulas") {
  CHECK(rescale(0.0, RescaleKind::kMetricXQe) == 5.0);
  CHECK(rescale(25.0, RescaleKind::kMetricXQe) == -20.0);
  CHECK(rescale(43.7, RescaleKind::kChrF) == Catch::Approx(87.4));
  CHECK(rescale(1.25, RescaleKind::kIdentity) == 1.25);
}

TEST_CASE("rescaled QE argmax equals raw argmin") {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> raw;
    for (int i = 0; i < 32; ++i) raw.push_back(25.0 * rng.unit());
    size_t argmin = 0, argmax = 0;
    for (size_t i = 1; i < raw.size(); ++i) {
      if (raw[i] < raw[argmin]) argmin = i;
      if (rescale(raw[i], RescaleKind::kMetricXQe) >
          rescale(raw[argmax], RescaleKind::kMetricXQe))
        argmax = i;
    }
    CHECK(argmin == argmax);
  }
}
