#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mtkit/utf8.hpp"

namespace mtkit {

// Character span of one token, in Unicode scalar offsets. Half-open.
struct TokenSpan {
  size_t start = 0;
  size_t end = 0;
};

// Token counts throughout the pipeline are adapter-relative: the real
// model tokenizer is not available, so callers plug in their own.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::string name() const = 0;
  // Token spans over the Unicode scalars of `text`. Ascending, non-overlapping.
  virtual std::vector<TokenSpan> tokenize(std::string_view text) const = 0;

  size_t count(std::string_view text) const { return tokenize(text).size(); }
};

// Default adapter: maximal runs of non-space, non-punctuation scalars;
// each punctuation scalar is its own token.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::string name() const override { return "whitespace+punct"; }

  std::vector<TokenSpan> tokenize(std::string_view text) const override {
    auto decoded = utf8::decode(text);
    if (!decoded) throw std::invalid_argument("tokenize: malformed UTF-8");
    std::vector<TokenSpan> spans;
    const std::u32string& s = *decoded;
    size_t i = 0;
    while (i < s.size()) {
      if (is_space(s[i])) {
        ++i;
        continue;
      }
      if (is_punct(s[i])) {
        spans.push_back({i, i + 1});
        ++i;
        continue;
      }
      size_t j = i;
      while (j < s.size() && !is_space(s[j]) && !is_punct(s[j])) ++j;
      spans.push_back({i, j});
      i = j;
    }
    return spans;
  }

 private:
  static bool is_space(char32_t c) {
    return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' ||
           c == U'\f' || c == U'\v' || c == 0x00A0;
  }
  static bool is_punct(char32_t c) {
    if (c > 0x7F) return false;  // non-ASCII treated as word characters
    static constexpr std::string_view kPunct = "!\"#$%&'()*+,-./:;<=>?@[\\]^`{|}~";
    return kPunct.find(static_cast<char>(c)) != std::string_view::npos;
  }
};

inline const Tokenizer& default_tokenizer() {
  static const WhitespaceTokenizer tok;
  return tok;
}

}  // namespace mtkit
