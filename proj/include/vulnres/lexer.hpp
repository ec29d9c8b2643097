#pragma once

#include <string_view>
#include <vector>

namespace vulnres::lex {

enum class TokKind { Ident, Number, String, Char, Punct, Directive };

struct Token {
  TokKind kind;
  std::string_view text;
  size_t offset;  // byte offset into the source
  int line;       // 1-based line of the first byte
  int end_line;   // line of the last byte
  bool is(std::string_view s) const { return text == s; }
  bool ident(std::string_view s) const { return kind == TokKind::Ident && text == s; }
  bool punct(std::string_view s) const { return kind == TokKind::Punct && text == s; }
};

// Tokenizes C/C++ source. Comments and whitespace are dropped; preprocessor
// directives become a single Directive token spanning continuation lines.
// Never throws: unterminated literals run to end of line.
std::vector<Token> tokenize(std::string_view src);

// Like tokenize, but each Directive is replaced by the tokens of its body
// (the leading '#' is dropped), with offsets and lines relative to `src`.
std::vector<Token> tokenize_flat(std::string_view src);

struct Comment {
  size_t begin;
  size_t end;  // one past
};

// Byte ranges of all comments (strings and char literals are respected).
std::vector<Comment> find_comments(std::string_view src);

}  // namespace vulnres::lex
