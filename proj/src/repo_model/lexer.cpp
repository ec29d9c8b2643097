#include "vulnres/lexer.hpp"

#include "vulnres/util/text.hpp"

namespace vulnres::lex {
namespace {

class Scanner {
 public:
  explicit Scanner(std::string_view src) : src_(src) {}

  void run(std::vector<Token>* tokens, std::vector<Comment>* comments) {
    bool line_start = true;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\n') {
        ++line_;
        ++pos_;
        line_start = true;
        continue;
      }
      if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
        ++pos_;
        continue;
      }
      if (c == '\\' && peek(1) == '\n') {
        pos_ += 2;
        ++line_;
        continue;
      }
      if (c == '/' && peek(1) == '/') {
        size_t b = pos_;
        skip_line_comment();
        if (comments) comments->push_back({b, pos_});
        continue;
      }
      if (c == '/' && peek(1) == '*') {
        size_t b = pos_;
        skip_block_comment();
        if (comments) comments->push_back({b, pos_});
        continue;
      }
      size_t begin = pos_;
      int begin_line = line_;
      TokKind kind;
      if (c == '#' && line_start) {
        kind = TokKind::Directive;
        scan_directive(comments);
      } else if (text::is_ident_start(c)) {
        kind = scan_identifier_or_prefixed_literal();
      } else if ((c >= '0' && c <= '9') || (c == '.' && is_digit(peek(1)))) {
        kind = TokKind::Number;
        scan_number();
      } else if (c == '"') {
        kind = TokKind::String;
        scan_quoted('"');
      } else if (c == '\'') {
        kind = TokKind::Char;
        scan_quoted('\'');
      } else {
        kind = TokKind::Punct;
        scan_punct();
      }
      line_start = false;
      if (tokens) {
        size_t end = pos_;
        if (kind == TokKind::Directive) {
          while (end > begin && (src_[end - 1] == '\r')) --end;
        }
        tokens->push_back({kind, src_.substr(begin, end - begin), begin, begin_line, last_line(begin, end)});
      }
    }
  }

 private:
  static bool is_digit(char c) { return c >= '0' && c <= '9'; }

  char peek(size_t k) const { return pos_ + k < src_.size() ? src_[pos_ + k] : '\0'; }

  int last_line(size_t begin, size_t end) const {
    int l = line_;
    // line_ already counts newlines inside the token; back off if it ended on one.
    if (end > begin && src_[end - 1] == '\n') --l;
    return l;
  }

  void skip_line_comment() {
    while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
  }

  void skip_block_comment() {
    pos_ += 2;
    while (pos_ < src_.size()) {
      if (src_[pos_] == '*' && peek(1) == '/') {
        pos_ += 2;
        return;
      }
      if (src_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }

  void scan_directive(std::vector<Comment>* comments) {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\n') return;
      if (c == '\\' && (peek(1) == '\n' || (peek(1) == '\r' && peek(2) == '\n'))) {
        pos_ += peek(1) == '\r' ? 3 : 2;
        ++line_;
        continue;
      }
      if (c == '/' && peek(1) == '*') {
        size_t b = pos_;
        skip_block_comment();
        if (comments) comments->push_back({b, pos_});
        continue;
      }
      if (c == '/' && peek(1) == '/') {
        size_t b = pos_;
        skip_line_comment();
        if (comments) comments->push_back({b, pos_});
        return;
      }
      if (c == '"' || c == '\'') {
        scan_quoted(c);
        continue;
      }
      ++pos_;
    }
  }

  TokKind scan_identifier_or_prefixed_literal() {
    size_t b = pos_;
    while (pos_ < src_.size() && text::is_ident_char(src_[pos_])) ++pos_;
    std::string_view id = src_.substr(b, pos_ - b);
    char next = pos_ < src_.size() ? src_[pos_] : '\0';
    bool prefix = id == "L" || id == "u" || id == "U" || id == "u8" || id == "R" || id == "LR" ||
                  id == "uR" || id == "UR" || id == "u8R";
    if (prefix && next == '"') {
      if (id.back() == 'R') scan_raw_string();
      else scan_quoted('"');
      return TokKind::String;
    }
    if (prefix && next == '\'' && id.back() != 'R') {
      scan_quoted('\'');
      return TokKind::Char;
    }
    return TokKind::Ident;
  }

  void scan_raw_string() {
    // at '"' of R"delim( ... )delim"
    size_t open = src_.find('(', pos_);
    if (open == std::string_view::npos || open - pos_ > 17) {
      scan_quoted('"');
      return;
    }
    std::string close = ")" + std::string(src_.substr(pos_ + 1, open - pos_ - 1)) + "\"";
    size_t end = src_.find(close, open);
    size_t stop = end == std::string_view::npos ? src_.size() : end + close.size();
    for (size_t i = pos_; i < stop; ++i) {
      if (src_[i] == '\n') ++line_;
    }
    pos_ = stop;
  }

  void scan_number() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if ((c == '+' || c == '-') && pos_ > 0) {
        char prev = src_[pos_ - 1];
        if (prev == 'e' || prev == 'E' || prev == 'p' || prev == 'P') {
          ++pos_;
          continue;
        }
        return;
      }
      if (text::is_ident_char(c) || c == '.' || (c == '\'' && text::is_ident_char(peek(1)))) {
        ++pos_;
        continue;
      }
      return;
    }
  }

  void scan_quoted(char quote) {
    ++pos_;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\\' && pos_ + 1 < src_.size()) {
        if (src_[pos_ + 1] == '\n') ++line_;
        pos_ += 2;
        continue;
      }
      if (c == '\n') return;  // unterminated: stop at end of line
      ++pos_;
      if (c == quote) return;
    }
  }

  void scan_punct() {
    std::string_view rest = src_.substr(pos_);
    for (std::string_view p : {"...", "::", "->"}) {
      if (rest.substr(0, p.size()) == p) {
        pos_ += p.size();
        return;
      }
    }
    ++pos_;
  }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> tokens;
  Scanner(src).run(&tokens, nullptr);
  return tokens;
}

std::vector<Token> tokenize_flat(std::string_view src) {
  std::vector<Token> out;
  for (const Token& t : tokenize(src)) {
    if (t.kind != TokKind::Directive) {
      out.push_back(t);
      continue;
    }
    size_t hash = t.text.find('#');
    size_t skip = hash == std::string_view::npos ? 0 : hash + 1;
    for (Token inner : tokenize(t.text.substr(skip))) {
      inner.offset += t.offset + skip;
      inner.end_line += t.line - 1;
      inner.line += t.line - 1;
      out.push_back(inner);
    }
  }
  return out;
}

std::vector<Comment> find_comments(std::string_view src) {
  std::vector<Comment> comments;
  Scanner(src).run(nullptr, &comments);
  return comments;
}

}  // namespace vulnres::lex
