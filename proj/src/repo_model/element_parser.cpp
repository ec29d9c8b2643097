#include <algorithm>
#include <set>

#include "vulnres/lexer.hpp"
#include "vulnres/repo_model.hpp"
#include "vulnres/util/text.hpp"

namespace vulnres {
namespace {

using lex::TokKind;
using lex::Token;

constexpr size_t npos = static_cast<size_t>(-1);

const std::set<std::string_view>& non_name_keywords() {
  static const std::set<std::string_view> kw{
      "if", "for", "while", "switch", "return", "sizeof", "alignof", "decltype", "typeof",
      "__typeof__", "case", "do", "else", "new", "delete", "throw", "catch", "static_assert",
      "defined", "int", "char", "short", "long", "unsigned", "signed", "float", "double", "void",
      "bool", "const", "volatile", "static", "extern", "inline", "register", "auto", "struct",
      "class", "union", "enum", "typedef", "constexpr", "mutable", "thread_local", "restrict",
      "__restrict", "__restrict__", "final", "override", "noexcept", "virtual", "explicit",
      "operator", "_Noreturn", "__inline", "__inline__", "consteval", "constinit"};
  return kw;
}

// Identifiers whose following parenthesized group is never a parameter list.
bool is_attribute_like(const Token& t) {
  static const std::set<std::string_view> attrs{
      "__attribute__", "__attribute", "__declspec", "alignas", "_Alignas", "__asm__", "__asm",
      "asm", "__extension__", "noexcept", "throw", "decltype", "__typeof__", "typeof",
      "_Static_assert", "requires", "__nonnull", "__THROW", "__wur"};
  return t.kind == TokKind::Ident && attrs.count(t.text) > 0;
}

std::optional<ElementKind> tag_kind(const Token& t) {
  if (t.kind != TokKind::Ident) return std::nullopt;
  if (t.text == "struct") return ElementKind::Struct;
  if (t.text == "class") return ElementKind::Class;
  if (t.text == "union") return ElementKind::Union;
  if (t.text == "enum") return ElementKind::Enum;
  return std::nullopt;
}

struct Parsed {
  CodeElement element;
  size_t body_begin = npos;  // byte offset of '{' for function bodies
  size_t body_end = npos;    // one past '}'
  size_t order = 0;
};

class ElementParser {
 public:
  ElementParser(std::string_view src, std::string file)
      : src_(src), file_(std::move(file)), toks_(lex::tokenize(src)) {}

  std::vector<Parsed> run() {
    size_t i = 0;
    scope(i, toks_.size(), "", false);
    std::stable_sort(out_.begin(), out_.end(), [](const Parsed& a, const Parsed& b) {
      if (a.element.lines.start != b.element.lines.start) return a.element.lines.start < b.element.lines.start;
      if (a.element.lines.end != b.element.lines.end) return a.element.lines.end > b.element.lines.end;
      return a.order < b.order;
    });
    return std::move(out_);
  }

 private:
  const Token& tok(size_t i) const { return toks_[i]; }
  bool punct_at(size_t i, std::string_view p) const { return i < toks_.size() && toks_[i].punct(p); }

  size_t match_pair(size_t i, std::string_view open, std::string_view close) const {
    int depth = 0;
    for (size_t k = i; k < toks_.size(); ++k) {
      if (toks_[k].punct(open)) ++depth;
      else if (toks_[k].punct(close) && --depth == 0) return k;
    }
    return toks_.empty() ? 0 : toks_.size() - 1;
  }
  size_t match_brace(size_t i) const { return match_pair(i, "{", "}"); }
  size_t match_paren(size_t i) const { return match_pair(i, "(", ")"); }

  static std::string join_qual(const std::string& a, const std::string& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    return a + "::" + b;
  }

  void emit(std::string name, std::string qual, ElementKind kind, int first, int last,
            size_t body_begin = npos, size_t body_end = npos) {
    if (name.empty()) return;
    Parsed p;
    p.element.name = std::move(name);
    p.element.qualifier = std::move(qual);
    p.element.kind = kind;
    p.element.file = file_;
    p.element.lines = {first, std::max(first, last)};
    p.element.text = std::string(text::slice_lines(src_, p.element.lines.start, p.element.lines.end));
    p.body_begin = body_begin;
    p.body_end = body_end;
    p.order = out_.size();
    out_.push_back(std::move(p));
  }

  void directive(const Token& t) {
    std::string_view d = t.text.substr(1);
    size_t p = 0;
    while (p < d.size() && (d[p] == ' ' || d[p] == '\t')) ++p;
    if (d.substr(p, 6) != "define") return;
    p += 6;
    if (p >= d.size() || (d[p] != ' ' && d[p] != '\t')) return;
    while (p < d.size() && (d[p] == ' ' || d[p] == '\t')) ++p;
    size_t b = p;
    while (p < d.size() && text::is_ident_char(d[p])) ++p;
    if (p == b || !text::is_ident_start(d[b])) return;
    emit(std::string(d.substr(b, p - b)), "", ElementKind::Macro, t.line, t.end_line);
  }

  void scope(size_t& i, size_t end, const std::string& qual, bool in_class) {
    while (i < end) {
      const Token& t = tok(i);
      if (t.kind == TokKind::Directive) {
        directive(t);
        ++i;
        continue;
      }
      if (t.punct(";") || t.punct("}")) {
        ++i;
        continue;
      }
      if (t.ident("namespace")) {
        size_t j = i + 1;
        std::string name;
        while (j < end && (tok(j).kind == TokKind::Ident || tok(j).punct("::"))) {
          if (tok(j).kind == TokKind::Ident && tok(j).text != "inline") name += tok(j).text;
          else if (tok(j).punct("::")) name += "::";
          ++j;
        }
        if (j < end && tok(j).punct("{")) {
          size_t close = std::min(match_brace(j), end);
          size_t k = j + 1;
          scope(k, close, join_qual(qual, name), false);
          i = close + 1;
        } else {
          while (j < end && !tok(j).punct(";")) ++j;
          i = j + 1;
        }
        continue;
      }
      if (t.ident("extern") && i + 2 < end && tok(i + 1).kind == TokKind::String && tok(i + 2).punct("{")) {
        size_t close = std::min(match_brace(i + 2), end);
        size_t k = i + 3;
        scope(k, close, qual, in_class);
        i = close + 1;
        continue;
      }
      if (in_class && i + 1 < end && tok(i + 1).punct(":") &&
          (t.ident("public") || t.ident("private") || t.ident("protected"))) {
        i += 2;
        continue;
      }
      size_t from = i;
      if (t.ident("template") && punct_at(i + 1, "<")) {
        from = skip_angles(i + 1, end);
      }
      i = declaration(i, from, end, qual, in_class);
    }
  }

  size_t skip_angles(size_t i, size_t end) const {
    int depth = 0;
    for (size_t k = i; k < end; ++k) {
      if (tok(k).punct("(")) {
        k = match_paren(k);
        continue;
      }
      if (tok(k).punct("<")) ++depth;
      if (tok(k).punct(">") && --depth == 0) return k + 1;
      if (tok(k).punct(";") || tok(k).punct("{")) return k;
    }
    return end;
  }

  // A parenthesized group that ends a line and is followed by something that
  // cannot continue a declarator is a macro invocation used as a statement.
  bool is_macro_statement(size_t open) const {
    size_t close = match_paren(open);
    if (close + 1 >= toks_.size()) return false;
    const Token& next = tok(close + 1);
    if (next.line == tok(close).end_line) return false;
    if (next.kind != TokKind::Ident) return false;
    static const std::set<std::string_view> trailing{"const", "noexcept", "override", "final",
                                                      "throw", "requires", "try", "volatile",
                                                      "__attribute__", "__THROW", "__wur"};
    if (trailing.count(next.text)) return false;
    return open > 0 && tok(open - 1).kind == TokKind::Ident;
  }

  bool near_operator(size_t k) const {
    for (size_t back = 1; back <= 3 && back <= k; ++back) {
      if (tok(k - back).ident("operator")) return true;
    }
    return false;
  }

  struct FunctionName {
    std::string name;
    std::string qual;
  };

  std::optional<FunctionName> function_name(size_t paren) const {
    if (paren == 0) return std::nullopt;
    size_t n = paren - 1;
    std::string name;
    if (tok(n).kind == TokKind::Ident) {
      if (non_name_keywords().count(tok(n).text)) return std::nullopt;
      name = std::string(tok(n).text);
      if (n > 0 && tok(n - 1).punct("~")) {
        name = "~" + name;
        --n;
      }
    } else {
      // operator symbols: operator==, operator(), operator[] ...
      size_t k = n;
      int steps = 0;
      while (k > 0 && steps < 3 && !tok(k).ident("operator")) {
        --k;
        ++steps;
      }
      if (!tok(k).ident("operator")) return std::nullopt;
      for (size_t m = k; m <= n; ++m) name += tok(m).text;
      n = k;
    }
    std::string qual;
    while (n >= 2 && tok(n - 1).punct("::")) {
      size_t s = n - 2;
      if (tok(s).punct(">")) {
        int depth = 0;
        while (s > 0) {
          if (tok(s).punct(">")) ++depth;
          if (tok(s).punct("<") && --depth == 0) break;
          --s;
        }
        if (s == 0) break;
        --s;
      }
      if (tok(s).kind != TokKind::Ident) break;
      qual = qual.empty() ? std::string(tok(s).text) : std::string(tok(s).text) + "::" + qual;
      n = s;
    }
    return FunctionName{name, qual};
  }

  size_t declaration(size_t start, size_t j, size_t end, const std::string& qual, bool in_class) {
    int paren = 0;
    int bracket = 0;
    size_t eq = npos;
    size_t first_paren = npos;
    bool params_closed = false;
    bool init_list = false;
    size_t k = j;
    while (k < end) {
      const Token& t = tok(k);
      if (t.kind == TokKind::Directive) {
        directive(t);
        if (k == start) return k + 1;
        ++k;
        continue;
      }
      if (is_attribute_like(t) && punct_at(k + 1, "(")) {
        k = match_paren(k + 1) + 1;
        continue;
      }
      if (t.punct("[") && punct_at(k + 1, "[")) {
        k = match_pair(k, "[", "]") + 1;
        continue;
      }
      if (t.punct("(")) {
        if (paren == 0 && bracket == 0 && first_paren == npos && eq == npos) {
          if (is_macro_statement(k)) return match_paren(k) + 1;
          first_paren = k;
        }
        ++paren;
      } else if (t.punct(")")) {
        if (--paren == 0 && first_paren != npos) params_closed = true;
        if (paren < 0) paren = 0;
      } else if (t.punct("[")) {
        ++bracket;
      } else if (t.punct("]")) {
        bracket = std::max(0, bracket - 1);
      } else if (paren == 0 && bracket == 0) {
        if (t.punct("=") && eq == npos && !near_operator(k)) eq = k;
        if (t.punct(":") && params_closed) init_list = true;
        if (t.punct(";")) {
          simple_declaration(start, j, k, eq, first_paren, in_class);
          return k + 1;
        }
        if (t.punct("}")) return k;  // unbalanced; let the scope consume it
        if (t.punct("{")) {
          if (eq != npos) {
            k = match_brace(k) + 1;
            continue;
          }
          if (init_list && k > 0 && (tok(k - 1).kind == TokKind::Ident || tok(k - 1).punct(">"))) {
            k = match_brace(k) + 1;
            continue;
          }
          return brace(start, j, k, end, first_paren, qual, in_class);
        }
      }
      ++k;
    }
    return end;
  }

  size_t brace(size_t start, size_t j, size_t b, size_t end, size_t first_paren,
               const std::string& qual, bool in_class) {
    size_t close = std::min(match_brace(b), end == 0 ? 0 : end - 1);
    if (close < b) close = b;
    // Tag definition: struct/class/union/enum keyword with no parameter list.
    size_t kw = npos;
    bool is_typedef = false;
    for (size_t k = j; k < b; ++k) {
      if (tok(k).ident("typedef")) is_typedef = true;
      if (is_attribute_like(tok(k)) && punct_at(k + 1, "(")) {
        k = match_paren(k + 1);
        continue;
      }
      if (tag_kind(tok(k))) {
        kw = k;
        break;
      }
    }
    if (kw != npos && first_paren == npos) {
      return tag_definition(start, kw, b, close, end, qual, in_class, is_typedef);
    }
    if (first_paren != npos && first_paren < b && !punct_at(first_paren + 1, "*") &&
        !punct_at(first_paren + 1, "^")) {
      if (auto fn = function_name(first_paren)) {
        emit(fn->name, join_qual(qual, fn->qual), ElementKind::Function, tok(start).line,
             tok(close).end_line, tok(b).offset, tok(close).offset + 1);
      }
    }
    return close + 1;
  }

  size_t tag_definition(size_t start, size_t kw, size_t b, size_t close, size_t end,
                        const std::string& qual, bool in_class, bool is_typedef) {
    ElementKind kind = *tag_kind(tok(kw));
    std::string name;
    for (size_t k = kw + 1; k < b; ++k) {
      const Token& t = tok(k);
      if (is_attribute_like(t) && punct_at(k + 1, "(")) {
        k = match_paren(k + 1);
        continue;
      }
      if (t.punct("[") && punct_at(k + 1, "[")) {
        k = match_pair(k, "[", "]");
        continue;
      }
      if (t.punct(":")) break;
      if (t.kind != TokKind::Ident) continue;
      if (t.text == "final" || t.text == "class" || t.text == "struct" || t.text == "alignas") continue;
      name = std::string(t.text);
    }
    if (kind != ElementKind::Enum) {
      size_t k = b + 1;
      scope(k, close, join_qual(qual, name), true);
    }
    // Declarators after the closing brace, up to ';'.
    size_t k = close + 1;
    std::vector<std::string> declarators;
    int paren = 0;
    while (k < end && !(paren == 0 && tok(k).punct(";"))) {
      const Token& t = tok(k);
      if (t.punct("(")) ++paren;
      if (t.punct(")")) --paren;
      if (t.punct("{") || t.punct("}") || t.kind == TokKind::Directive) break;
      if (t.punct("=")) {
        while (k < end && !tok(k).punct(",") && !tok(k).punct(";")) {
          if (tok(k).punct("{")) k = match_brace(k);
          ++k;
        }
        continue;
      }
      if (t.kind == TokKind::Ident && !non_name_keywords().count(t.text) && !is_attribute_like(t)) {
        if (declarators.empty() || (k > 0 && (tok(k - 1).punct(",") || tok(k - 1).punct("*") ||
                                              tok(k - 1).punct("}") || tok(k - 1).punct("&")))) {
          declarators.emplace_back(t.text);
        }
      }
      ++k;
    }
    bool has_semi = k < end && tok(k).punct(";");
    int last_line = has_semi ? tok(k).end_line : tok(close).end_line;
    if (name.empty() && is_typedef && !declarators.empty()) name = declarators.front();
    emit(name, qual, kind, tok(start).line, last_line);
    if (!is_typedef && !in_class) {
      for (const auto& d : declarators) emit(d, qual, ElementKind::GlobalVariable, tok(start).line, last_line);
    }
    return has_semi ? k + 1 : close + 1;
  }

  void simple_declaration(size_t start, size_t j, size_t semi, size_t eq, size_t first_paren,
                          bool in_class) {
    if (in_class || semi <= j) return;
    static const std::set<std::string_view> skip_first{"typedef", "using", "static_assert", "friend",
                                                       "extern", "template", "namespace", "return",
                                                       "goto", "_Static_assert", "export", "import"};
    if (tok(j).kind != TokKind::Ident || skip_first.count(tok(j).text)) return;
    for (size_t k = j; k < semi; ++k) {
      if (tok(k).ident("typedef") || tok(k).ident("extern")) return;
    }
    std::string fnptr_name;
    if (first_paren != npos && (eq == npos || first_paren < eq)) {
      if (!(punct_at(first_paren + 1, "*") || punct_at(first_paren + 1, "^"))) return;  // prototype
      for (size_t k = first_paren + 1; k < semi && !tok(k).punct(")"); ++k) {
        if (tok(k).kind == TokKind::Ident && !non_name_keywords().count(tok(k).text)) {
          fnptr_name = std::string(tok(k).text);
          break;
        }
      }
      if (fnptr_name.empty()) return;
      emit(fnptr_name, "", ElementKind::GlobalVariable, tok(start).line, tok(semi).end_line);
      return;
    }
    if (tag_kind(tok(j)) && semi - j <= 2) return;  // forward declaration

    // Split at depth-0 commas; name = last plain identifier before '=', '[' or ':'.
    std::vector<std::string> names;
    std::string current;
    int depth = 0;
    bool in_init = false;
    size_t segment_tokens = 0;
    bool first_segment = true;
    auto flush = [&] {
      if (!current.empty() && (!first_segment || segment_tokens >= 2)) names.push_back(current);
      current.clear();
      segment_tokens = 0;
      in_init = false;
      first_segment = false;
    };
    for (size_t k = j; k < semi; ++k) {
      const Token& t = tok(k);
      if (is_attribute_like(t) && punct_at(k + 1, "(")) {
        k = match_paren(k + 1);
        continue;
      }
      if (t.punct("(") || t.punct("[") || t.punct("{")) {
        if (t.punct("[")) in_init = in_init || depth == 0;
        ++depth;
        continue;
      }
      if (t.punct(")") || t.punct("]") || t.punct("}")) {
        --depth;
        continue;
      }
      if (depth > 0) continue;
      if (t.punct(",")) {
        flush();
        continue;
      }
      if (t.punct("=") || t.punct(":")) in_init = true;
      if (in_init) continue;
      ++segment_tokens;
      if (t.kind == TokKind::Ident && !non_name_keywords().count(t.text)) current = std::string(t.text);
    }
    flush();
    for (auto& n : names) emit(n, "", ElementKind::GlobalVariable, tok(start).line, tok(semi).end_line);
  }

  std::string_view src_;
  std::string file_;
  std::vector<Token> toks_;
  std::vector<Parsed> out_;
};

}  // namespace

std::vector<CodeElement> parse_source(std::string_view content, const std::string& file) {
  std::vector<CodeElement> out;
  for (auto& p : ElementParser(content, file).run()) out.push_back(std::move(p.element));
  return out;
}

std::string skeletonize_source(std::string_view content) {
  auto parsed = ElementParser(content, "").run();
  std::vector<std::pair<size_t, size_t>> bodies;
  for (const auto& p : parsed) {
    if (p.element.kind == ElementKind::Function && p.body_begin != npos) bodies.emplace_back(p.body_begin, p.body_end);
  }
  std::sort(bodies.begin(), bodies.end());
  static constexpr std::string_view kPlaceholder = "{ ... }";
  std::string out;
  out.reserve(content.size());
  size_t pos = 0;
  for (const auto& [b, e] : bodies) {
    if (b < pos) continue;  // nested in an already elided body
    out.append(content.substr(pos, b - pos));
    if (e - b > kPlaceholder.size()) out.append(kPlaceholder);
    else out.append(content.substr(b, e - b));
    pos = e;
  }
  out.append(content.substr(pos));
  return out;
}

}  // namespace vulnres
