#include <algorithm>

#include <fmt/format.h>

#include "vulnres/edit_engine.hpp"
#include "vulnres/error.hpp"
#include "vulnres/lexer.hpp"
#include "vulnres/symbol_analysis.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;

namespace vulnres {
namespace {

constexpr std::string_view kFindDefinition = "FIND_DEFINITION";
constexpr std::string_view kFindReferences = "FIND_REFERENCES";

struct StrippedReplace {
  std::vector<std::string_view> tokens;
  // index into tokens -> marker kind
  std::vector<std::pair<size_t, QueryKind>> marks;
};

StrippedReplace strip_markers(std::string_view replace, const std::string& file) {
  StrippedReplace out;
  auto toks = lex::tokenize_flat(replace);
  for (size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i];
    bool def = t.ident(kFindDefinition);
    if (!def && !t.ident(kFindReferences)) {
      out.tokens.push_back(t.text);
      continue;
    }
    if (i + 1 >= toks.size() || !toks[i + 1].punct("(")) {
      throw Error(ErrorCode::MalformedBlock, fmt::format("{} in {} is not followed by '('", t.text, file));
    }
    // Collect up to the matching ')'.
    size_t j = i + 2;
    int depth = 1;
    std::vector<size_t> inner;
    for (; j < toks.size(); ++j) {
      if (toks[j].punct("(")) ++depth;
      if (toks[j].punct(")") && --depth == 0) break;
      inner.push_back(j);
    }
    if (j == toks.size()) {
      throw Error(ErrorCode::MalformedBlock, fmt::format("unbalanced {}( in {}", t.text, file));
    }
    if (inner.size() != 1 || toks[inner[0]].kind != lex::TokKind::Ident) {
      throw Error(ErrorCode::MalformedBlock,
                  fmt::format("{} in {} must wrap a single identifier", t.text, file));
    }
    out.marks.emplace_back(out.tokens.size(), def ? QueryKind::Definition : QueryKind::References);
    out.tokens.push_back(toks[inner[0]].text);
    i = j;
  }
  return out;
}

// LCS alignment; result[i] is the index in `b` matched to a[i], or npos.
std::vector<size_t> align(const std::vector<std::string_view>& a, const std::vector<std::string_view>& b) {
  const size_t n = a.size();
  const size_t m = b.size();
  std::vector<std::vector<uint32_t>> dp(n + 1, std::vector<uint32_t>(m + 1, 0));
  for (size_t i = n; i-- > 0;) {
    for (size_t j = m; j-- > 0;) {
      dp[i][j] = a[i] == b[j] ? dp[i + 1][j + 1] + 1 : std::max(dp[i + 1][j], dp[i][j + 1]);
    }
  }
  std::vector<size_t> out(n, std::string::npos);
  size_t i = 0;
  size_t j = 0;
  while (i < n && j < m) {
    if (a[i] == b[j] && dp[i][j] == dp[i + 1][j + 1] + 1) {
      out[i++] = j++;
    } else if (dp[i + 1][j] >= dp[i][j + 1]) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

std::pair<int, int> line_col(const std::vector<size_t>& starts, size_t offset) {
  auto it = std::upper_bound(starts.begin(), starts.end(), offset);
  size_t line = static_cast<size_t>(it - starts.begin());
  return {static_cast<int>(line), static_cast<int>(offset - starts[line - 1]) + 1};
}

}  // namespace

std::string_view to_string(QueryKind kind) {
  return kind == QueryKind::Definition ? kFindDefinition : kFindReferences;
}

std::vector<MarkerQuery> plan_queries(const fs::path& root, std::string_view edit_blocks) {
  auto edits = parse_edit_blocks(edit_blocks);
  std::vector<MarkerQuery> queries;
  for (const auto& e : edits) {
    fs::path path = root / e.file;
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw Error(ErrorCode::FileNotFound, e.file);
    std::string content = text::read_file(path);
    TextMatch match = locate_search_text(content, e.search, e.file);
    StrippedReplace stripped = strip_markers(e.replace, e.file);
    if (stripped.marks.empty()) continue;

    std::string_view region = std::string_view(content).substr(match.begin, match.end - match.begin);
    auto region_toks = lex::tokenize_flat(region);
    std::vector<std::string_view> region_text;
    region_text.reserve(region_toks.size());
    for (const auto& t : region_toks) region_text.push_back(t.text);
    auto mapping = align(stripped.tokens, region_text);
    auto starts = text::line_starts(content);
    for (const auto& [idx, kind] : stripped.marks) {
      size_t target = mapping[idx];
      if (target == std::string::npos) {
        throw Error(ErrorCode::MalformedBlock,
                    fmt::format("marked symbol '{}' does not occur in the SEARCH text of {}",
                                stripped.tokens[idx], e.file));
      }
      auto [line, col] = line_col(starts, match.begin + region_toks[target].offset);
      queries.push_back({kind, std::string(stripped.tokens[idx]), e.file, line, col});
    }
  }
  if (queries.empty()) throw Error(ErrorCode::NoMarkersFound, "no FIND_DEFINITION/FIND_REFERENCES markers");
  return queries;
}

void FallbackIndex::init(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error(ErrorCode::NotADirectory, root.string());
  root_ = root;
  contents_.clear();
  definitions_.clear();
  occurrences_.clear();
  positions_.clear();
  for (const auto& file : list_source_files(root, options_)) {
    std::string& content = contents_[file] = text::read_file(root / file);
    for (auto& e : parse_source(content, file)) definitions_[e.name].push_back(std::move(e));
    auto starts = text::line_starts(content);
    auto& pos = positions_[file];
    for (const auto& t : lex::tokenize_flat(content)) {
      if (t.kind != lex::TokKind::Ident) continue;
      auto [line, col] = line_col(starts, t.offset);
      pos[{line, col}] = std::string(t.text);
      auto& occ = occurrences_[std::string(t.text)];
      if (occ.empty() || occ.back().file != file || occ.back().line != line) occ.push_back({file, line});
    }
  }
}

std::optional<std::string> FallbackIndex::identifier_at(const std::string& file, int line, int column) const {
  auto f = positions_.find(file);
  if (f == positions_.end()) return std::nullopt;
  auto it = f->second.upper_bound({line, column});
  if (it == f->second.begin()) return std::nullopt;
  --it;
  if (it->first.first != line) return std::nullopt;
  if (column >= it->first.second + static_cast<int>(it->second.size())) return std::nullopt;
  return it->second;
}

std::vector<SymbolLocation> FallbackIndex::definition(const std::string& file, int line, int column) {
  std::vector<SymbolLocation> out;
  auto id = identifier_at(file, line, column);
  if (!id) return out;
  auto it = definitions_.find(*id);
  if (it == definitions_.end()) return out;
  for (const auto& e : it->second) out.push_back({e.file, e.lines, e.text});
  return out;
}

std::vector<SymbolLocation> FallbackIndex::references(const std::string& file, int line, int column) {
  std::vector<SymbolLocation> out;
  auto id = identifier_at(file, line, column);
  if (!id) return out;
  auto it = occurrences_.find(*id);
  if (it == occurrences_.end()) return out;
  for (const auto& o : it->second) {
    out.push_back({o.file, {o.line, o.line}, std::string(text::slice_lines(contents_.at(o.file), o.line, o.line))});
  }
  return out;
}

std::unique_ptr<SymbolBackend> open_symbol_backend(const fs::path& root, const SymbolBackendConfig& config) {
  if (!config.lsp_command.empty()) {
    auto lsp = std::make_unique<LspBackend>(config.lsp_command);
    try {
      lsp->init(root);
      return lsp;
    } catch (const Error&) {
      if (!config.fallback_on_failure) throw;
    }
  }
  auto index = std::make_unique<FallbackIndex>();
  index->init(root);
  return index;
}

ResolutionResult resolve(const std::vector<MarkerQuery>& queries, SymbolBackend& backend,
                         const ResolveOptions& options) {
  ResolutionResult result;
  result.backend = backend.name();
  result.references_include_declaration = backend.references_include_declaration();
  for (const auto& q : queries) {
    QueryOutcome o;
    o.query = q;
    try {
      o.locations = q.kind == QueryKind::Definition ? backend.definition(q.file, q.line, q.column)
                                                    : backend.references(q.file, q.line, q.column);
      o.outcome = o.locations.empty() ? Outcome::NotFound : Outcome::Locations;
      if (o.locations.size() > options.reference_cap) {
        o.locations.resize(options.reference_cap);
        o.truncated = true;
      }
    } catch (const std::exception& e) {
      o.outcome = Outcome::BackendError;
      o.reason = e.what();
      o.locations.clear();
    }
    result.outcomes.push_back(std::move(o));
  }
  return result;
}

std::string render_resolution(const ResolutionResult& result) {
  constexpr int kPreviewLines = 20;
  std::string out = fmt::format("backend: {} (references {} the declaration)\n", result.backend,
                                result.references_include_declaration ? "include" : "exclude");
  for (size_t i = 0; i < result.outcomes.size(); ++i) {
    const auto& o = result.outcomes[i];
    const auto& q = o.query;
    out += fmt::format("[{}] {}({}) at {}:{}:{}\n", i + 1, to_string(q.kind), q.symbol, q.file, q.line, q.column);
    if (o.outcome == Outcome::NotFound) {
      out += "  not found\n";
      continue;
    }
    if (o.outcome == Outcome::BackendError) {
      out += "  backend error: " + o.reason + "\n";
      continue;
    }
    out += fmt::format("  {} location(s){}\n", o.locations.size(),
                       o.truncated ? " (truncated; more exist)" : "");
    for (const auto& loc : o.locations) {
      out += fmt::format("  {}:{}-{}\n", loc.file, loc.lines.start, loc.lines.end);
      auto lines = text::split_lines(loc.preview);
      int shown = 0;
      for (auto l : lines) {
        if (shown == kPreviewLines) {
          out += fmt::format("    ... ({} more lines)\n", lines.size() - kPreviewLines);
          break;
        }
        out += fmt::format("    {} {}\n", loc.lines.start + shown, l);
        ++shown;
      }
    }
  }
  return out;
}

std::string resolve_code_symbol(const fs::path& root, SymbolBackend& backend, std::string_view queries,
                                const ResolveOptions& options) {
  return render_resolution(resolve(plan_queries(root, queries), backend, options));
}

}  // namespace vulnres
