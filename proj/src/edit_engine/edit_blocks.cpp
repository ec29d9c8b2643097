#include <algorithm>

#include <fmt/format.h>

#include "vulnres/edit_engine.hpp"
#include "vulnres/error.hpp"
#include "vulnres/util/text.hpp"

namespace vulnres {
namespace {

// A run of `c` of at least kMinMarkerRun, optionally followed by `word`.
bool is_marker(std::string_view line, char c, std::string_view word) {
  line = text::trim_right(line);
  size_t n = 0;
  while (n < line.size() && line[n] == c) ++n;
  if (n < kMinMarkerRun) return false;
  std::string_view rest = text::trim(line.substr(n));
  return rest == word;
}

struct Line {
  std::string_view text;
  size_t offset;
};

std::vector<Line> lines_with_offsets(std::string_view s) {
  std::vector<Line> out;
  size_t pos = 0;
  while (pos < s.size()) {
    size_t nl = s.find('\n', pos);
    size_t end = nl == std::string_view::npos ? s.size() : nl;
    std::string_view l = s.substr(pos, end - pos);
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    out.push_back({l, pos});
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

}  // namespace

std::vector<SearchReplaceEdit> parse_edit_blocks(std::string_view text) {
  std::vector<SearchReplaceEdit> edits;
  auto lines = lines_with_offsets(text);
  std::string path;
  auto malformed = [](size_t offset, std::string_view what) {
    return Error(ErrorCode::MalformedBlock, fmt::format("{} at byte offset {}", what, offset));
  };
  size_t i = 0;
  while (i < lines.size()) {
    std::string_view line = lines[i].text;
    if (line.substr(0, 4) == "### ") {
      path = std::string(text::trim(line.substr(4)));
      ++i;
      continue;
    }
    if (is_marker(line, '=', "") || is_marker(line, '>', "REPLACE")) {
      throw malformed(lines[i].offset, "divider or REPLACE marker outside a block");
    }
    if (!is_marker(line, '<', "SEARCH")) {
      ++i;
      continue;
    }
    if (path.empty()) throw malformed(lines[i].offset, "SEARCH block without a '### <path>' header");
    size_t block_start = lines[i].offset;
    ++i;
    std::string search;
    while (i < lines.size() && !is_marker(lines[i].text, '=', "")) {
      if (is_marker(lines[i].text, '>', "REPLACE") || is_marker(lines[i].text, '<', "SEARCH")) {
        throw malformed(lines[i].offset, "missing divider in block");
      }
      search.append(lines[i].text).push_back('\n');
      ++i;
    }
    if (i == lines.size()) throw malformed(block_start, "unterminated SEARCH section");
    ++i;
    std::string replace;
    while (i < lines.size() && !is_marker(lines[i].text, '>', "REPLACE")) {
      if (is_marker(lines[i].text, '<', "SEARCH") || is_marker(lines[i].text, '=', "")) {
        throw malformed(lines[i].offset, "missing REPLACE marker in block");
      }
      replace.append(lines[i].text).push_back('\n');
      ++i;
    }
    if (i == lines.size()) throw malformed(block_start, "unterminated REPLACE section");
    ++i;
    edits.push_back({path, std::move(search), std::move(replace)});
  }
  return edits;
}

std::string render_edit_blocks(const std::vector<SearchReplaceEdit>& edits) {
  std::string out;
  for (const auto& e : edits) {
    out += "### " + e.file + "\n";
    out += "<<<<<<< SEARCH\n";
    out += e.search;
    if (!e.search.empty() && e.search.back() != '\n') out += '\n';
    out += "=======\n";
    out += e.replace;
    if (!e.replace.empty() && e.replace.back() != '\n') out += '\n';
    out += ">>>>>>> REPLACE\n";
  }
  return out;
}

TextMatch locate_search_text(std::string_view content, std::string_view search, const std::string& file) {
  if (text::trim(search).empty()) {
    throw Error(ErrorCode::SearchTextNotFound, fmt::format("empty search text for {}", file));
  }
  size_t first = content.find(search);
  if (first != std::string_view::npos) {
    if (content.find(search, first + 1) != std::string_view::npos) {
      throw Error(ErrorCode::SearchTextAmbiguous, fmt::format("search text occurs more than once in {}", file));
    }
    return {first, first + search.size(), false};
  }
  // Whitespace-normalized, line-aligned match.
  auto starts = text::line_starts(content);
  auto clines = text::split_lines(content);
  std::vector<std::string> norm_content;
  norm_content.reserve(clines.size());
  for (auto l : clines) norm_content.push_back(text::normalize_line(l));
  std::vector<std::string> norm_search;
  for (auto l : text::split_lines(search)) norm_search.push_back(text::normalize_line(l));
  while (!norm_search.empty() && norm_search.back().empty()) norm_search.pop_back();
  while (!norm_search.empty() && norm_search.front().empty()) norm_search.erase(norm_search.begin());
  if (norm_search.empty() || norm_search.size() > norm_content.size()) {
    throw Error(ErrorCode::SearchTextNotFound, fmt::format("search text not found in {}", file));
  }
  std::vector<size_t> hits;
  for (size_t i = 0; i + norm_search.size() <= norm_content.size(); ++i) {
    if (std::equal(norm_search.begin(), norm_search.end(), norm_content.begin() + static_cast<std::ptrdiff_t>(i))) {
      hits.push_back(i);
    }
  }
  if (hits.empty()) throw Error(ErrorCode::SearchTextNotFound, fmt::format("search text not found in {}", file));
  if (hits.size() > 1) {
    throw Error(ErrorCode::SearchTextAmbiguous, fmt::format("search text occurs more than once in {}", file));
  }
  size_t last_line = hits[0] + norm_search.size();  // one past
  size_t begin = starts[hits[0]];
  size_t end = last_line < starts.size() ? starts[last_line] : content.size();
  return {begin, end, true};
}

std::map<std::string, std::string> apply_edits_to_contents(const std::map<std::string, std::string>& contents,
                                                           const std::vector<SearchReplaceEdit>& edits) {
  std::map<std::string, std::string> out = contents;
  for (const auto& e : edits) {
    auto it = out.find(e.file);
    if (it == out.end()) throw Error(ErrorCode::FileNotFound, e.file);
    TextMatch m = locate_search_text(it->second, e.search, e.file);
    std::string replacement = e.replace;
    // A normalized match spans whole lines; keep the file's line structure.
    if (m.normalized && m.end > m.begin && it->second[m.end - 1] == '\n' && !replacement.empty() &&
        replacement.back() != '\n') {
      replacement.push_back('\n');
    }
    it->second.replace(m.begin, m.end - m.begin, replacement);
  }
  return out;
}

std::string UniqueNamer::fix(const std::string& base) {
  std::string name = base;
  for (int k = 2; used_.count(name); ++k) name = base + "-" + std::to_string(k);
  used_.insert(name);
  return name;
}

}  // namespace vulnres
