#include "vulnres/code_search.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "vulnres/error.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;

namespace vulnres {

std::string location_marker(const std::string& file, int line) {
  return fmt::format("// <<<<< {}:{}", file, line);
}

std::vector<std::pair<std::string, int>> parse_location_markers(const std::string& text) {
  static const std::regex kMarker(R"(// <<<<< (\S+):([0-9]+)$)");
  std::vector<std::pair<std::string, int>> out;
  for (auto line : text::split_lines(text)) {
    std::match_results<std::string_view::const_iterator> m;
    if (std::regex_search(line.begin(), line.end(), m, kMarker)) {
      out.emplace_back(m[1].str(), std::stoi(m[2].str()));
    }
  }
  return out;
}

CodeWindow render_window(const std::string& file, std::string_view content, LineRange range,
                         const std::vector<int>& mark_lines) {
  auto lines = text::split_lines(content);
  CodeWindow w;
  w.file = file;
  w.lines = range;
  const size_t width = std::to_string(range.end).size();
  for (int n = range.start; n <= range.end && n <= static_cast<int>(lines.size()); ++n) {
    w.text += fmt::format("{:<{}} {}", n, width, lines[n - 1]);
    if (std::find(mark_lines.begin(), mark_lines.end(), n) != mark_lines.end()) {
      w.text += " " + location_marker(file, n);
      if (std::find(w.marked_lines.begin(), w.marked_lines.end(), n) == w.marked_lines.end()) {
        w.marked_lines.push_back(n);
      }
    }
    w.text += '\n';
  }
  std::sort(w.marked_lines.begin(), w.marked_lines.end());
  return w;
}

CodeSearch::CodeSearch(fs::path root, SearchOptions options)
    : root_(std::move(root)), options_(std::move(options)) {
  std::error_code ec;
  if (!fs::is_directory(root_, ec)) throw Error(ErrorCode::NotADirectory, root_.string());
}

SearchResult CodeSearch::search_code_element(const std::string& name, const std::string& file,
                                             const std::vector<int>& mark_lines) const {
  std::vector<std::string> files;
  const bool repo_wide = file.empty();
  if (repo_wide) {
    files = list_source_files(root_, options_.repo);
  } else {
    std::error_code ec;
    if (!fs::is_regular_file(root_ / file, ec)) throw Error(ErrorCode::FileNotFound, file);
    files.push_back(file);
  }
  // Accept "Scope::name" as well as bare names.
  std::string bare = name;
  std::string scope;
  if (auto at = name.rfind("::"); at != std::string::npos) {
    bare = name.substr(at + 2);
    scope = name.substr(0, at);
  }
  SearchResult result;
  for (const auto& f : files) {
    std::string content = text::read_file(root_ / f);
    for (auto& e : parse_source(content, f)) {
      if (e.name != bare) continue;
      if (!scope.empty()) {
        const std::string& q = e.qualifier;
        bool ok = q == scope || (q.size() > scope.size() && q.ends_with("::" + scope));
        if (!ok) continue;
      }
      if (repo_wide && result.matches.size() >= options_.repo_wide_limit) {
        result.truncated = true;
        break;
      }
      CodeWindow w = render_window(f, content, e.lines, mark_lines);
      result.matches.push_back({std::move(e), std::move(w)});
    }
    if (result.truncated) break;
  }
  if (result.matches.empty()) {
    result.observation = fmt::format("no match: no code element named '{}' in {}", name,
                                     repo_wide ? std::string("the repository") : file);
  } else if (result.truncated) {
    result.observation = fmt::format("truncated: showing the first {} matches; pass a file to narrow the search",
                                     options_.repo_wide_limit);
  }
  return result;
}

ReadResult CodeSearch::read_code(const std::string& file, int center, int num,
                                 const std::vector<int>& mark_lines) const {
  std::error_code ec;
  if (!fs::is_regular_file(root_ / file, ec)) throw Error(ErrorCode::FileNotFound, file);
  std::string content = text::read_file(root_ / file);
  const int eof = static_cast<int>(text::split_lines(content).size());
  ReadResult r;
  num = std::max(0, num);
  int c = center;
  if (eof == 0) {
    r.warning = fmt::format("{} is empty", file);
    r.window = CodeWindow{file, {1, 0}, "", {}};
    return r;
  }
  if (c < 1 || c > eof) {
    c = std::clamp(c, 1, eof);
    r.warning = fmt::format("center {} is outside 1..{}; clamped to {}", center, eof, c);
  }
  LineRange range{std::max(1, c - num), std::min(eof, c + num)};
  r.window = render_window(file, content, range, mark_lines);
  return r;
}

std::string CodeSearch::render(const SearchResult& result) {
  std::string out;
  for (const auto& m : result.matches) {
    const auto& e = m.element;
    out += fmt::format("[{}] {} in {} (lines {}-{})\n", to_string(e.kind), e.qualified_name(), e.file,
                       e.lines.start, e.lines.end);
    out += m.window.text;
    out += '\n';
  }
  if (!result.observation.empty()) out += result.observation + "\n";
  return out;
}

std::string CodeSearch::render(const ReadResult& result) {
  std::string out;
  if (!result.warning.empty()) out += "warning: " + result.warning + "\n";
  out += fmt::format("{} (lines {}-{})\n", result.window.file, result.window.lines.start,
                     result.window.lines.end);
  out += result.window.text;
  return out;
}

}  // namespace vulnres
