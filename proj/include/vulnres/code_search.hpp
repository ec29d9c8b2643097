#pragma once

#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "vulnres/repo_model.hpp"

namespace vulnres {

struct CodeWindow {
  std::string file;
  LineRange lines;
  std::string text;  // "<n> <source line>[ // <<<<< file:n]" per line
  std::vector<int> marked_lines;
};

struct ElementMatch {
  CodeElement element;
  CodeWindow window;
};

struct SearchResult {
  std::vector<ElementMatch> matches;
  bool truncated = false;
  std::string observation;  // "no match" notice or truncation notice, else empty
};

struct ReadResult {
  CodeWindow window;
  std::string warning;  // set when center was clamped
};

// "// <<<<< <path>:<line>"
std::string location_marker(const std::string& file, int line);
// Recovers every (path, line) marker from tool output.
std::vector<std::pair<std::string, int>> parse_location_markers(const std::string& text);

// Numbered listing of lines [range] of `content`, annotating mark_lines.
CodeWindow render_window(const std::string& file, std::string_view content, LineRange range,
                         const std::vector<int>& mark_lines);

struct SearchOptions {
  RepoOptions repo;
  size_t repo_wide_limit = 10;
};

// Code Search Toolkit: search_code_element and read_code.
class CodeSearch {
 public:
  explicit CodeSearch(std::filesystem::path root, SearchOptions options = {});

  // Empty `file` searches every source file in the repository.
  SearchResult search_code_element(const std::string& name, const std::string& file,
                                   const std::vector<int>& mark_lines) const;

  ReadResult read_code(const std::string& file, int center, int num,
                       const std::vector<int>& mark_lines) const;

  const std::filesystem::path& root() const { return root_; }

  // Tool observations as shown to the agent.
  static std::string render(const SearchResult& result);
  static std::string render(const ReadResult& result);

 private:
  std::filesystem::path root_;
  SearchOptions options_;
};

}  // namespace vulnres
