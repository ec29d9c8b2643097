#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace vulnres {

enum class ElementKind { Class, Struct, Union, Enum, Function, Macro, GlobalVariable };

inline constexpr int kElementKindCount = 7;

std::string_view to_string(ElementKind kind);
std::optional<ElementKind> parse_element_kind(std::string_view name);

// Inclusive, 1-based.
struct LineRange {
  int start = 1;
  int end = 1;
  bool contains(int line) const { return line >= start && line <= end; }
  friend bool operator==(const LineRange&, const LineRange&) = default;
};

struct CodeElement {
  std::string name;
  std::string qualifier;  // enclosing scope path, "" at file scope
  ElementKind kind = ElementKind::Function;
  std::string file;  // repo-relative, '/'-separated
  LineRange lines;
  std::string text;

  // "qualifier::name" or just name.
  std::string qualified_name() const;
};

struct RepoTreeView {
  std::string text;
  std::vector<std::string> included_extensions;
};

struct SkeletonFile {
  std::string file;
  std::string text;
};

struct RepoSnapshot {
  std::string digest;
  size_t file_count = 0;
  friend bool operator==(const RepoSnapshot& a, const RepoSnapshot& b) { return a.digest == b.digest; }
};

struct RepoOptions {
  std::vector<std::string> extensions{".c", ".h", ".cc", ".cpp", ".cxx", ".hpp", ".hh"};
  // Directory names skipped by every walk (tree, snapshot, search).
  std::set<std::string> ignore_dirs{".git", ".vulnres", "build"};

  bool is_source(const std::filesystem::path& p) const;
};

// Pure extraction over in-memory content. `file` only labels the results.
std::vector<CodeElement> parse_source(std::string_view content, const std::string& file);

// Elements of root/file; file is repo-relative.
std::vector<CodeElement> parse_elements(const std::filesystem::path& root, const std::string& file);

// Content with every function body larger than "{ ... }" collapsed to it.
std::string skeletonize_source(std::string_view content);
SkeletonFile skeletonize(const std::filesystem::path& root, const std::string& file);

RepoTreeView render_repo_tree(const std::filesystem::path& root, const RepoOptions& options = {});

RepoSnapshot snapshot(const std::filesystem::path& root, const RepoOptions& options = {});
// Serial reference used by tests and the benchmark.
RepoSnapshot snapshot_serial(const std::filesystem::path& root, const RepoOptions& options = {});

// Sorted repo-relative paths of all files (any extension) outside ignore dirs.
std::vector<std::string> list_files(const std::filesystem::path& root, const RepoOptions& options = {});
std::vector<std::string> list_source_files(const std::filesystem::path& root,
                                           const RepoOptions& options = {});

// Copies every file of `from` outside ignore dirs into `to`.
void copy_tree(const std::filesystem::path& from, const std::filesystem::path& to,
               const RepoOptions& options = {});

}  // namespace vulnres
