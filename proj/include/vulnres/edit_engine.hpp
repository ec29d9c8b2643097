#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vulnres/repo_model.hpp"

namespace vulnres {

struct SearchReplaceEdit {
  std::string file;
  std::string search;
  std::string replace;
  friend bool operator==(const SearchReplaceEdit&, const SearchReplaceEdit&) = default;
};

struct EditSet {
  std::string unique_name;
  std::vector<SearchReplaceEdit> edits;
};

// Minimum run length of '<', '=' and '>' accepted in block markers.
inline constexpr size_t kMinMarkerRun = 5;

// Extracts every SEARCH/REPLACE block. Throws Error(MalformedBlock) with the
// byte offset of the first violation.
std::vector<SearchReplaceEdit> parse_edit_blocks(std::string_view text);

// Canonical block text; parse_edit_blocks(render_edit_blocks(e)) == e when
// every search/replace body is empty or newline-terminated.
std::string render_edit_blocks(const std::vector<SearchReplaceEdit>& edits);

struct TextMatch {
  size_t begin = 0;
  size_t end = 0;
  bool normalized = false;  // found only after whitespace normalization
};

// Exact match first, then line-wise whitespace-normalized match. Throws
// SearchTextNotFound / SearchTextAmbiguous.
TextMatch locate_search_text(std::string_view content, std::string_view search, const std::string& file);

// Applies edits to in-memory contents; all-or-nothing.
std::map<std::string, std::string> apply_edits_to_contents(
    const std::map<std::string, std::string>& contents, const std::vector<SearchReplaceEdit>& edits);

// Sequential numeric-suffix naming: b, b-2, b-3, ...
class UniqueNamer {
 public:
  std::string fix(const std::string& base);
  bool contains(const std::string& name) const { return used_.count(name) > 0; }

 private:
  std::set<std::string> used_;
};

struct FileChange {
  std::string path;
  std::optional<std::string> before;  // nullopt: file did not exist
  std::string after;
};

// Commit/rollback backend for the edit history.
class VersionStore {
 public:
  virtual ~VersionStore() = default;
  // Files are already written; returns a commit id.
  virtual std::string record(const std::string& message, const std::vector<FileChange>& changes) = 0;
  virtual void revert_last() = 0;
  virtual void revert_all() = 0;
  virtual std::string_view kind() const = 0;
};

// Git-backed store in the workspace. Initializes a repository and a base
// commit if none exists. Commit metadata is pinned so ids are reproducible.
std::unique_ptr<VersionStore> make_git_store(const std::filesystem::path& root, const RepoOptions& options = {});
// In-process journal of previous file contents.
std::unique_ptr<VersionStore> make_memory_store(const std::filesystem::path& root);

bool git_available();

struct CommitInfo {
  std::string name;
  std::string id;
  std::string summary;
};

struct ApplyResult {
  std::string fixed_name;
  std::string commit_id;
  std::string history_view;
};

struct RollbackResult {
  CommitInfo reverted;  // the last one reverted
  size_t reverted_count = 0;
  std::string history_view;
};

// Project Editing Toolkit: edit sets recorded as commits, with rollback.
class EditHistory {
 public:
  EditHistory(std::filesystem::path root, std::unique_ptr<VersionStore> store);

  ApplyResult apply_edits(const std::string& unique_name, const std::vector<SearchReplaceEdit>& edits);
  RollbackResult rollback_latest();
  RollbackResult rollback_all();

  const std::vector<CommitInfo>& commits() const { return commits_; }
  std::string history_view() const;
  const std::filesystem::path& root() const { return root_; }
  std::string_view store_kind() const { return store_->kind(); }

 private:
  std::filesystem::path root_;
  std::unique_ptr<VersionStore> store_;
  std::vector<CommitInfo> commits_;
  UniqueNamer names_;
};

// git-style unified diff of one file; empty when identical.
std::string unified_diff_file(const std::string& path, const std::optional<std::string>& before,
                              const std::optional<std::string>& after, int context = 3);

// Diff over every file of both trees (ignore dirs skipped), sorted by path.
std::string to_unified_diff(const std::filesystem::path& before_root, const std::filesystem::path& after_root,
                            const RepoOptions& options = {});

struct DiffStats {
  int files = 0;
  int hunks = 0;
  int added = 0;
  int removed = 0;
};
DiffStats diff_stats(std::string_view diff);

}  // namespace vulnres
