#include <fmt/format.h>

#include "vulnres/edit_engine.hpp"
#include "vulnres/error.hpp"
#include "vulnres/util/process.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;

namespace vulnres {
namespace {

std::map<std::string, std::string> pinned_git_env() {
  return {
      {"GIT_AUTHOR_NAME", "vulnres"},          {"GIT_AUTHOR_EMAIL", "vulnres@localhost"},
      {"GIT_COMMITTER_NAME", "vulnres"},       {"GIT_COMMITTER_EMAIL", "vulnres@localhost"},
      {"GIT_AUTHOR_DATE", "2000-01-01T00:00:00Z"}, {"GIT_COMMITTER_DATE", "2000-01-01T00:00:00Z"},
      {"GIT_CONFIG_NOSYSTEM", "1"},            {"GIT_CONFIG_GLOBAL", "/dev/null"},
      {"GIT_TERMINAL_PROMPT", "0"},
  };
}

class GitStore final : public VersionStore {
 public:
  GitStore(fs::path root, const RepoOptions& options) : root_(std::move(root)) {
    if (!fs::exists(root_ / ".git")) {
      git({"init", "-q"});
      std::string exclude;
      for (const auto& d : options.ignore_dirs) {
        if (d != ".git") exclude += "/" + d + "/\n";
      }
      text::write_file(root_ / ".git" / "info" / "exclude", exclude);
      git({"add", "-A"});
      git({"commit", "-q", "--allow-empty", "-m", "base"});
    }
    base_ = head();
  }

  std::string record(const std::string& message, const std::vector<FileChange>& changes) override {
    std::vector<std::string> args{"add", "--"};
    for (const auto& c : changes) args.push_back(c.path);
    git(args);
    git({"commit", "-q", "-m", message});
    return head();
  }

  void revert_last() override { git({"reset", "-q", "--hard", "HEAD~1"}); }
  void revert_all() override { git({"reset", "-q", "--hard", base_}); }
  std::string_view kind() const override { return "git"; }

 private:
  // Loose ref read directly; saves a process per commit. Packed refs fall
  // back to rev-parse.
  std::string head() {
    const std::string ref(text::trim(text::read_file(root_ / ".git" / "HEAD")));
    if (ref.starts_with("ref: ")) {
      const fs::path loose = root_ / ".git" / ref.substr(5);
      if (fs::exists(loose)) return std::string(text::trim(text::read_file(loose)));
    }
    return std::string(text::trim(git({"rev-parse", "HEAD"})));
  }

  std::string git(const std::vector<std::string>& args) {
    std::vector<std::string> argv{"git", "-c", "commit.gpgsign=false", "-c", "core.autocrlf=false", "-c", "gc.auto=0"};
    argv.insert(argv.end(), args.begin(), args.end());
    ProcessOptions opts;
    opts.cwd = root_;
    opts.env = pinned_git_env();
    opts.timeout = std::chrono::seconds(60);
    auto r = run_process(argv, opts);
    if (r.exit_code != 0) {
      throw Error(ErrorCode::IoError, fmt::format("git {} failed: {}{}", text::join(args, " "), r.out, r.err));
    }
    return r.out;
  }

  fs::path root_;
  std::string base_;
};

class MemoryStore final : public VersionStore {
 public:
  explicit MemoryStore(fs::path root) : root_(std::move(root)) {}

  std::string record(const std::string& message, const std::vector<FileChange>& changes) override {
    journal_.push_back(changes);
    std::string id = fmt::format("mem-{}-{}", ++counter_, message);
    return id;
  }

  void revert_last() override {
    restore(journal_.back());
    journal_.pop_back();
  }

  void revert_all() override {
    while (!journal_.empty()) revert_last();
  }

  std::string_view kind() const override { return "memory"; }

 private:
  void restore(const std::vector<FileChange>& changes) {
    for (auto it = changes.rbegin(); it != changes.rend(); ++it) {
      if (it->before) {
        text::write_file(root_ / it->path, *it->before);
      } else {
        fs::remove(root_ / it->path);
      }
    }
  }

  fs::path root_;
  std::vector<std::vector<FileChange>> journal_;
  size_t counter_ = 0;
};

}  // namespace

bool git_available() {
  try {
    return run_process({"git", "--version"}, {}).exit_code == 0;
  } catch (const std::exception&) {
    return false;
  }
}

std::unique_ptr<VersionStore> make_git_store(const fs::path& root, const RepoOptions& options) {
  return std::make_unique<GitStore>(root, options);
}

std::unique_ptr<VersionStore> make_memory_store(const fs::path& root) { return std::make_unique<MemoryStore>(root); }

EditHistory::EditHistory(fs::path root, std::unique_ptr<VersionStore> store)
    : root_(std::move(root)), store_(std::move(store)) {}

ApplyResult EditHistory::apply_edits(const std::string& unique_name, const std::vector<SearchReplaceEdit>& edits) {
  if (unique_name.empty()) throw Error(ErrorCode::InvalidConfig, "edit set name is empty");
  if (edits.empty()) throw Error(ErrorCode::NoChanges, "no changes: empty edit set");
  std::map<std::string, std::string> before;
  for (const auto& e : edits) {
    if (before.count(e.file)) continue;
    fs::path p = root_ / e.file;
    if (!fs::is_regular_file(p)) throw Error(ErrorCode::FileNotFound, e.file);
    before[e.file] = text::read_file(p);
  }
  auto after = apply_edits_to_contents(before, edits);
  std::vector<FileChange> changes;
  for (const auto& [path, content] : after) {
    if (content != before[path]) changes.push_back({path, before[path], content});
  }
  if (changes.empty()) throw Error(ErrorCode::NoChanges, "no changes: edits leave every file unchanged");
  for (const auto& c : changes) text::write_file(root_ / c.path, c.after);
  std::string fixed = names_.fix(unique_name);
  std::string id;
  try {
    id = store_->record(fixed, changes);
  } catch (...) {
    for (const auto& c : changes) text::write_file(root_ / c.path, *c.before);
    throw;
  }
  std::vector<std::string> files;
  for (const auto& c : changes) files.push_back(c.path);
  commits_.push_back({fixed, id, fmt::format("{} edit(s) in {}", edits.size(), text::join(files, ", "))});
  return {fixed, id, history_view()};
}

RollbackResult EditHistory::rollback_latest() {
  if (commits_.empty()) throw Error(ErrorCode::EmptyHistory, "empty rollback history");
  store_->revert_last();
  RollbackResult r;
  r.reverted = commits_.back();
  r.reverted_count = 1;
  commits_.pop_back();
  r.history_view = history_view();
  return r;
}

RollbackResult EditHistory::rollback_all() {
  if (commits_.empty()) throw Error(ErrorCode::EmptyHistory, "empty rollback history");
  store_->revert_all();
  RollbackResult r;
  r.reverted = commits_.front();
  r.reverted_count = commits_.size();
  commits_.clear();
  r.history_view = history_view();
  return r;
}

std::string EditHistory::history_view() const {
  std::string out = fmt::format("commits: {}\n", commits_.size());
  for (size_t i = 0; i < commits_.size(); ++i) {
    const auto& c = commits_[i];
    out += fmt::format("  {}. {} [{}] {}\n", i + 1, c.name, c.id.substr(0, 12), c.summary);
  }
  if (commits_.empty()) {
    out += "latest: (none)\n";
  } else {
    out += fmt::format("latest: {}\n", commits_.back().name);
  }
  return out;
}

}  // namespace vulnres
