#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "vulnres/edit_engine.hpp"
#include "vulnres/util/process.hpp"

namespace vulnres {

// Hermetic command execution rooted at one workspace.
class Sandbox {
 public:
  virtual ~Sandbox() = default;
  virtual const std::filesystem::path& workspace() const = 0;
  // Runs `command` through the shell in the workspace; stderr is merged
  // into out when merge is set.
  virtual ProcessResult exec(const std::string& command, std::chrono::milliseconds timeout, bool merge = true) = 0;
  virtual std::string read_file(const std::string& rel) = 0;
  virtual void write_file(const std::string& rel, std::string_view content) = 0;
  virtual std::string descriptor() const = 0;
  // Path of a workspace file as seen by commands run through exec.
  virtual std::string exec_path(const std::string& rel) const = 0;

  // Environment overrides applied to every exec.
  void set_env(const std::string& key, std::string value) { env_[key] = std::move(value); }
  void unset_env(const std::string& key) { env_.erase(key); }
  const std::map<std::string, std::string>& env() const { return env_; }

 protected:
  std::map<std::string, std::string> env_;
};

class LocalSandbox final : public Sandbox {
 public:
  explicit LocalSandbox(std::filesystem::path root);
  const std::filesystem::path& workspace() const override { return root_; }
  ProcessResult exec(const std::string& command, std::chrono::milliseconds timeout, bool merge = true) override;
  std::string read_file(const std::string& rel) override;
  void write_file(const std::string& rel, std::string_view content) override;
  std::string descriptor() const override { return "local-process:" + root_.string(); }
  std::string exec_path(const std::string& rel) const override { return (root_ / rel).string(); }

 private:
  std::filesystem::path root_;
};

// Executes inside a running container through the runtime CLI. The host
// path `mirror` is the bind-mounted copy of the container workdir.
class ContainerSandbox final : public Sandbox {
 public:
  ContainerSandbox(std::string container_id, std::string workdir, std::filesystem::path mirror,
                   std::string runtime = "docker");
  const std::filesystem::path& workspace() const override { return mirror_; }
  ProcessResult exec(const std::string& command, std::chrono::milliseconds timeout, bool merge = true) override;
  std::string read_file(const std::string& rel) override;
  void write_file(const std::string& rel, std::string_view content) override;
  std::string descriptor() const override { return "container:" + container_id_; }
  std::string exec_path(const std::string& rel) const override { return workdir_ + "/" + rel; }

  std::vector<std::string> exec_argv(const std::string& command, bool interactive = false) const;

 private:
  std::string container_id_;
  std::string workdir_;
  std::filesystem::path mirror_;
  std::string runtime_;
};

struct AssertionTally {
  int pass = 0;
  int fail = 0;
  friend bool operator==(const AssertionTally&, const AssertionTally&) = default;
};

struct AssertionSummary {
  int passed = 0;
  int failed = 0;
  std::map<std::string, AssertionTally> per_id;
  friend bool operator==(const AssertionSummary&, const AssertionSummary&) = default;
  std::string render() const;
};

// Counts "[SPA] <id> PASS" and "[SPA] <id> FAIL expr=\"...\"" lines.
AssertionSummary summarize_assertions(std::string_view log);

// Returns the log unchanged when it has at most head + tail lines.
std::string truncate_log(std::string_view log, size_t head_lines, size_t tail_lines, const std::string& name);

class SanitizerSignatures {
 public:
  SanitizerSignatures();  // address/leak/UB sanitizer report headers
  explicit SanitizerSignatures(const std::vector<std::string>& patterns);
  bool matches(std::string_view log) const;
  const std::vector<std::string>& patterns() const { return patterns_; }

 private:
  std::vector<std::string> patterns_;
  std::vector<std::regex> compiled_;
};

// Full PoC logs by fixed name; concurrent reads are safe.
class LogStore {
 public:
  // Stores under a unique fixed name derived from `base`.
  std::string store(const std::string& base, std::string log);
  std::string get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::map<std::string, std::string> all() const;

 private:
  mutable std::shared_mutex mutex_;
  UniqueNamer names_;
  std::map<std::string, std::string> logs_;
};

enum class PocPhase { CompileError, Ran };

struct PoCRunResult {
  std::string fixed_name;
  PocPhase phase = PocPhase::Ran;
  int exit_code = 0;
  bool timed_out = false;
  std::string truncated_log;
  AssertionSummary summary;
  bool sanitizer_triggered = false;
};

struct PocConfig {
  std::optional<std::string> build_command;
  std::string repro_command;
  std::chrono::milliseconds timeout{std::chrono::minutes(10)};
  size_t head_lines = 100;
  size_t tail_lines = 100;
  SanitizerSignatures signatures;
};

// PoC Execution Toolkit: run_poc and get_poc_output over one sandbox.
class PocToolkit {
 public:
  PocToolkit(Sandbox& sandbox, PocConfig config, LogStore& logs);

  PoCRunResult run_poc(const std::string& unique_name);
  std::string get_poc_output(const std::string& name) const { return logs_.get(name); }
  LogStore& logs() { return logs_; }
  Sandbox& sandbox() { return sandbox_; }

  // Observation text: summary block first, then the truncated log.
  static std::string render(const PoCRunResult& result);

 private:
  Sandbox& sandbox_;
  PocConfig config_;
  LogStore& logs_;
  std::mutex run_mutex_;
};

struct ScriptResult {
  std::string output;  // stdout and stderr, truncated to the byte cap
  std::vector<std::string> violations;
  int exit_code = 0;
  bool timed_out = false;
  bool truncated = false;
};

struct ScriptConfig {
  std::vector<std::string> interpreter{"python3"};
  size_t output_cap_bytes = 8 * 1024;
  std::chrono::milliseconds timeout{std::chrono::seconds(60)};
};

// Runs agent-written Python in a scratch directory with file-system and
// process operations replaced by raising stubs. get_poc_output is bridged
// in from the log store.
class ScriptSandbox {
 public:
  ScriptSandbox(const LogStore& logs, ScriptConfig config = {});
  ScriptResult run_script(const std::string& code) const;
  static std::string render(const ScriptResult& result);
  static bool available(const ScriptConfig& config = {});

 private:
  const LogStore& logs_;
  ScriptConfig config_;
};

}  // namespace vulnres
