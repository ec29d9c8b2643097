#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vulnres {

struct ProcessOptions {
  std::filesystem::path cwd;
  std::map<std::string, std::string> env;  // overrides on top of the parent env
  std::chrono::milliseconds timeout{std::chrono::minutes(10)};
  std::string stdin_data;
  bool merge_stderr = false;  // stderr goes to the stdout stream
};

struct ProcessResult {
  int exit_code = -1;
  std::string out;
  std::string err;
  bool timed_out = false;
};

// Runs argv[0] (PATH lookup) to completion. Throws Error(IoError) if the
// process cannot be spawned at all.
ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options = {});

// /bin/sh -c command
ProcessResult run_shell(const std::string& command, const ProcessOptions& options = {});

std::string shell_quote(std::string_view s);

// A long-lived child with piped stdin/stdout, used for stdio protocols.
class ChildProcess {
 public:
  ChildProcess(const std::vector<std::string>& argv, const std::filesystem::path& cwd);
  ~ChildProcess();
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  void write(std::string_view bytes);
  // Reads exactly n bytes; nullopt on EOF or timeout.
  std::optional<std::string> read_exact(size_t n, std::chrono::milliseconds timeout);
  // Reads up to and including "\r\n"; nullopt on EOF or timeout.
  std::optional<std::string> read_line(std::chrono::milliseconds timeout);
  void close_stdin();
  int wait();
  bool running() const { return pid_ > 0; }

 private:
  bool fill(std::chrono::milliseconds timeout);

  int pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  std::string buffer_;
};

}  // namespace vulnres
