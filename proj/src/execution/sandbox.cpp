#include <fmt/format.h>

#include "vulnres/error.hpp"
#include "vulnres/execution.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;

namespace vulnres {

LocalSandbox::LocalSandbox(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  if (!fs::is_directory(root_, ec)) throw Error(ErrorCode::SandboxUnavailable, "no workspace at " + root_.string());
}

ProcessResult LocalSandbox::exec(const std::string& command, std::chrono::milliseconds timeout, bool merge) {
  ProcessOptions opts;
  opts.cwd = root_;
  opts.env = env_;
  opts.timeout = timeout;
  opts.merge_stderr = merge;
  try {
    return run_shell(command, opts);
  } catch (const Error& e) {
    throw Error(ErrorCode::SandboxUnavailable, e.what());
  }
}

std::string LocalSandbox::read_file(const std::string& rel) { return text::read_file(root_ / rel); }

void LocalSandbox::write_file(const std::string& rel, std::string_view content) {
  text::write_file(root_ / rel, content);
}

ContainerSandbox::ContainerSandbox(std::string container_id, std::string workdir, fs::path mirror,
                                   std::string runtime)
    : container_id_(std::move(container_id)),
      workdir_(std::move(workdir)),
      mirror_(std::move(mirror)),
      runtime_(std::move(runtime)) {}

std::vector<std::string> ContainerSandbox::exec_argv(const std::string& command, bool interactive) const {
  std::vector<std::string> argv{runtime_, "exec"};
  if (interactive) argv.push_back("-i");
  argv.insert(argv.end(), {"-w", workdir_});
  for (const auto& [k, v] : env_) argv.insert(argv.end(), {"-e", k + "=" + v});
  argv.insert(argv.end(), {container_id_, "sh", "-c", command});
  return argv;
}

ProcessResult ContainerSandbox::exec(const std::string& command, std::chrono::milliseconds timeout, bool merge) {
  ProcessOptions opts;
  opts.timeout = timeout;
  opts.merge_stderr = merge;
  try {
    return run_process(exec_argv(command), opts);
  } catch (const Error& e) {
    throw Error(ErrorCode::SandboxUnavailable, e.what());
  }
}

std::string ContainerSandbox::read_file(const std::string& rel) {
  auto r = exec("cat " + shell_quote(rel), std::chrono::seconds(60), false);
  if (r.exit_code != 0) throw Error(ErrorCode::FileNotFound, rel);
  return r.out;
}

void ContainerSandbox::write_file(const std::string& rel, std::string_view content) {
  ProcessOptions opts;
  opts.stdin_data = std::string(content);
  opts.timeout = std::chrono::seconds(60);
  std::string cmd = fmt::format("mkdir -p \"$(dirname {0})\" && cat > {0}", shell_quote(rel));
  auto r = run_process(exec_argv(cmd, true), opts);
  if (r.exit_code != 0) throw Error(ErrorCode::WriteFailure, rel + ": " + r.err);
}

}  // namespace vulnres
