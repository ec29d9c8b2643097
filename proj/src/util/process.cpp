#include "vulnres/util/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "vulnres/error.hpp"

extern char** environ;

namespace vulnres {
namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::string> build_env(const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> merged;
  for (char** e = environ; e && *e; ++e) {
    std::string_view kv(*e);
    size_t eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    merged[std::string(kv.substr(0, eq))] = std::string(kv.substr(eq + 1));
  }
  for (const auto& [k, v] : overrides) merged[k] = v;
  std::vector<std::string> out;
  out.reserve(merged.size());
  for (const auto& [k, v] : merged) out.push_back(k + "=" + v);
  return out;
}

void set_nonblocking(int fd) { fcntl(fd, F_SETFL, fcntl(fd, F_GETFL) | O_NONBLOCK); }

void set_cloexec(int fd) { fcntl(fd, F_SETFD, fcntl(fd, F_GETFD) | FD_CLOEXEC); }

struct Pipe {
  int fds[2] = {-1, -1};
  Pipe() {
    if (pipe(fds) != 0) throw Error(ErrorCode::IoError, std::string("pipe: ") + std::strerror(errno));
    set_cloexec(fds[0]);
    set_cloexec(fds[1]);
  }
  void close_read() {
    if (fds[0] >= 0) close(fds[0]);
    fds[0] = -1;
  }
  void close_write() {
    if (fds[1] >= 0) close(fds[1]);
    fds[1] = -1;
  }
  ~Pipe() {
    close_read();
    close_write();
  }
};

// Child side of fork: wire fds, chdir, exec. Never returns.
[[noreturn]] void exec_child(const std::vector<std::string>& argv, const std::filesystem::path& cwd,
                             const std::vector<std::string>& env, int in_fd, int out_fd, int err_fd) {
  setpgid(0, 0);
  dup2(in_fd, STDIN_FILENO);
  dup2(out_fd, STDOUT_FILENO);
  dup2(err_fd, STDERR_FILENO);
  if (!cwd.empty() && chdir(cwd.c_str()) != 0) _exit(127);
  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);
  std::vector<char*> cenv;
  for (const auto& e : env) cenv.push_back(const_cast<char*>(e.c_str()));
  cenv.push_back(nullptr);
  execvpe(cargv[0], cargv.data(), cenv.data());
  _exit(127);
}

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options) {
  if (argv.empty()) throw Error(ErrorCode::IoError, "empty argv");
  auto env = build_env(options.env);
  Pipe in, out, err;
  pid_t pid = fork();
  if (pid < 0) throw Error(ErrorCode::IoError, std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    exec_child(argv, options.cwd, env, in.fds[0], out.fds[1],
               options.merge_stderr ? out.fds[1] : err.fds[1]);
  }
  setpgid(pid, pid);
  in.close_read();
  out.close_write();
  err.close_write();
  set_nonblocking(in.fds[1]);
  set_nonblocking(out.fds[0]);
  set_nonblocking(err.fds[0]);

  ProcessResult result;
  size_t written = 0;
  if (options.stdin_data.empty()) in.close_write();
  const auto deadline = Clock::now() + options.timeout;
  char buf[65536];

  while (out.fds[0] >= 0 || err.fds[0] >= 0) {
    std::vector<pollfd> fds;
    if (out.fds[0] >= 0) fds.push_back({out.fds[0], POLLIN, 0});
    if (err.fds[0] >= 0) fds.push_back({err.fds[0], POLLIN, 0});
    if (in.fds[1] >= 0) fds.push_back({in.fds[1], POLLOUT, 0});
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (remaining.count() <= 0) {
      result.timed_out = true;
      kill(-pid, SIGKILL);
      break;
    }
    int rc = poll(fds.data(), fds.size(), static_cast<int>(std::min<int64_t>(remaining.count(), 1000)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (const auto& p : fds) {
      if (p.revents == 0) continue;
      if (p.fd == in.fds[1]) {
        ssize_t n = write(p.fd, options.stdin_data.data() + written, options.stdin_data.size() - written);
        if (n > 0) written += static_cast<size_t>(n);
        if (n < 0 && errno != EAGAIN) written = options.stdin_data.size();
        if (written >= options.stdin_data.size()) in.close_write();
        continue;
      }
      ssize_t n = read(p.fd, buf, sizeof(buf));
      if (n > 0) {
        (p.fd == out.fds[0] ? result.out : result.err).append(buf, static_cast<size_t>(n));
      } else if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
        if (p.fd == out.fds[0]) out.close_read();
        else err.close_read();
      }
    }
  }
  in.close_write();

  int status = 0;
  if (result.timed_out) {
    waitpid(pid, &status, 0);
    result.exit_code = -1;
    return result;
  }
  // Output closed; the child may still be running if it detached its fds.
  while (true) {
    pid_t w = waitpid(pid, &status, WNOHANG);
    if (w == pid) break;
    if (w < 0 && errno != EINTR) break;
    if (Clock::now() >= deadline) {
      result.timed_out = true;
      kill(-pid, SIGKILL);
      waitpid(pid, &status, 0);
      result.exit_code = -1;
      return result;
    }
    usleep(1000);
  }
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  else if (WIFSIGNALED(status)) result.exit_code = 128 + WTERMSIG(status);
  return result;
}

ProcessResult run_shell(const std::string& command, const ProcessOptions& options) {
  return run_process({"/bin/sh", "-c", command}, options);
}

std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out.push_back(c);
  }
  out += "'";
  return out;
}

ChildProcess::ChildProcess(const std::vector<std::string>& argv, const std::filesystem::path& cwd) {
  if (argv.empty()) throw Error(ErrorCode::BackendUnavailable, "empty server command");
  auto env = build_env({});
  Pipe in, out;
  int devnull = open("/dev/null", O_WRONLY | O_CLOEXEC);
  pid_t pid = fork();
  if (pid < 0) throw Error(ErrorCode::BackendUnavailable, std::string("fork: ") + std::strerror(errno));
  if (pid == 0) exec_child(argv, cwd, env, in.fds[0], out.fds[1], devnull);
  if (devnull >= 0) close(devnull);
  in.close_read();
  out.close_write();
  pid_ = pid;
  in_fd_ = in.fds[1];
  out_fd_ = out.fds[0];
  in.fds[1] = -1;
  out.fds[0] = -1;
  set_nonblocking(out_fd_);
  signal(SIGPIPE, SIG_IGN);
}

ChildProcess::~ChildProcess() {
  close_stdin();
  if (out_fd_ >= 0) close(out_fd_);
  if (pid_ > 0) {
    int status = 0;
    if (waitpid(pid_, &status, WNOHANG) == 0) {
      kill(pid_, SIGKILL);
      waitpid(pid_, &status, 0);
    }
  }
}

void ChildProcess::write(std::string_view bytes) {
  size_t done = 0;
  while (done < bytes.size()) {
    ssize_t n = ::write(in_fd_, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::BackendUnavailable, std::string("write to child: ") + std::strerror(errno));
    }
    done += static_cast<size_t>(n);
  }
}

bool ChildProcess::fill(std::chrono::milliseconds timeout) {
  pollfd p{out_fd_, POLLIN, 0};
  int rc = poll(&p, 1, static_cast<int>(timeout.count()));
  if (rc <= 0) return false;
  char buf[8192];
  ssize_t n = read(out_fd_, buf, sizeof(buf));
  if (n <= 0) return false;
  buffer_.append(buf, static_cast<size_t>(n));
  return true;
}

std::optional<std::string> ChildProcess::read_exact(size_t n, std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  while (buffer_.size() < n) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0 || !fill(left)) return std::nullopt;
  }
  std::string out = buffer_.substr(0, n);
  buffer_.erase(0, n);
  return out;
}

std::optional<std::string> ChildProcess::read_line(std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  while (true) {
    size_t at = buffer_.find("\r\n");
    if (at != std::string::npos) {
      std::string line = buffer_.substr(0, at + 2);
      buffer_.erase(0, at + 2);
      return line;
    }
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0 || !fill(left)) return std::nullopt;
  }
}

void ChildProcess::close_stdin() {
  if (in_fd_ >= 0) close(in_fd_);
  in_fd_ = -1;
}

int ChildProcess::wait() {
  if (pid_ <= 0) return -1;
  int status = 0;
  waitpid(pid_, &status, 0);
  pid_ = -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace vulnres
