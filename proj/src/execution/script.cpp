#include <fmt/format.h>
#include <json.hpp>
#include <unistd.h>

#include "vulnres/error.hpp"
#include "vulnres/execution.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;

namespace vulnres {
namespace {

constexpr std::string_view kViolationTag = "@@VULNRES-VIOLATION@@ ";

// Reads {logs, code} from stdin, installs stubs, then runs the code as __main__.
constexpr std::string_view kPrelude = R"PY(
import sys as _vr_sys
import json as _vr_json
import builtins as _vr_builtins
import traceback as _vr_traceback

_vr_payload = _vr_json.loads(_vr_sys.stdin.read())
_VR_LOGS = _vr_payload["logs"]
_VR_CODE = _vr_payload["code"]
_VR_TAG = _vr_payload["tag"]


class SandboxViolation(Exception):
    pass


def _vr_violation(what):
    _vr_sys.stderr.write(_VR_TAG + what + "\n")
    _vr_sys.stderr.flush()
    return SandboxViolation(what + " is blocked by the sandboxed execution environment")


def _vr_stub(what):
    def stub(*args, **kwargs):
        raise _vr_violation(what)
    return stub


def get_poc_output(name):
    if name not in _VR_LOGS:
        raise KeyError("unknown PoC output name: " + str(name))
    return _VR_LOGS[name]


_VR_BLOCKED = {
    "os", "posix", "nt", "subprocess", "shutil", "pathlib", "io", "_io", "socket", "ctypes",
    "tempfile", "glob", "fcntl", "pty", "multiprocessing", "signal", "importlib", "mmap",
    "sqlite3", "urllib", "http", "ftplib", "asyncio", "threading", "_thread", "code", "runpy",
    "pickle", "shelve", "zipfile", "tarfile", "gzip", "bz2", "lzma", "zipimport", "fileinput",
    "resource", "pwd", "grp", "sysconfig", "webbrowser", "sys",
}

_vr_real_import = _vr_builtins.__import__


def _vr_import(name, globals=None, locals=None, fromlist=(), level=0):
    from_user = globals is None or globals.get("__name__") == "__agent__"
    if from_user and name.split(".")[0] in _VR_BLOCKED:
        raise _vr_violation("import " + name)
    return _vr_real_import(name, globals, locals, fromlist, level)


# Entry points reachable through allowed modules (e.g. random._os) are stubbed too.
import os as _vr_os
import posix as _vr_posix
import io as _vr_io
import subprocess as _vr_subprocess
import shutil as _vr_shutil
import linecache as _vr_linecache

_VR_OS_NAMES = [
    "system", "popen", "fork", "forkpty", "execv", "execve", "execl", "execle", "execlp", "execlpe",
    "execvp", "execvpe", "spawnv", "spawnve", "spawnl", "spawnle", "spawnlp", "spawnlpe", "spawnvp",
    "spawnvpe", "posix_spawn", "posix_spawnp", "kill", "killpg", "open", "openpty", "remove", "unlink",
    "rmdir", "removedirs", "mkdir", "makedirs", "rename", "renames", "replace", "truncate", "ftruncate",
    "chmod", "chown", "lchown", "symlink", "link", "mkfifo", "mknod", "utime", "chdir", "fchdir",
    "chroot", "listdir", "scandir", "walk", "stat", "lstat", "access", "putenv", "unsetenv",
]
# The import system reads through posix.stat/listdir, so posix keeps those.
_VR_POSIX_KEEP = {"stat", "lstat", "listdir", "scandir", "access"}
for _vr_n in _VR_OS_NAMES:
    if hasattr(_vr_os, _vr_n):
        setattr(_vr_os, _vr_n, _vr_stub("os." + _vr_n))
    if hasattr(_vr_posix, _vr_n) and _vr_n not in _VR_POSIX_KEEP:
        setattr(_vr_posix, _vr_n, _vr_stub("posix." + _vr_n))
for _vr_n in ("open", "FileIO"):
    setattr(_vr_io, _vr_n, _vr_stub("io." + _vr_n))
for _vr_n in ("Popen", "run", "call", "check_call", "check_output", "getoutput", "getstatusoutput"):
    setattr(_vr_subprocess, _vr_n, _vr_stub("subprocess." + _vr_n))
for _vr_n in ("copy", "copy2", "copyfile", "copytree", "move", "rmtree", "chown", "make_archive"):
    setattr(_vr_shutil, _vr_n, _vr_stub("shutil." + _vr_n))

_vr_builtins.__import__ = _vr_import
_vr_builtins.open = _vr_stub("open")
_vr_builtins.input = _vr_stub("input")
_vr_builtins.breakpoint = _vr_stub("breakpoint")
_vr_builtins.exit = _vr_stub("exit")
_vr_builtins.quit = _vr_stub("quit")

_vr_linecache.cache["<agent-script>"] = (len(_VR_CODE), None, _VR_CODE.splitlines(True), "<agent-script>")
_vr_globals = {"__name__": "__agent__", "__builtins__": _vr_builtins,
               "get_poc_output": get_poc_output, "SandboxViolation": SandboxViolation}
try:
    exec(compile(_VR_CODE, "<agent-script>", "exec"), _vr_globals)
except BaseException as _vr_exc:
    # Only frames of the agent's own code are shown.
    _vr_frames = _vr_traceback.StackSummary.extract(
        _vr_traceback.walk_tb(_vr_exc.__traceback__), lookup_lines=False)
    _vr_frames = _vr_traceback.StackSummary.from_list(
        [f for f in _vr_frames if f.filename == "<agent-script>"])
    _vr_text = ["Traceback (most recent call last):\n"] + _vr_traceback.format_list(_vr_frames)
    _vr_text += _vr_traceback.format_exception_only(type(_vr_exc), _vr_exc)
    _vr_sys.stdout.flush()
    _vr_sys.stderr.write("".join(_vr_text))
    _vr_sys.stderr.flush()
    _vr_sys.exit(1)
)PY";

// Scratch directory removed on scope exit.
class ScratchDir {
 public:
  ScratchDir() {
    std::string tmpl = (fs::temp_directory_path() / "vulnres-script-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw Error(ErrorCode::SandboxUnavailable, "cannot create script scratch dir");
    path_ = tmpl;
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace

ScriptSandbox::ScriptSandbox(const LogStore& logs, ScriptConfig config) : logs_(logs), config_(std::move(config)) {}

bool ScriptSandbox::available(const ScriptConfig& config) {
  try {
    std::vector<std::string> argv = config.interpreter;
    argv.insert(argv.end(), {"-c", "pass"});
    return run_process(argv, {}).exit_code == 0;
  } catch (const std::exception&) {
    return false;
  }
}

ScriptResult ScriptSandbox::run_script(const std::string& code) const {
  ScratchDir scratch;
  text::write_file(scratch.path() / "prelude.py", kPrelude);
  nlohmann::json payload = {{"logs", logs_.all()}, {"code", code}, {"tag", std::string(kViolationTag)}};

  // File-size limit 0 makes any stray file write fail at the OS level.
  std::string launcher = "ulimit -f 0 2>/dev/null; exec";
  for (const auto& part : config_.interpreter) launcher += " " + shell_quote(part);
  launcher += " -I -B -u prelude.py";

  ProcessOptions opts;
  opts.cwd = scratch.path();
  opts.stdin_data = payload.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  opts.timeout = config_.timeout;
  opts.merge_stderr = true;
  ProcessResult p;
  try {
    p = run_process({"/bin/sh", "-c", launcher}, opts);
  } catch (const Error& e) {
    throw Error(ErrorCode::SandboxUnavailable, e.what());
  }
  if (p.exit_code == 127) throw Error(ErrorCode::SandboxUnavailable, "script interpreter not found");

  ScriptResult r;
  r.exit_code = p.exit_code;
  r.timed_out = p.timed_out;
  std::string output;
  for (auto line : text::split_lines(p.out)) {
    if (line.substr(0, kViolationTag.size()) == kViolationTag) {
      r.violations.emplace_back(line.substr(kViolationTag.size()));
      continue;
    }
    output.append(line).push_back('\n');
  }
  if (!p.out.empty() && p.out.back() != '\n' && !output.empty()) output.pop_back();
  if (r.timed_out) output += fmt::format("\n[script timed out after {} ms]\n", config_.timeout.count());
  if (output.size() > config_.output_cap_bytes) {
    size_t dropped = output.size() - config_.output_cap_bytes;
    output.resize(config_.output_cap_bytes);
    output += fmt::format("\n... [output truncated: {} bytes elided] ...\n", dropped);
    r.truncated = true;
  }
  r.output = std::move(output);
  return r;
}

std::string ScriptSandbox::render(const ScriptResult& r) {
  std::string out = r.output;
  if (!r.violations.empty()) {
    out += "\n[sandbox] blocked operations: " + text::join(r.violations, "; ") + "\n";
  }
  if (r.exit_code != 0 && !r.timed_out) out += fmt::format("[exit code {}]\n", r.exit_code);
  return out;
}

}  // namespace vulnres
