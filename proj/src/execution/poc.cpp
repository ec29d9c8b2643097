#include <fmt/format.h>

#include "vulnres/error.hpp"
#include "vulnres/execution.hpp"
#include "vulnres/util/text.hpp"

namespace vulnres {
namespace {

const std::vector<std::string> kDefaultSignatures{
    R"(^==[0-9]+==ERROR: )",
    R"(^SUMMARY: [A-Za-z]*Sanitizer)",
    R"(: runtime error: )",
};

}  // namespace

std::string AssertionSummary::render() const {
  std::string out = fmt::format("assertions: {} passed, {} failed", passed, failed);
  if (!per_id.empty()) {
    std::vector<std::string> parts;
    for (const auto& [id, t] : per_id) parts.push_back(fmt::format("{} {}/{}", id, t.pass, t.fail));
    out += " (id pass/fail: " + text::join(parts, ", ") + ")";
  }
  return out;
}

AssertionSummary summarize_assertions(std::string_view log) {
  static const std::regex kLine(R"(^\[SPA\] (\S+) (PASS|FAIL)( expr=".*")?\s*$)");
  AssertionSummary s;
  for (auto line : text::split_lines(log)) {
    if (line.substr(0, 6) != "[SPA] ") continue;
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_match(line.begin(), line.end(), m, kLine)) continue;
    auto& tally = s.per_id[m[1].str()];
    if (m[2] == "PASS") {
      ++s.passed;
      ++tally.pass;
    } else {
      ++s.failed;
      ++tally.fail;
    }
  }
  return s;
}

std::string truncate_log(std::string_view log, size_t head_lines, size_t tail_lines, const std::string& name) {
  auto lines = text::split_lines(log);
  if (lines.size() <= head_lines + tail_lines) return std::string(log);
  const size_t elided = lines.size() - head_lines - tail_lines;
  std::string out;
  for (size_t i = 0; i < head_lines; ++i) out.append(lines[i]).push_back('\n');
  out += fmt::format("... [{} lines elided; full log stored as '{}'] ...\n", elided, name);
  for (size_t i = lines.size() - tail_lines; i < lines.size(); ++i) out.append(lines[i]).push_back('\n');
  return out;
}

SanitizerSignatures::SanitizerSignatures() : SanitizerSignatures(kDefaultSignatures) {}

SanitizerSignatures::SanitizerSignatures(const std::vector<std::string>& patterns) : patterns_(patterns) {
  for (const auto& p : patterns_) {
    try {
      compiled_.emplace_back(p, std::regex::ECMAScript | std::regex::optimize);
    } catch (const std::regex_error& e) {
      throw Error(ErrorCode::InvalidConfig, fmt::format("bad sanitizer signature '{}': {}", p, e.what()));
    }
  }
}

bool SanitizerSignatures::matches(std::string_view log) const {
  for (auto line : text::split_lines(log)) {
    for (const auto& re : compiled_) {
      if (std::regex_search(line.begin(), line.end(), re)) return true;
    }
  }
  return false;
}

std::string LogStore::store(const std::string& base, std::string log) {
  std::unique_lock lock(mutex_);
  std::string name = names_.fix(base);
  logs_[name] = std::move(log);
  return name;
}

std::string LogStore::get(const std::string& name) const {
  std::shared_lock lock(mutex_);
  auto it = logs_.find(name);
  if (it == logs_.end()) throw Error(ErrorCode::UnknownName, fmt::format("no PoC output named '{}'", name));
  return it->second;
}

bool LogStore::contains(const std::string& name) const {
  std::shared_lock lock(mutex_);
  return logs_.count(name) > 0;
}

std::map<std::string, std::string> LogStore::all() const {
  std::shared_lock lock(mutex_);
  return logs_;
}

PocToolkit::PocToolkit(Sandbox& sandbox, PocConfig config, LogStore& logs)
    : sandbox_(sandbox), config_(std::move(config)), logs_(logs) {
  if (config_.repro_command.empty()) throw Error(ErrorCode::InvalidConfig, "empty reproduction command");
}

PoCRunResult PocToolkit::run_poc(const std::string& unique_name) {
  std::lock_guard lock(run_mutex_);
  PoCRunResult r;
  std::string log;
  if (config_.build_command) {
    auto build = sandbox_.exec(*config_.build_command, config_.timeout);
    if (build.exit_code != 0 || build.timed_out) {
      r.phase = PocPhase::CompileError;
      r.exit_code = build.exit_code;
      r.timed_out = build.timed_out;
      log = build.out;
      if (build.timed_out) log += fmt::format("[vulnres] build timed out after {} ms\n", config_.timeout.count());
    }
  }
  if (r.phase == PocPhase::Ran) {
    auto run = sandbox_.exec(config_.repro_command, config_.timeout);
    r.exit_code = run.exit_code;
    r.timed_out = run.timed_out;
    log = run.out;
    if (run.timed_out) log += fmt::format("[vulnres] PoC timed out after {} ms\n", config_.timeout.count());
  }
  // Counts and the sanitizer verdict come from the full log.
  r.summary = summarize_assertions(log);
  r.sanitizer_triggered = r.phase == PocPhase::Ran && config_.signatures.matches(log);
  r.fixed_name = logs_.store(unique_name.empty() ? std::string("run") : unique_name, log);
  r.truncated_log = truncate_log(log, config_.head_lines, config_.tail_lines, r.fixed_name);
  return r;
}

std::string PocToolkit::render(const PoCRunResult& r) {
  std::string out = fmt::format("fixed_name: {}\n", r.fixed_name);
  if (r.phase == PocPhase::CompileError) {
    out += fmt::format("phase: compile error (exit code {})\n", r.exit_code);
  } else {
    out += fmt::format("phase: ran (exit code {}{})\n", r.exit_code, r.timed_out ? ", timed out" : "");
  }
  out += r.summary.render() + "\n";
  out += fmt::format("sanitizer: {}\n", r.sanitizer_triggered ? "triggered" : "not triggered");
  out += "--- log ---\n";
  out += r.truncated_log;
  return out;
}

}  // namespace vulnres
