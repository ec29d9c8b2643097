#include <cctype>
#include <cstdlib>
#include <regex>

#include <fmt/format.h>

#include "vulnres/agents.hpp"
#include "vulnres/error.hpp"
#include "vulnres/util/text.hpp"

namespace vulnres {

namespace detail {
const std::map<std::string_view, std::string_view>& prompt_assets();
}

std::string prompt_section(std::string_view asset, std::string_view section) {
  const auto& assets = detail::prompt_assets();
  auto it = assets.find(asset);
  if (it == assets.end()) throw Error(ErrorCode::InvalidConfig, fmt::format("no prompt asset '{}'", asset));
  std::string body;
  bool inside = false;
  bool found = false;
  for (auto line : text::split_lines(it->second)) {
    if (line.substr(0, 3) == "@@ ") {
      inside = text::trim(line.substr(3)) == section;
      found = found || inside;
      continue;
    }
    if (inside) body += std::string(line) + "\n";
  }
  if (!found) throw Error(ErrorCode::InvalidConfig, fmt::format("prompt asset '{}' has no section '{}'", asset, section));
  while (!body.empty() && (body.back() == '\n' || body.back() == ' ')) body.pop_back();
  return body;
}

std::string fill_template(std::string text, const std::map<std::string, std::string>& slots) {
  for (const auto& [key, value] : slots) text = text::replace_all(std::move(text), "{{" + key + "}}", value);
  return text;
}

AgentSpec cpc_agent_spec() {
  AgentSpec spec;
  spec.name = "CPCAgent";
  spec.caller = "cpc";
  spec.allowed_tools = static_tool_names();
  spec.max_steps = 25;
  spec.prompt.objective = prompt_section("cpc", "objective");
  spec.prompt.analysis_process = prompt_section("cpc", "analysis_process");
  spec.prompt.output_format = prompt_section("cpc", "output_format");
  return spec;
}

AgentSpec spa_agent_spec() {
  AgentSpec spec;
  spec.name = "SPAAgent";
  spec.caller = "spa";
  spec.allowed_tools = all_tool_names();
  spec.max_steps = 40;
  spec.prompt.objective = prompt_section("spa", "objective");
  spec.prompt.analysis_process = prompt_section("spa", "analysis_process");
  spec.prompt.output_format = prompt_section("spa", "output_format");
  return spec;
}

template <typename Report>
std::string AgentOutcome<Report>::text() const {
  if (!report) return raw_text;
  if constexpr (std::is_same_v<Report, ContextAnalysisReport>) return render_context_report(*report);
  else return render_property_report(*report);
}

template struct AgentOutcome<ContextAnalysisReport>;
template struct AgentOutcome<PropertyAnalysisReport>;

namespace {

template <typename Report, typename Parse>
AgentOutcome<Report> drive(AgentSpec spec, const AgentInputs& inputs, const Toolbox& toolbox, LlmBackend& llm,
                           Parse parse) {
  spec.prompt.issue_report = inputs.issue;
  spec.prompt.repo_structure = inputs.repo_tree;
  if (inputs.max_steps) spec.max_steps = *inputs.max_steps;

  AgentOutcome<Report> out;
  out.run = run_react(spec, llm, toolbox);
  out.raw_text = out.run.final_text;
  try {
    out.report = parse(out.raw_text);
    return out;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ReportParseFailure) throw;
    out.parse_error = e.what();
  }

  // One re-ask with the format spec, then the raw text stands.
  out.reasked = true;
  ChatRequest request{spec.caller, out.run.conversation, {}, spec.temperature};
  request.messages.push_back(ChatMessage::user(fill_template(
      prompt_section("common", "reask"), {{"error", out.parse_error}, {"output_format", spec.prompt.output_format}})));
  ChatResponse response = complete_with_retry(llm, request, spec.llm_retries);
  auto& transcript = out.run.transcript;
  ++transcript.model_turns;
  transcript.steps.push_back({response.content, std::nullopt, "", false});
  out.run.conversation.push_back(request.messages.back());
  out.run.conversation.push_back({"assistant", response.content, {}, ""});
  out.raw_text = response.content;
  try {
    out.report = parse(out.raw_text);
    out.parse_error.clear();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ReportParseFailure) throw;
    out.parse_error = e.what();
  }
  return out;
}

}  // namespace

AgentOutcome<ContextAnalysisReport> run_cpc_agent(const AgentInputs& inputs, const Toolbox& toolbox,
                                                  LlmBackend& llm) {
  return drive<ContextAnalysisReport>(cpc_agent_spec(), inputs, toolbox, llm,
                                      [](const std::string& t) { return parse_context_report(t); });
}

AgentOutcome<PropertyAnalysisReport> run_spa_agent(const AgentInputs& inputs, const Toolbox& toolbox,
                                                   LlmBackend& llm, EditHistory& history) {
  AgentSpec spec = spa_agent_spec();
  spec.prompt.context_report = inputs.context_report.value_or("(not available)");
  auto restore = [&history] {
    if (!history.commits().empty()) history.rollback_all();
  };
  try {
    auto out = drive<PropertyAnalysisReport>(std::move(spec), inputs, toolbox, llm,
                                             [](const std::string& t) { return parse_property_report(t); });
    restore();
    return out;
  } catch (...) {
    restore();
    throw;
  }
}

std::string assert_prelude_source() {
  return R"(#ifndef VULNRES_SAFETY_PROPERTY_ASSERT_H
#define VULNRES_SAFETY_PROPERTY_ASSERT_H
#include <stdio.h>

/* cond is the condition that must hold; id is a string literal. Logs one
   line per evaluation and never stops the program. */
#define SAFETY_PROPERTY_ASSERT(cond, id)                              \
  do {                                                                \
    if (cond)                                                         \
      fprintf(stderr, "[SPA] %s PASS\n", (id));                       \
    else                                                              \
      fprintf(stderr, "[SPA] %s FAIL expr=\"%s\"\n", (id), #cond);    \
  } while (0)

#endif
)";
}

void install_assert_prelude(Sandbox& sandbox) {
  const std::string rel(kAssertPreludePath);
  try {
    sandbox.write_file(rel, assert_prelude_source());
  } catch (const Error& e) {
    throw Error(ErrorCode::WriteFailure, fmt::format("cannot install {}: {}", rel, e.what()));
  }
  const std::string flag = "-include " + sandbox.exec_path(rel);
  for (const char* var : {"CFLAGS", "CXXFLAGS"}) {
    std::string base;
    if (auto it = sandbox.env().find(var); it != sandbox.env().end()) base = it->second;
    else if (const char* inherited = std::getenv(var)) base = inherited;
    if (base.find(flag) != std::string::npos) continue;
    sandbox.set_env(var, base.empty() ? flag : base + " " + flag);
  }
}

namespace {

constexpr std::string_view kIssueHeading = "## Issue Report";
constexpr std::string_view kContextHeading = "## Context Analysis Report";
constexpr std::string_view kPropertyHeading = "## Property Analysis Report";

const std::regex& heading_like() {
  static const std::regex re(R"(^ *## (Issue Report|Context Analysis Report|Property Analysis Report)$)");
  return re;
}

std::string_view strip_trailing_space(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Body lines that look like a section heading get one extra leading space,
// so section boundaries stay unambiguous.
std::string escape_body(std::string_view body) {
  std::string out;
  for (auto line : text::split_lines(body)) {
    std::string l(line);
    if (std::regex_match(l, heading_like())) out += ' ';
    out += l + "\n";
  }
  return out;
}

std::string unescape_body(std::string_view body) {
  std::string out;
  for (auto line : text::split_lines(body)) {
    std::string l(line);
    if (std::regex_match(l, heading_like())) l.erase(0, 1);
    out += l + "\n";
  }
  return out;
}

}  // namespace

EnhancedIssueReport build_enhanced_report(std::string issue, std::optional<std::string> context_report,
                                          std::optional<std::string> property_report) {
  auto canonical = [](std::optional<std::string> body) -> std::optional<std::string> {
    if (!body) return body;
    return std::string(strip_trailing_space(*body));
  };
  return EnhancedIssueReport{*canonical(std::move(issue)), canonical(std::move(context_report)),
                             canonical(std::move(property_report))};
}

std::string EnhancedIssueReport::render() const {
  std::string out = fmt::format("{}\n{}", kIssueHeading, escape_body(strip_trailing_space(issue_text)));
  if (context_report)
    out += fmt::format("\n{}\n{}", kContextHeading, escape_body(strip_trailing_space(*context_report)));
  if (property_report)
    out += fmt::format("\n{}\n{}", kPropertyHeading, escape_body(strip_trailing_space(*property_report)));
  return out;
}

EnhancedIssueReport parse_enhanced_report(std::string_view text) {
  EnhancedIssueReport out;
  std::optional<std::string>* current = nullptr;
  std::optional<std::string> issue;
  bool seen_issue = false;
  for (auto line : text::split_lines(text)) {
    if (line == kIssueHeading && !seen_issue) {
      seen_issue = true;
      current = &issue;
      issue = "";
      continue;
    }
    if (line == kContextHeading || line == kPropertyHeading) {
      current = line == kContextHeading ? &out.context_report : &out.property_report;
      *current = "";
      continue;
    }
    if (!current) throw Error(ErrorCode::ReportParseFailure, "enhanced report must start with the issue heading");
    **current += std::string(line) + "\n";
  }
  if (!seen_issue) throw Error(ErrorCode::ReportParseFailure, "missing issue heading");
  // Bodies carry no trailing whitespace, so separators and final newlines go.
  auto finish = [](std::optional<std::string>& body) {
    if (body) *body = std::string(strip_trailing_space(unescape_body(*body)));
  };
  finish(issue);
  finish(out.context_report);
  finish(out.property_report);
  out.issue_text = *issue;
  return out;
}

}  // namespace vulnres
