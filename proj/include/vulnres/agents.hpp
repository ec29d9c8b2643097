#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vulnres/code_search.hpp"
#include "vulnres/edit_engine.hpp"
#include "vulnres/execution.hpp"
#include "vulnres/llm.hpp"
#include "vulnres/symbol_analysis.hpp"

namespace vulnres {

namespace tool_names {
inline constexpr std::string_view kSearchCodeElement = "search_code_element";
inline constexpr std::string_view kReadCode = "read_code";
inline constexpr std::string_view kResolveCodeSymbol = "resolve_code_symbol";
inline constexpr std::string_view kRunPoc = "run_poc";
inline constexpr std::string_view kApplyEdits = "apply_edits";
inline constexpr std::string_view kRollbackLatest = "rollback_the_latest_one_edit_set";
inline constexpr std::string_view kRollbackAll = "rollback_all_applied_edits";
inline constexpr std::string_view kRunPythonCode = "run_python_code";
}  // namespace tool_names

std::set<std::string> static_tool_names();
std::set<std::string> all_tool_names();

// Named tool handlers. A handler returns the observation text; Error
// exceptions are turned into "error: ..." observations by invoke().
class Toolbox {
 public:
  using Handler = std::function<std::string(const Json& arguments)>;

  void add(ToolSchema schema, Handler handler);
  bool has(const std::string& name) const { return tools_.count(name) > 0; }
  std::set<std::string> names() const;
  std::vector<ToolSchema> schemas() const;
  std::string invoke(const std::string& name, const Json& arguments) const;

  // Copy exposing exactly `names`. Throws InvalidConfig when one is missing.
  Toolbox restricted_to(const std::set<std::string>& names) const;

 private:
  struct Entry {
    ToolSchema schema;
    Handler handler;
  };
  std::map<std::string, Entry> tools_;
};

// Toolkits bound to one workspace; null members leave their tools out.
struct Toolkits {
  const CodeSearch* search = nullptr;
  SymbolBackend* symbols = nullptr;
  PocToolkit* poc = nullptr;
  EditHistory* history = nullptr;
  const ScriptSandbox* scripts = nullptr;
};

Toolbox make_toolbox(const Toolkits& kits);

struct PromptSections {
  std::string objective;
  std::string available_tools;
  std::string issue_report;
  std::string repo_structure;
  std::string analysis_process;
  std::string output_format;
  std::optional<std::string> context_report;  // SPA agent only

  std::string render() const;
};

struct AgentSpec {
  std::string name;
  std::string caller;  // LLM caller tag
  std::set<std::string> allowed_tools;
  PromptSections prompt;
  int max_steps = 25;
  double temperature = 0.0;
  int llm_retries = 2;
};

// Prompt sections from the bundled templates; issue/tree/context filled in
// by the caller.
AgentSpec cpc_agent_spec();
AgentSpec spa_agent_spec();

struct TranscriptStep {
  std::string thought;
  std::optional<ToolCall> tool_call;
  std::string observation;
  bool refused = false;
};

struct Transcript {
  std::string agent;
  std::vector<TranscriptStep> steps;
  std::map<std::string, int> tool_counts;
  int model_turns = 0;
  int refusals = 0;

  int tool_call_steps() const;
};

struct ReactResult {
  Transcript transcript;
  std::string final_text;
  bool forced_finalize = false;  // the "finalize now" turn was needed
  bool max_steps_exceeded = false;  // no report even after it; final_text is best effort
  std::vector<ChatMessage> conversation;  // including the final assistant turn
};

// Sends one request, retrying LlmBackendError up to `retries` times.
ChatResponse complete_with_retry(LlmBackend& llm, const ChatRequest& request, int retries);

ReactResult run_react(const AgentSpec& spec, LlmBackend& llm, const Toolbox& toolbox);

struct SourceRef {
  std::string file;
  std::string element;  // empty when not inside a named element
  LineRange lines;
  friend bool operator==(const SourceRef&, const SourceRef&) = default;
};

struct ContextItem {
  std::string code;
  SourceRef source;
  std::string trace_link;  // "not in trace" or a frame citation
  std::string rationale;
};

struct ContextAnalysisReport {
  std::vector<ContextItem> items;
  std::string insights;
};

enum class PropertyResult { Pass, Fail };
std::string_view to_string(PropertyResult result);

struct SafetyProperty {
  std::string assertion;
  std::string file;
  int line = 0;
  std::string purpose;
  PropertyResult result = PropertyResult::Pass;
  std::string interpretation;
};

struct PropertyAnalysisReport {
  std::vector<SafetyProperty> properties;
  std::string insights;
};

// Frame index cited by a trace link ("frame #0 ..."), if any.
std::optional<int> trace_frame(std::string_view trace_link);

// Parsers throw Error(ReportParseFailure) naming the first missing field.
ContextAnalysisReport parse_context_report(std::string_view text);
std::string render_context_report(const ContextAnalysisReport& report);
PropertyAnalysisReport parse_property_report(std::string_view text);
std::string render_property_report(const PropertyAnalysisReport& report);

template <typename Report>
struct AgentOutcome {
  std::optional<Report> report;  // empty when parsing failed twice
  std::string raw_text;          // last final text from the model
  bool reasked = false;
  std::string parse_error;
  ReactResult run;

  // Rendered report, or the raw text when it never parsed.
  std::string text() const;
};

struct AgentInputs {
  std::string issue;
  std::string repo_tree;
  std::optional<std::string> context_report;
  std::optional<int> max_steps;  // overrides the spec default
};

AgentOutcome<ContextAnalysisReport> run_cpc_agent(const AgentInputs& inputs, const Toolbox& toolbox,
                                                  LlmBackend& llm);

// Rolls back every applied edit set before returning, also on error.
AgentOutcome<PropertyAnalysisReport> run_spa_agent(const AgentInputs& inputs, const Toolbox& toolbox,
                                                   LlmBackend& llm, EditHistory& history);

inline constexpr std::string_view kAssertPreludePath = ".vulnres/safety_property_assert.h";

// Writes the SAFETY_PROPERTY_ASSERT header into the workspace and adds a
// forced include to CFLAGS/CXXFLAGS for every later exec.
void install_assert_prelude(Sandbox& sandbox);
std::string assert_prelude_source();

struct EnhancedIssueReport {
  std::string issue_text;
  std::optional<std::string> context_report;
  std::optional<std::string> property_report;

  std::string render() const;
};

// Bodies are kept without trailing whitespace; distinct results render
// to distinct texts.
EnhancedIssueReport build_enhanced_report(std::string issue, std::optional<std::string> context_report,
                                          std::optional<std::string> property_report);

// Inverse of EnhancedIssueReport::render on built reports.
EnhancedIssueReport parse_enhanced_report(std::string_view text);

// Bundled prompt text by asset and section name. Throws InvalidConfig.
std::string prompt_section(std::string_view asset, std::string_view section);
std::string fill_template(std::string text, const std::map<std::string, std::string>& slots);

}  // namespace vulnres
