#include <fmt/format.h>

#include "vulnres/agents.hpp"
#include "vulnres/error.hpp"

namespace vulnres {

int Transcript::tool_call_steps() const {
  int n = 0;
  for (const auto& step : steps) n += step.tool_call.has_value();
  return n;
}

ChatResponse complete_with_retry(LlmBackend& llm, const ChatRequest& request, int retries) {
  for (int attempt = 0;; ++attempt) {
    try {
      return llm.complete(request);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::LlmBackendError || attempt >= retries) throw;
    }
  }
}

std::string PromptSections::render() const {
  std::string out;
  auto section = [&out](std::string_view heading, const std::string& body) {
    out += fmt::format("## {}\n{}\n", heading, body);
    if (!body.empty() && body.back() != '\n') out += '\n';
    else if (body.empty()) out += '\n';
  };
  section("Objective", objective);
  section("Available Tools", available_tools);
  section("Issue Report", issue_report);
  if (context_report) section("Context Analysis Report", *context_report);
  section("Repository Structure", repo_structure);
  section("Analysis Process", analysis_process);
  section("Output Format", output_format);
  return out;
}

namespace {

std::string describe_tools(const std::vector<ToolSchema>& schemas) {
  std::string out;
  for (const auto& s : schemas) {
    std::vector<std::string> params;
    if (s.parameters.contains("properties"))
      for (const auto& [key, _] : s.parameters["properties"].items()) params.push_back(key);
    out += fmt::format("- {}({}): {}\n", s.name, fmt::join(params, ", "), s.description);
  }
  return out;
}

std::string refusal(const std::string& name, const std::set<std::string>& allowed) {
  Json r{{"error", "tool_not_allowed"}, {"tool", name}, {"allowed", allowed}};
  return r.dump();
}

}  // namespace

ReactResult run_react(const AgentSpec& spec, LlmBackend& llm, const Toolbox& toolbox) {
  for (const auto& name : toolbox.names())
    if (!spec.allowed_tools.count(name))
      throw Error(ErrorCode::InvalidConfig, fmt::format("{} toolbox exposes disallowed tool {}", spec.name, name));

  ReactResult result;
  Transcript& t = result.transcript;
  t.agent = spec.name;

  ChatRequest request;
  request.caller = spec.caller;
  request.temperature = spec.temperature;
  request.tools = toolbox.schemas();
  PromptSections prompt = spec.prompt;
  if (prompt.available_tools.empty()) prompt.available_tools = describe_tools(request.tools);
  request.messages.push_back(ChatMessage::system(prompt_section("common", "system")));
  request.messages.push_back(ChatMessage::user(prompt.render()));

  std::string last_thought;
  for (int turn = 0; turn < spec.max_steps; ++turn) {
    ChatResponse response = complete_with_retry(llm, request, spec.llm_retries);
    ++t.model_turns;
    if (!response.content.empty()) last_thought = response.content;
    if (response.tool_calls.empty()) {
      t.steps.push_back({response.content, std::nullopt, "", false});
      result.final_text = response.content;
      request.messages.push_back({"assistant", response.content, {}, ""});
      result.conversation = std::move(request.messages);
      return result;
    }
    ChatMessage assistant{"assistant", response.content, response.tool_calls, ""};
    for (size_t i = 0; i < assistant.tool_calls.size(); ++i)
      if (assistant.tool_calls[i].id.empty()) assistant.tool_calls[i].id = fmt::format("call_{}_{}", turn, i);
    request.messages.push_back(assistant);

    for (size_t i = 0; i < assistant.tool_calls.size(); ++i) {
      const ToolCall& call = assistant.tool_calls[i];
      TranscriptStep step{i == 0 ? response.content : "", call, "", false};
      if (!spec.allowed_tools.count(call.name) || !toolbox.has(call.name)) {
        step.refused = true;
        step.observation = refusal(call.name, toolbox.names());
        ++t.refusals;
      } else {
        step.observation = toolbox.invoke(call.name, call.arguments);
      }
      ++t.tool_counts[call.name];
      request.messages.push_back({"tool", step.observation, {}, call.id});
      t.steps.push_back(std::move(step));
    }
  }

  // Budget spent without a report: one tool-less turn asking for it.
  result.forced_finalize = true;
  request.tools.clear();
  request.messages.push_back(ChatMessage::user(prompt_section("common", "finalize")));
  ChatResponse response = complete_with_retry(llm, request, spec.llm_retries);
  ++t.model_turns;
  t.steps.push_back({response.content, std::nullopt, "", false});
  if (response.tool_calls.empty() && !response.content.empty()) {
    result.final_text = response.content;
  } else {
    result.max_steps_exceeded = true;
    result.final_text = response.content.empty() ? last_thought : response.content;
  }
  request.messages.push_back({"assistant", response.content, {}, ""});
  result.conversation = std::move(request.messages);
  return result;
}

}  // namespace vulnres
