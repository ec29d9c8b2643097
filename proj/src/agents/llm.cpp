#include "vulnres/llm.hpp"

namespace vulnres {

Json to_json(const ToolCall& call) {
  return Json{{"id", call.id},
              {"type", "function"},
              {"function", {{"name", call.name}, {"arguments", call.arguments.dump()}}}};
}

Json to_json(const ChatMessage& message) {
  Json out{{"role", message.role}, {"content", message.content}};
  if (!message.tool_calls.empty()) {
    out["tool_calls"] = Json::array();
    for (const auto& call : message.tool_calls) out["tool_calls"].push_back(to_json(call));
  }
  if (!message.tool_call_id.empty()) out["tool_call_id"] = message.tool_call_id;
  return out;
}

Json to_json(const ToolSchema& schema) {
  return Json{{"type", "function"},
              {"function",
               {{"name", schema.name}, {"description", schema.description}, {"parameters", schema.parameters}}}};
}

}  // namespace vulnres
