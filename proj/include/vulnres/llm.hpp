#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace vulnres {

using Json = nlohmann::json;

struct ToolCall {
  std::string id;
  std::string name;
  Json arguments = Json::object();
};

struct ChatMessage {
  std::string role;  // system | user | assistant | tool
  std::string content;
  std::vector<ToolCall> tool_calls;  // assistant turns only
  std::string tool_call_id;          // tool turns only

  static ChatMessage system(std::string text) { return {"system", std::move(text), {}, {}}; }
  static ChatMessage user(std::string text) { return {"user", std::move(text), {}, {}}; }
};

struct ToolSchema {
  std::string name;
  std::string description;
  Json parameters;  // JSON Schema object
};

struct ChatRequest {
  // Identifies the pipeline stage issuing the call, e.g. "cpc" or
  // "generation". Replay scripts are keyed on it.
  std::string caller;
  std::vector<ChatMessage> messages;
  std::vector<ToolSchema> tools;
  double temperature = 0.0;
};

struct TokenUsage {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

struct ChatResponse {
  std::string content;
  std::vector<ToolCall> tool_calls;
  TokenUsage usage;
  std::string model;
};

// Chat completion with tool calling. Transport failures throw
// Error(LlmBackendError); callers may retry those.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

Json to_json(const ChatMessage& message);
Json to_json(const ToolCall& call);
Json to_json(const ToolSchema& schema);

}  // namespace vulnres
