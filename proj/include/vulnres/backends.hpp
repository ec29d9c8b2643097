#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "vulnres/cost.hpp"
#include "vulnres/llm.hpp"
#include "vulnres/localization.hpp"

namespace vulnres {

struct ReplayEntry {
  std::string caller;
  ChatResponse response;
  std::string origin;  // "<script>#<index>" for error messages
};

// Script: {"entries": [entry | {"include": "<relative path>"}]} where an
// entry is {"caller": tag, "response": {"content": text | [lines],
// "content_file": path, "tool_calls": [{"name", "arguments"}], "usage":
// {"input_tokens", "output_tokens"}}}. Paths resolve against the file that
// names them.
std::vector<ReplayEntry> load_replay_script(const std::filesystem::path& path);

struct RecordedRequest {
  std::string caller;
  double temperature = 0.0;
  std::string messages_digest;
  size_t tool_count = 0;
};

// Returns scripted responses in order. A request from a different caller
// than the next entry expects throws ReplayDesync; running out throws
// ScriptExhausted. Both name the step and the requesting stage.
class ReplayBackend final : public LlmBackend {
 public:
  explicit ReplayBackend(std::vector<ReplayEntry> entries);
  static std::unique_ptr<ReplayBackend> from_file(const std::filesystem::path& path);

  ChatResponse complete(const ChatRequest& request) override;
  std::vector<RecordedRequest> requests() const;
  size_t remaining() const;

 private:
  mutable std::mutex mutex_;
  std::vector<ReplayEntry> entries_;
  size_t next_ = 0;
  std::vector<RecordedRequest> requests_;
};

std::string digest_messages(const std::vector<ChatMessage>& messages);

// Records the cost of every call made through it.
class MeteredBackend final : public LlmBackend {
 public:
  MeteredBackend(LlmBackend& inner, const PriceTable& prices, CostRecord& record)
      : inner_(inner), prices_(prices), record_(record) {}
  ChatResponse complete(const ChatRequest& request) override;

 private:
  LlmBackend& inner_;
  const PriceTable& prices_;
  CostRecord& record_;
};

class MeteredEmbedder final : public Embedder {
 public:
  MeteredEmbedder(Embedder& inner, const PriceTable& prices, CostRecord& record)
      : inner_(inner), prices_(prices), record_(record) {}
  EmbeddingBatch embed(const std::vector<std::string>& texts) override;
  std::string model() const override { return inner_.model(); }

 private:
  Embedder& inner_;
  const PriceTable& prices_;
  CostRecord& record_;
};

struct LiveEndpoint {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::string model;
  std::chrono::seconds timeout{300};
};

// Reads VULNRES_API_BASE, VULNRES_API_KEY, and `model_var` (VULNRES_MODEL or
// VULNRES_EMBEDDING_MODEL). Throws InvalidConfig when the key or model is unset.
LiveEndpoint live_endpoint_from_env(const char* model_var = "VULNRES_MODEL");

// OpenAI-compatible /chat/completions with tool calling.
class OpenAiChatBackend final : public LlmBackend {
 public:
  explicit OpenAiChatBackend(LiveEndpoint endpoint);
  ChatResponse complete(const ChatRequest& request) override;

  // Request body and response parsing, exposed for tests.
  Json request_body(const ChatRequest& request) const;
  static ChatResponse parse_response(const Json& body);

 private:
  LiveEndpoint endpoint_;
};

// OpenAI-compatible /embeddings.
class OpenAiEmbedder final : public Embedder {
 public:
  explicit OpenAiEmbedder(LiveEndpoint endpoint, size_t batch_size = 64);
  EmbeddingBatch embed(const std::vector<std::string>& texts) override;
  std::string model() const override { return endpoint_.model; }

 private:
  LiveEndpoint endpoint_;
  size_t batch_size_;
};

}  // namespace vulnres
