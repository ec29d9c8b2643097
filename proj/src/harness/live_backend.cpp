#include <cstdlib>
#include <regex>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <fmt/format.h>

#include "vulnres/backends.hpp"
#include "vulnres/error.hpp"

namespace vulnres {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing '/'
};

SplitUrl split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw Error(ErrorCode::InvalidConfig, "bad API base URL: " + url);
  std::string prefix = m[2].matched ? m[2].str() : "";
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {m[1].str(), prefix};
}

Json post_json(const LiveEndpoint& ep, const std::string& path, const Json& body) {
  SplitUrl url = split_url(ep.base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(std::chrono::seconds(30));
  client.set_read_timeout(ep.timeout);
  client.set_write_timeout(std::chrono::seconds(60));
  httplib::Headers headers{{"Authorization", "Bearer " + ep.api_key}};
  auto res = client.Post(url.prefix + path, headers, body.dump(), "application/json");
  if (!res) throw Error(ErrorCode::LlmBackendError, fmt::format("{}{}: {}", ep.base_url, path, httplib::to_string(res.error())));
  if (res->status != 200)
    throw Error(ErrorCode::LlmBackendError,
                fmt::format("{}{}: HTTP {}: {}", ep.base_url, path, res->status, res->body.substr(0, 500)));
  Json parsed = Json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) throw Error(ErrorCode::LlmBackendError, "response is not JSON");
  return parsed;
}

}  // namespace

LiveEndpoint live_endpoint_from_env(const char* model_var) {
  LiveEndpoint ep;
  if (const char* base = std::getenv("VULNRES_API_BASE")) ep.base_url = base;
  const char* key = std::getenv("VULNRES_API_KEY");
  const char* model = std::getenv(model_var);
  if (!key || !*key) throw Error(ErrorCode::InvalidConfig, "VULNRES_API_KEY is not set");
  if (!model || !*model) throw Error(ErrorCode::InvalidConfig, fmt::format("{} is not set", model_var));
  ep.api_key = key;
  ep.model = model;
  return ep;
}

OpenAiChatBackend::OpenAiChatBackend(LiveEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

Json OpenAiChatBackend::request_body(const ChatRequest& request) const {
  Json body{{"model", endpoint_.model}, {"temperature", request.temperature}, {"messages", Json::array()}};
  for (const auto& m : request.messages) body["messages"].push_back(to_json(m));
  if (!request.tools.empty()) {
    body["tools"] = Json::array();
    for (const auto& t : request.tools) body["tools"].push_back(to_json(t));
  }
  return body;
}

ChatResponse OpenAiChatBackend::parse_response(const Json& body) {
  try {
    ChatResponse out;
    out.model = body.value("model", "");
    const Json& message = body.at("choices").at(0).at("message");
    if (message.contains("content") && message["content"].is_string()) out.content = message["content"].get<std::string>();
    if (message.contains("tool_calls") && message["tool_calls"].is_array()) {
      for (const auto& c : message["tool_calls"]) {
        ToolCall call;
        call.id = c.value("id", "");
        call.name = c.at("function").at("name").get<std::string>();
        const Json& args = c.at("function").at("arguments");
        if (args.is_string()) {
          call.arguments = Json::parse(args.get<std::string>(), nullptr, false);
          if (call.arguments.is_discarded()) call.arguments = Json{{"_unparsed", args}};
        } else {
          call.arguments = args;
        }
        out.tool_calls.push_back(std::move(call));
      }
    }
    if (body.contains("usage")) {
      out.usage.input_tokens = body["usage"].value("prompt_tokens", std::int64_t{0});
      out.usage.output_tokens = body["usage"].value("completion_tokens", std::int64_t{0});
    }
    return out;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::LlmBackendError, std::string("unexpected completion payload: ") + e.what());
  }
}

ChatResponse OpenAiChatBackend::complete(const ChatRequest& request) {
  ChatResponse r = parse_response(post_json(endpoint_, "/chat/completions", request_body(request)));
  if (r.model.empty()) r.model = endpoint_.model;
  return r;
}

OpenAiEmbedder::OpenAiEmbedder(LiveEndpoint endpoint, size_t batch_size)
    : endpoint_(std::move(endpoint)), batch_size_(std::max<size_t>(1, batch_size)) {}

EmbeddingBatch OpenAiEmbedder::embed(const std::vector<std::string>& texts) {
  EmbeddingBatch out;
  for (size_t first = 0; first < texts.size(); first += batch_size_) {
    size_t last = std::min(texts.size(), first + batch_size_);
    Json input(std::vector<std::string>(texts.begin() + first, texts.begin() + last));
    Json body;
    try {
      body = post_json(endpoint_, "/embeddings", {{"model", endpoint_.model}, {"input", input}});
    } catch (const Error& e) {
      throw Error(ErrorCode::EmbedderError, e.what());
    }
    try {
      std::vector<std::vector<float>> batch(last - first);
      for (const auto& item : body.at("data")) {
        size_t index = item.at("index").get<size_t>();
        if (index >= batch.size()) throw Error(ErrorCode::EmbedderError, "embedding index out of range");
        batch[index] = item.at("embedding").get<std::vector<float>>();
      }
      for (auto& v : batch) out.vectors.push_back(std::move(v));
      if (body.contains("usage")) out.tokens += body["usage"].value("prompt_tokens", std::int64_t{0});
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::EmbedderError, std::string("unexpected embedding payload: ") + e.what());
    }
  }
  return out;
}

}  // namespace vulnres
