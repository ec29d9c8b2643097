#include <fmt/format.h>

#include "vulnres/backends.hpp"
#include "vulnres/error.hpp"
#include "vulnres/util/hash.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;

namespace vulnres {

namespace {

Json read_json(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(ErrorCode::FileNotFound, path.string());
  Json j = Json::parse(text::read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::JsonParseFailure, "replay script is not JSON: " + path.string());
  return j;
}

std::string content_text(const Json& content) {
  if (content.is_string()) return content.get<std::string>();
  if (content.is_array()) {
    std::string out;
    for (size_t i = 0; i < content.size(); ++i) {
      if (!content[i].is_string()) throw Error(ErrorCode::JsonParseFailure, "content lines must be strings");
      out += (i ? "\n" : "") + content[i].get<std::string>();
    }
    return out;
  }
  if (content.is_null()) return {};
  throw Error(ErrorCode::JsonParseFailure, "content must be a string or an array of lines");
}

ChatResponse parse_scripted_response(const Json& r, const fs::path& dir, const std::string& origin) {
  if (!r.is_object()) throw Error(ErrorCode::JsonParseFailure, origin + ": response must be an object");
  ChatResponse out;
  out.model = "replay";
  if (r.contains("content")) out.content = content_text(r["content"]);
  if (r.contains("content_file")) out.content = text::read_file(dir / r["content_file"].get<std::string>());
  if (r.contains("tool_calls")) {
    for (const auto& c : r["tool_calls"]) {
      ToolCall call;
      call.name = c.at("name").get<std::string>();
      call.id = c.value("id", "");
      call.arguments = c.value("arguments", Json::object());
      out.tool_calls.push_back(std::move(call));
    }
  }
  if (r.contains("usage")) {
    out.usage.input_tokens = r["usage"].value("input_tokens", std::int64_t{0});
    out.usage.output_tokens = r["usage"].value("output_tokens", std::int64_t{0});
  }
  return out;
}

void load_into(const fs::path& path, std::vector<ReplayEntry>& out, int depth) {
  if (depth > 16) throw Error(ErrorCode::InvalidConfig, "replay includes nest too deeply at " + path.string());
  Json j = read_json(path);
  const Json& entries = j.is_array() ? j : j.at("entries");
  const fs::path dir = path.parent_path();
  for (size_t i = 0; i < entries.size(); ++i) {
    const Json& e = entries[i];
    std::string origin = fmt::format("{}#{}", path.filename().string(), i);
    if (e.contains("include")) {
      load_into(dir / e["include"].get<std::string>(), out, depth + 1);
      continue;
    }
    if (!e.contains("caller") || !e.contains("response"))
      throw Error(ErrorCode::JsonParseFailure, origin + ": entries need \"caller\" and \"response\"");
    out.push_back({e["caller"].get<std::string>(), parse_scripted_response(e["response"], dir, origin), origin});
  }
}

}  // namespace

std::vector<ReplayEntry> load_replay_script(const fs::path& path) {
  std::vector<ReplayEntry> out;
  try {
    load_into(path, out, 0);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::JsonParseFailure, fmt::format("{}: {}", path.string(), e.what()));
  }
  return out;
}

std::string digest_messages(const std::vector<ChatMessage>& messages) {
  Json j = Json::array();
  for (const auto& m : messages) j.push_back(to_json(m));
  return sha256_hex(j.dump());
}

ReplayBackend::ReplayBackend(std::vector<ReplayEntry> entries) : entries_(std::move(entries)) {}

std::unique_ptr<ReplayBackend> ReplayBackend::from_file(const fs::path& path) {
  return std::make_unique<ReplayBackend>(load_replay_script(path));
}

ChatResponse ReplayBackend::complete(const ChatRequest& request) {
  std::lock_guard lock(mutex_);
  requests_.push_back({request.caller, request.temperature, digest_messages(request.messages), request.tools.size()});
  const size_t step = next_ + 1;
  if (next_ >= entries_.size())
    throw Error(ErrorCode::ScriptExhausted,
                fmt::format("step {}: stage '{}' requested a response after all {} entries were used", step,
                            request.caller, entries_.size()));
  const ReplayEntry& entry = entries_[next_];
  if (entry.caller != request.caller)
    throw Error(ErrorCode::ReplayDesync, fmt::format("step {} ({}): script expects caller '{}' but stage '{}' asked",
                                                     step, entry.origin, entry.caller, request.caller));
  ++next_;
  return entry.response;
}

std::vector<RecordedRequest> ReplayBackend::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

size_t ReplayBackend::remaining() const {
  std::lock_guard lock(mutex_);
  return entries_.size() - next_;
}

ChatResponse MeteredBackend::complete(const ChatRequest& request) {
  ChatResponse r = inner_.complete(request);
  record_.add({request.caller, r.model, CallKind::Chat, r.usage.input_tokens, r.usage.output_tokens,
               prices_.cost(r.model, r.usage.input_tokens, r.usage.output_tokens)});
  return r;
}

EmbeddingBatch MeteredEmbedder::embed(const std::vector<std::string>& texts) {
  EmbeddingBatch b = inner_.embed(texts);
  record_.add({"loc.retrieval", inner_.model(), CallKind::Embedding, b.tokens, 0,
               prices_.cost(inner_.model(), b.tokens, 0)});
  return b;
}

}  // namespace vulnres
