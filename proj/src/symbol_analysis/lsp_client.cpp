#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "vulnres/error.hpp"
#include "vulnres/symbol_analysis.hpp"
#include "vulnres/util/process.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace vulnres {
namespace {

constexpr auto kReplyTimeout = std::chrono::seconds(30);

std::string percent_encode(std::string_view path) {
  std::string out;
  for (unsigned char c : path) {
    if (std::isalnum(c) || std::string_view("/-_.~").find(static_cast<char>(c)) != std::string_view::npos) {
      out.push_back(static_cast<char>(c));
    } else {
      out += fmt::format("%{:02X}", c);
    }
  }
  return out;
}

std::string percent_decode(std::string_view s) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::string language_of(const std::string& file) {
  return file.ends_with(".c") || file.ends_with(".h") ? "c" : "cpp";
}

}  // namespace

struct LspBackend::Session {
  Session(const std::vector<std::string>& command, fs::path r) : proc(command, r), root(std::move(r)) {}

  ChildProcess proc;
  fs::path root;
  int next_id = 1;
  std::set<std::string> opened;

  std::string uri_of(const std::string& file) const { return "file://" + percent_encode((root / file).string()); }

  std::optional<std::string> file_of(const std::string& uri) const {
    if (uri.rfind("file://", 0) != 0) return std::nullopt;
    fs::path p = fs::path(percent_decode(uri.substr(7))).lexically_normal();
    fs::path rel = p.lexically_relative(root);
    if (rel.empty() || *rel.begin() == "..") return std::nullopt;
    return rel.generic_string();
  }

  void send(const json& msg) {
    std::string body = msg.dump();
    proc.write(fmt::format("Content-Length: {}\r\n\r\n{}", body.size(), body));
  }

  json receive() {
    size_t length = 0;
    bool have_length = false;
    for (;;) {
      auto line = proc.read_line(kReplyTimeout);
      if (!line) throw Error(ErrorCode::BackendUnavailable, "language server closed the stream or timed out");
      std::string_view l = text::trim(*line);
      if (l.empty()) break;
      constexpr std::string_view kHeader = "Content-Length:";
      if (l.substr(0, kHeader.size()) == kHeader) {
        length = std::stoul(std::string(text::trim(l.substr(kHeader.size()))));
        have_length = true;
      }
    }
    if (!have_length) throw Error(ErrorCode::BackendUnavailable, "language server message without Content-Length");
    auto body = proc.read_exact(length, kReplyTimeout);
    if (!body) throw Error(ErrorCode::BackendUnavailable, "truncated language server message");
    try {
      return json::parse(*body);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::BackendUnavailable, fmt::format("bad language server message: {}", e.what()));
    }
  }

  json request(const std::string& method, json params) {
    const int id = next_id++;
    send({{"jsonrpc", "2.0"}, {"id", id}, {"method", method}, {"params", std::move(params)}});
    for (;;) {
      json msg = receive();
      if (msg.contains("method")) {
        // Server-to-client requests get an empty answer; notifications are dropped.
        if (msg.contains("id")) send({{"jsonrpc", "2.0"}, {"id", msg["id"]}, {"result", nullptr}});
        continue;
      }
      if (!msg.contains("id") || msg["id"] != id) continue;
      if (msg.contains("error")) {
        throw Error(ErrorCode::BackendUnavailable,
                    fmt::format("{} failed: {}", method, msg["error"].value("message", "unknown error")));
      }
      return msg.value("result", json());
    }
  }

  void notify(const std::string& method, json params) {
    send({{"jsonrpc", "2.0"}, {"method", method}, {"params", std::move(params)}});
  }

  void open(const std::string& file) {
    if (opened.count(file)) return;
    std::error_code ec;
    if (!fs::is_regular_file(root / file, ec)) throw Error(ErrorCode::FileNotFound, file);
    notify("textDocument/didOpen", {{"textDocument",
                                     {{"uri", uri_of(file)},
                                      {"languageId", language_of(file)},
                                      {"version", 1},
                                      {"text", text::read_file(root / file)}}}});
    opened.insert(file);
  }

  std::vector<SymbolLocation> locations(const json& result) {
    std::vector<json> items;
    if (result.is_array()) {
      items.assign(result.begin(), result.end());
    } else if (result.is_object()) {
      items.push_back(result);
    }
    std::vector<SymbolLocation> out;
    for (const auto& item : items) {
      std::string uri = item.value("targetUri", item.value("uri", std::string()));
      const json& range = item.contains("targetRange") ? item["targetRange"] : item["range"];
      auto file = file_of(uri);
      if (!file) continue;
      int start = range["start"]["line"].get<int>() + 1;
      int end = range["end"]["line"].get<int>() + 1;
      if (range["end"]["character"].get<int>() == 0 && end > start) --end;
      std::string content = text::read_file(root / *file);
      out.push_back({*file, {start, end}, std::string(text::slice_lines(content, start, end))});
    }
    std::sort(out.begin(), out.end(), [](const SymbolLocation& a, const SymbolLocation& b) {
      return std::tie(a.file, a.lines.start, a.lines.end) < std::tie(b.file, b.lines.start, b.lines.end);
    });
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
};

LspBackend::LspBackend(std::vector<std::string> command) : command_(std::move(command)) {}

LspBackend::~LspBackend() {
  try {
    shutdown();
  } catch (...) {
  }
}

std::string LspBackend::name() const { return "lsp:" + (command_.empty() ? std::string() : command_[0]); }

void LspBackend::init(const fs::path& root) {
  if (command_.empty()) throw Error(ErrorCode::BackendUnavailable, "no language server command configured");
  fs::path abs = fs::absolute(root).lexically_normal();
  try {
    session_ = std::make_unique<Session>(command_, abs);
  } catch (const Error& e) {
    throw Error(ErrorCode::BackendUnavailable, e.what());
  }
  try {
    session_->request("initialize", {{"processId", nullptr},
                                     {"rootUri", "file://" + percent_encode(abs.string())},
                                     {"capabilities", json::object()}});
    session_->notify("initialized", json::object());
  } catch (...) {
    session_.reset();
    throw;
  }
}

std::vector<SymbolLocation> LspBackend::definition(const std::string& file, int line, int column) {
  if (!session_) throw Error(ErrorCode::BackendUnavailable, "language server not initialized");
  session_->open(file);
  json params = {{"textDocument", {{"uri", session_->uri_of(file)}}},
                 {"position", {{"line", line - 1}, {"character", column - 1}}}};
  return session_->locations(session_->request("textDocument/definition", params));
}

std::vector<SymbolLocation> LspBackend::references(const std::string& file, int line, int column) {
  if (!session_) throw Error(ErrorCode::BackendUnavailable, "language server not initialized");
  session_->open(file);
  json params = {{"textDocument", {{"uri", session_->uri_of(file)}}},
                 {"position", {{"line", line - 1}, {"character", column - 1}}},
                 {"context", {{"includeDeclaration", true}}}};
  return session_->locations(session_->request("textDocument/references", params));
}

void LspBackend::shutdown() {
  if (!session_) return;
  auto session = std::move(session_);
  try {
    session->request("shutdown", nullptr);
    session->notify("exit", nullptr);
  } catch (const Error&) {
  }
  session->proc.close_stdin();
  session->proc.wait();
}

}  // namespace vulnres
