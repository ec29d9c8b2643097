// Minimal stdio language server answering from the fallback index.
// --crash exits before answering; --noisy interleaves server traffic.
#include <iostream>
#include <string>

#include <json.hpp>

#include "vulnres/symbol_analysis.hpp"
#include "vulnres/util/text.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

bool read_message(json& out) {
  std::string line;
  size_t length = 0;
  while (std::getline(std::cin, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) break;
    if (line.rfind("Content-Length:", 0) == 0) length = std::stoul(line.substr(15));
  }
  if (!std::cin || length == 0) return false;
  std::string body(length, '\0');
  std::cin.read(body.data(), static_cast<std::streamsize>(length));
  if (!std::cin) return false;
  out = json::parse(body);
  return true;
}

void write_message(const json& msg) {
  std::string body = msg.dump();
  std::cout << "Content-Length: " << body.size() << "\r\n\r\n" << body << std::flush;
}

json to_lsp(const fs::path& root, const std::vector<vulnres::SymbolLocation>& locs) {
  json out = json::array();
  for (const auto& l : locs) {
    auto lines = vulnres::text::split_lines(l.preview);
    int last_len = lines.empty() ? 0 : static_cast<int>(lines.back().size());
    out.push_back({{"uri", "file://" + (root / l.file).string()},
                   {"range",
                    {{"start", {{"line", l.lines.start - 1}, {"character", 0}}},
                     {"end", {{"line", l.lines.end - 1}, {"character", last_len}}}}}});
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  bool crash = false;
  bool noisy = false;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--crash") crash = true;
    if (a == "--noisy") noisy = true;
  }
  if (crash) return 3;
  fs::path root;
  vulnres::FallbackIndex index;
  json msg;
  int server_id = 1000;
  while (read_message(msg)) {
    std::string method = msg.value("method", "");
    if (!msg.contains("id")) {
      if (method == "exit") return 0;
      continue;
    }
    if (!msg.contains("method")) continue;  // reply to one of our requests
    if (noisy) {
      write_message({{"jsonrpc", "2.0"}, {"method", "window/logMessage"}, {"params", {{"type", 3}, {"message", "hi"}}}});
      write_message({{"jsonrpc", "2.0"}, {"id", server_id++}, {"method", "workspace/configuration"}, {"params", {}}});
    }
    json result = nullptr;
    if (method == "initialize") {
      std::string uri = msg["params"]["rootUri"];
      root = uri.substr(7);
      index.init(root);
      result = {{"capabilities", {{"definitionProvider", true}, {"referencesProvider", true}}}};
    } else if (method == "textDocument/definition" || method == "textDocument/references") {
      std::string uri = msg["params"]["textDocument"]["uri"];
      std::string file = fs::path(uri.substr(7)).lexically_relative(root).generic_string();
      int line = msg["params"]["position"]["line"].get<int>() + 1;
      int col = msg["params"]["position"]["character"].get<int>() + 1;
      auto locs = method == "textDocument/definition" ? index.definition(file, line, col)
                                                       : index.references(file, line, col);
      result = locs.empty() ? json(nullptr) : to_lsp(root, locs);
    }
    write_message({{"jsonrpc", "2.0"}, {"id", msg["id"]}, {"result", result}});
  }
  return 0;
}
