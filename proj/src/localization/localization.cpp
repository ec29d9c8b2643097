#include <algorithm>
#include <regex>
#include <set>

#include <fmt/format.h>

#include "vulnres/agents.hpp"
#include "vulnres/error.hpp"
#include "vulnres/localization.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;

namespace vulnres {

std::vector<std::string> fenced_lines(std::string_view text) {
  std::vector<std::string> fenced;
  std::vector<std::string> all;
  bool inside = false;
  bool seen = false;
  for (auto line : text::split_lines(text)) {
    all.emplace_back(line);
    if (text::trim(line).substr(0, 3) == "```") {
      if (inside) return fenced;
      inside = seen = true;
      continue;
    }
    if (inside) fenced.emplace_back(line);
  }
  return seen ? fenced : all;
}

namespace {

// "- `src/a.c`", "1. ./src/a.c" -> "src/a.c"
std::string clean_path(std::string_view line) {
  static const std::regex bullet(R"(^\s*(?:[-*+]|\d+[.)])\s+)");
  std::string s = std::regex_replace(std::string(text::trim(line)), bullet, "");
  s.erase(std::remove(s.begin(), s.end(), '`'), s.end());
  s = std::string(text::trim(s));
  while (s.rfind("./", 0) == 0) s.erase(0, 2);
  while (!s.empty() && s.back() == '/') s.pop_back();
  return s;
}

bool is_repo_file(const fs::path& root, const std::string& rel) {
  if (rel.empty() || fs::path(rel).is_absolute()) return false;
  for (const auto& part : fs::path(rel))
    if (part == "..") return false;
  std::error_code ec;
  return fs::is_regular_file(root / rel, ec);
}

bool under_folder(const std::string& file, const std::string& folder) {
  if (folder.empty() || folder == ".") return true;
  return file.size() > folder.size() && file.compare(0, folder.size(), folder) == 0 && file[folder.size()] == '/';
}

ChatRequest single_prompt(std::string caller, std::string prompt) {
  ChatRequest r;
  r.caller = std::move(caller);
  r.messages.push_back(ChatMessage::system(prompt_section("common", "system")));
  r.messages.push_back(ChatMessage::user(std::move(prompt)));
  return r;
}

}  // namespace

FileLocalization localize_files_prompt(const std::string& report, const std::string& repo_tree,
                                       const fs::path& root, LlmBackend& llm, size_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidConfig, "n must be at least 1");
  auto prompt = fill_template(prompt_section("localization", "files"),
                              {{"n", std::to_string(n)}, {"report", report}, {"tree", repo_tree}});
  ChatResponse response = complete_with_retry(llm, single_prompt("loc.files", prompt), 2);
  FileLocalization out;
  out.raw_response = response.content;
  std::set<std::string> seen;
  for (const auto& line : fenced_lines(response.content)) {
    std::string path = clean_path(line);
    if (path.empty() || !seen.insert(path).second) continue;
    if (!is_repo_file(root, path)) {
      out.dropped.push_back(path);
      continue;
    }
    if (out.files.size() < n) out.files.push_back(path);
  }
  return out;
}

std::vector<Chunk> collect_chunks(const fs::path& root, const std::vector<std::string>& ignored_folders,
                                  const RetrievalOptions& options) {
  std::vector<Chunk> out;
  for (const auto& file : list_source_files(root, options.repo)) {
    bool ignored = std::any_of(ignored_folders.begin(), ignored_folders.end(),
                               [&](const std::string& folder) { return under_folder(file, folder); });
    if (ignored) continue;
    auto chunks = chunk_content(file, text::read_file(root / file), options.chunk_lines);
    std::move(chunks.begin(), chunks.end(), std::back_inserter(out));
  }
  return out;
}

RetrievalLocalization localize_files_retrieval(const std::string& report, const std::string& repo_tree,
                                               const fs::path& root, LlmBackend& llm, Embedder& embedder,
                                               size_t n, const RetrievalOptions& options) {
  if (n == 0) throw Error(ErrorCode::InvalidConfig, "n must be at least 1");
  auto prompt = fill_template(prompt_section("localization", "ignore_folders"),
                              {{"report", report}, {"tree", repo_tree}});
  ChatResponse response = complete_with_retry(llm, single_prompt("loc.ignore", prompt), 2);
  RetrievalLocalization out;
  for (const auto& line : fenced_lines(response.content)) {
    std::string folder = clean_path(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (folder.empty()) folder = ".";
    out.ignored_folders.push_back(folder);
  }

  auto chunks = collect_chunks(root, out.ignored_folders, options);
  out.chunk_count = chunks.size();
  if (chunks.empty()) return out;

  std::vector<std::string> texts{report};
  for (const auto& c : chunks) texts.push_back(c.text);
  EmbeddingBatch batch = embedder.embed(texts);
  if (batch.vectors.size() != texts.size())
    throw Error(ErrorCode::EmbedderError, fmt::format("expected {} vectors, got {}", texts.size(), batch.vectors.size()));
  std::vector<float> query = std::move(batch.vectors.front());
  batch.vectors.erase(batch.vectors.begin());

  out.ranking = rank_files(chunks, score_chunks(query, batch.vectors));
  for (size_t i = 0; i < out.ranking.size() && i < n; ++i) out.files.push_back(out.ranking[i].file);
  return out;
}

std::vector<std::string> merge_file_lists(const std::vector<std::string>& prompt_files,
                                          const std::vector<std::string>& retrieval_files) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto* list : {&prompt_files, &retrieval_files})
    for (const auto& f : *list)
      if (seen.insert(f).second) out.push_back(f);
  return out;
}

std::vector<CodeElement> resolve_element(const fs::path& root, const ElementRef& ref) {
  std::vector<CodeElement> out;
  if (!is_repo_file(root, ref.file)) return out;
  const std::string scoped_suffix = "::" + ref.identifier;
  for (auto& e : parse_elements(root, ref.file)) {
    const std::string qualified = e.qualified_name();
    if (qualified == ref.identifier || e.name == ref.identifier ||
        (qualified.size() > scoped_suffix.size() && qualified.ends_with(scoped_suffix)))
      out.push_back(std::move(e));
  }
  return out;
}

namespace {

std::vector<ElementRef> parse_element_json(std::string_view response) {
  std::string body;
  for (const auto& l : fenced_lines(response)) body += l + "\n";
  auto open = body.find('[');
  auto close = body.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close < open)
    throw Error(ErrorCode::JsonParseFailure, "no JSON array in the answer");
  Json parsed = Json::parse(body.substr(open, close - open + 1), nullptr, false);
  if (parsed.is_discarded() || !parsed.is_array()) throw Error(ErrorCode::JsonParseFailure, "answer is not a JSON array");
  std::vector<ElementRef> refs;
  for (const auto& item : parsed) {
    if (!item.is_object() || !item.contains("file") || !item.contains("id") || !item["file"].is_string() ||
        !item["id"].is_string())
      throw Error(ErrorCode::JsonParseFailure, "every entry needs string fields \"file\" and \"id\"");
    refs.push_back({clean_path(item["file"].get<std::string>()), std::string(text::trim(item["id"].get<std::string>()))});
  }
  return refs;
}

}  // namespace

ElementLocalization localize_elements(const std::vector<std::string>& files, const std::string& report,
                                      const fs::path& root, LlmBackend& llm) {
  if (files.empty()) throw Error(ErrorCode::InvalidConfig, "element localization needs at least one file");
  std::string skeletons;
  for (const auto& f : files) skeletons += fmt::format("### {}\n```\n{}\n```\n\n", f, skeletonize(root, f).text);
  auto prompt = fill_template(prompt_section("localization", "elements"),
                              {{"report", report}, {"skeletons", skeletons}});
  ChatRequest request = single_prompt("loc.elements", prompt);
  ChatResponse response = complete_with_retry(llm, request, 2);

  ElementLocalization out;
  out.raw_response = response.content;
  std::vector<ElementRef> refs;
  try {
    refs = parse_element_json(response.content);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::JsonParseFailure) throw;
    out.reasked = true;
    request.messages.push_back({"assistant", response.content, {}, ""});
    request.messages.push_back(ChatMessage::user(
        fill_template(prompt_section("localization", "elements_reask"), {{"error", e.what()}})));
    response = complete_with_retry(llm, request, 2);
    out.raw_response = response.content;
    try {
      refs = parse_element_json(response.content);
    } catch (const Error& again) {
      if (again.code() != ErrorCode::JsonParseFailure) throw;
      out.flagged = true;
      return out;
    }
  }
  for (const auto& ref : refs) {
    if (std::find(out.refs.begin(), out.refs.end(), ref) != out.refs.end()) continue;
    if (resolve_element(root, ref).empty()) out.dropped.push_back(ref);
    else out.refs.push_back(ref);
  }
  out.flagged = out.refs.empty();
  return out;
}

}  // namespace vulnres
