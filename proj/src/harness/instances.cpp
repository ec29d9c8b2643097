#include <set>

#include <fmt/format.h>

#include "vulnres/error.hpp"
#include "vulnres/harness.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;

namespace vulnres {

namespace {

[[noreturn]] void violation(size_t line, std::string_view field, std::string_view what) {
  throw Error(ErrorCode::SchemaViolation, fmt::format("line {}: field '{}' {}", line, field, what));
}

std::optional<std::string> string_field(const Json& j, const char* key, size_t line) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) violation(line, key, "must be a string");
  return it->get<std::string>();
}

// Inline text or the contents of a *_file sibling field.
std::optional<std::string> text_field(const Json& j, const std::string& key, const fs::path& dir, size_t line) {
  auto inline_text = string_field(j, key.c_str(), line);
  auto file = string_field(j, (key + "_file").c_str(), line);
  if (inline_text && file) violation(line, key, "given both inline and as a file");
  if (file) {
    std::error_code ec;
    if (!fs::is_regular_file(dir / *file, ec)) violation(line, key + "_file", "names a missing file: " + *file);
    return text::read_file(dir / *file);
  }
  return inline_text;
}

}  // namespace

std::vector<IssueInstance> load_instances(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(ErrorCode::FileNotFound, path.string());
  const fs::path dir = path.parent_path();
  static const std::set<std::string> known{"instance_id",       "workspace",     "image",
                                           "container_workdir", "issue_report",  "issue_report_file",
                                           "sanitizer_log",     "sanitizer_log_file", "build_command",
                                           "repro_command",     "language"};
  std::vector<IssueInstance> out;
  std::set<std::string> ids;
  size_t line_no = 0;
  const std::string content = text::read_file(path);
  for (auto line : text::split_lines(content)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) violation(line_no, "(line)", "is not a JSON object");
    for (const auto& [key, _] : j.items())
      if (!known.count(key)) violation(line_no, key, "is not a known field");

    IssueInstance inst;
    auto id = string_field(j, "instance_id", line_no);
    if (!id || id->empty()) violation(line_no, "instance_id", "is required");
    inst.instance_id = *id;
    if (!ids.insert(inst.instance_id).second) violation(line_no, "instance_id", "duplicates '" + *id + "'");

    auto workspace = string_field(j, "workspace", line_no);
    inst.image = string_field(j, "image", line_no);
    if (workspace.has_value() == inst.image.has_value())
      violation(line_no, "workspace", "exactly one of 'workspace' and 'image' is required");
    if (workspace) {
      fs::path ws = fs::path(*workspace).is_absolute() ? fs::path(*workspace) : dir / *workspace;
      if (!fs::is_directory(ws, ec)) violation(line_no, "workspace", "is not a directory: " + *workspace);
      inst.workspace = fs::weakly_canonical(ws);
    }
    if (auto wd = string_field(j, "container_workdir", line_no)) inst.container_workdir = *wd;

    auto issue = text_field(j, "issue_report", dir, line_no);
    if (!issue) violation(line_no, "issue_report", "is required");
    inst.issue_report = *issue;
    inst.sanitizer_log = text_field(j, "sanitizer_log", dir, line_no);
    inst.build_command = string_field(j, "build_command", line_no);
    auto repro = string_field(j, "repro_command", line_no);
    if (!repro || repro->empty()) violation(line_no, "repro_command", "is required");
    inst.repro_command = *repro;
    if (auto lang = string_field(j, "language", line_no)) inst.language = *lang;
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace vulnres
