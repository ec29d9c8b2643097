#include <fmt/format.h>

#include "vulnres/agents.hpp"
#include "vulnres/error.hpp"

namespace vulnres {

namespace {

std::string require_string(const Json& args, const char* key) {
  auto it = args.find(key);
  if (it == args.end() || !it->is_string())
    throw Error(ErrorCode::InvalidConfig, fmt::format("argument '{}' must be a string", key));
  return it->get<std::string>();
}

std::string optional_string(const Json& args, const char* key) {
  auto it = args.find(key);
  if (it == args.end() || it->is_null()) return {};
  if (!it->is_string()) throw Error(ErrorCode::InvalidConfig, fmt::format("argument '{}' must be a string", key));
  return it->get<std::string>();
}

int require_int(const Json& args, const char* key) {
  auto it = args.find(key);
  if (it == args.end() || !it->is_number_integer())
    throw Error(ErrorCode::InvalidConfig, fmt::format("argument '{}' must be an integer", key));
  return it->get<int>();
}

std::vector<int> int_list(const Json& args, const char* key) {
  auto it = args.find(key);
  if (it == args.end() || it->is_null()) return {};
  if (!it->is_array()) throw Error(ErrorCode::InvalidConfig, fmt::format("argument '{}' must be an array", key));
  std::vector<int> out;
  for (const auto& v : *it) {
    if (!v.is_number_integer())
      throw Error(ErrorCode::InvalidConfig, fmt::format("argument '{}' must hold integers", key));
    out.push_back(v.get<int>());
  }
  return out;
}

Json object_schema(Json properties, std::vector<std::string> required) {
  return Json{{"type", "object"}, {"properties", std::move(properties)}, {"required", std::move(required)}};
}

const Json kMarkLines{{"type", "array"},
                      {"items", {{"type", "integer"}}},
                      {"description", "Line numbers to annotate with a location marker."}};

std::string render_apply(const ApplyResult& r) {
  return fmt::format("applied edit set '{}' (commit {})\n{}", r.fixed_name, r.commit_id.substr(0, 12),
                     r.history_view);
}

std::string render_rollback(const RollbackResult& r) {
  return fmt::format("rolled back {} edit set(s), last: '{}'\n{}", r.reverted_count, r.reverted.name,
                     r.history_view);
}

}  // namespace

std::set<std::string> static_tool_names() {
  using namespace tool_names;
  return {std::string(kSearchCodeElement), std::string(kReadCode), std::string(kResolveCodeSymbol)};
}

std::set<std::string> all_tool_names() {
  using namespace tool_names;
  auto names = static_tool_names();
  for (auto n : {kRunPoc, kApplyEdits, kRollbackLatest, kRollbackAll, kRunPythonCode}) names.emplace(n);
  return names;
}

void Toolbox::add(ToolSchema schema, Handler handler) {
  auto name = schema.name;
  tools_[name] = Entry{std::move(schema), std::move(handler)};
}

std::set<std::string> Toolbox::names() const {
  std::set<std::string> out;
  for (const auto& [name, _] : tools_) out.insert(name);
  return out;
}

std::vector<ToolSchema> Toolbox::schemas() const {
  std::vector<ToolSchema> out;
  for (const auto& [_, entry] : tools_) out.push_back(entry.schema);
  return out;
}

std::string Toolbox::invoke(const std::string& name, const Json& arguments) const {
  auto it = tools_.find(name);
  if (it == tools_.end()) throw Error(ErrorCode::UnknownName, "no tool named " + name);
  try {
    return it->second.handler(arguments.is_object() ? arguments : Json::object());
  } catch (const Error& e) {
    return fmt::format("error: {}", e.what());
  } catch (const Json::exception& e) {
    return fmt::format("error: invalid arguments: {}", e.what());
  }
}

Toolbox Toolbox::restricted_to(const std::set<std::string>& names) const {
  Toolbox out;
  for (const auto& name : names) {
    auto it = tools_.find(name);
    if (it == tools_.end()) throw Error(ErrorCode::InvalidConfig, "toolbox lacks tool " + name);
    out.tools_.emplace(name, it->second);
  }
  return out;
}

Toolbox make_toolbox(const Toolkits& kits) {
  using namespace tool_names;
  Toolbox box;
  if (kits.search) {
    const CodeSearch* search = kits.search;
    box.add({std::string(kSearchCodeElement),
             "Find code elements (function, struct, class, union, enum, macro, global variable) by name. "
             "Leave file empty to search the whole repository.",
             object_schema({{"name", {{"type", "string"}}},
                            {"file", {{"type", "string"}}},
                            {"mark_lines", kMarkLines}},
                           {"name"})},
            [search](const Json& a) {
              return CodeSearch::render(search->search_code_element(
                  require_string(a, "name"), optional_string(a, "file"), int_list(a, "mark_lines")));
            });
    box.add({std::string(kReadCode), "Read num lines of a file on either side of a center line.",
             object_schema({{"file", {{"type", "string"}}},
                            {"center", {{"type", "integer"}}},
                            {"num", {{"type", "integer"}}},
                            {"mark_lines", kMarkLines}},
                           {"file", "center", "num"})},
            [search](const Json& a) {
              return CodeSearch::render(search->read_code(require_string(a, "file"), require_int(a, "center"),
                                                          require_int(a, "num"), int_list(a, "mark_lines")));
            });
  }
  if (kits.symbols && kits.search) {
    SymbolBackend* symbols = kits.symbols;
    auto root = kits.search->root();
    box.add({std::string(kResolveCodeSymbol),
             "Resolve symbols. Pass SEARCH/REPLACE blocks whose REPLACE wraps one identifier in "
             "FIND_DEFINITION(...) or FIND_REFERENCES(...). Nothing is written to the repository.",
             object_schema({{"edits", {{"type", "string"}}}}, {"edits"})},
            [symbols, root](const Json& a) {
              return resolve_code_symbol(root, *symbols, require_string(a, "edits"));
            });
  }
  if (kits.poc) {
    PocToolkit* poc = kits.poc;
    box.add({std::string(kRunPoc),
             "Build and run the PoC. The full log is kept under the returned fixed name for "
             "get_poc_output inside run_python_code.",
             object_schema({{"unique_name", {{"type", "string"}}}}, {"unique_name"})},
            [poc](const Json& a) { return PocToolkit::render(poc->run_poc(require_string(a, "unique_name"))); });
  }
  if (kits.history) {
    EditHistory* history = kits.history;
    box.add({std::string(kApplyEdits),
             "Apply SEARCH/REPLACE blocks (each preceded by a '### <path>' line) as one named edit set.",
             object_schema({{"unique_name", {{"type", "string"}}}, {"edits", {{"type", "string"}}}},
                           {"unique_name", "edits"})},
            [history](const Json& a) {
              auto edits = parse_edit_blocks(require_string(a, "edits"));
              return render_apply(history->apply_edits(require_string(a, "unique_name"), edits));
            });
    box.add({std::string(kRollbackLatest), "Undo the most recently applied edit set.", object_schema(Json::object(), {})},
            [history](const Json&) { return render_rollback(history->rollback_latest()); });
    box.add({std::string(kRollbackAll), "Undo every applied edit set.", object_schema(Json::object(), {})},
            [history](const Json&) { return render_rollback(history->rollback_all()); });
  }
  if (kits.scripts) {
    const ScriptSandbox* scripts = kits.scripts;
    box.add({std::string(kRunPythonCode),
             "Run Python code and return what it prints. get_poc_output(name) returns a full PoC log. "
             "File, process and network access are blocked.",
             object_schema({{"code", {{"type", "string"}}}}, {"code"})},
            [scripts](const Json& a) { return ScriptSandbox::render(scripts->run_script(require_string(a, "code"))); });
  }
  return box;
}

}  // namespace vulnres
