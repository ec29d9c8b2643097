#include <fmt/format.h>

#include "vulnres/error.hpp"
#include "vulnres/harness.hpp"

namespace vulnres {

namespace {

std::string_view stage_name(EnhanceStage s) { return s == EnhanceStage::Localization ? "localization" : "generation"; }
std::string_view input_name(InputType t) { return t == InputType::IssueReport ? "issue_report" : "sanitizer_log"; }

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

template <typename T>
T get(const Json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    invalid(fmt::format("config field '{}' has the wrong type", key));
  }
}

}  // namespace

std::vector<double> RunConfig::temperatures() const {
  std::vector<double> t(t_patches, 1.0);
  if (!t.empty()) t[0] = 0.0;
  return t;
}

void RunConfig::validate() const {
  if (n_files == 0) invalid("n_files must be at least 1");
  if (t_patches == 0) invalid("t_patches must be at least 1");
  if (chunk_lines == 0) invalid("chunk_lines must be at least 1");
  if (margin < 0) invalid("margin must not be negative");
  if (cpc_max_steps < 1 || spa_max_steps < 1) invalid("max steps must be at least 1");
  if (workers == 0) invalid("workers must be at least 1");
  if (version_store != "git" && version_store != "memory") invalid("version_store must be git or memory");
  if (!enable_cpc && !enable_spa && enhance_stages != RunConfig{}.enhance_stages)
    invalid("enhance_stages has no effect with both agents disabled");
  if ((enable_cpc || enable_spa) && enhance_stages.empty())
    invalid("agents are enabled but no stage uses their reports");
}

Json RunConfig::to_json() const {
  Json stages = Json::array();
  for (auto s : enhance_stages) stages.push_back(stage_name(s));
  return Json{{"n_files", n_files},
              {"margin", margin},
              {"t_patches", t_patches},
              {"chunk_lines", chunk_lines},
              {"temperatures", temperatures()},
              {"enable_cpc", enable_cpc},
              {"enable_spa", enable_spa},
              {"enhance_stages", stages},
              {"selection_strategy", to_string(selection)},
              {"input_type", input_name(input_type)},
              {"cpc_max_steps", cpc_max_steps},
              {"spa_max_steps", spa_max_steps},
              {"log_head_lines", log_head_lines},
              {"log_tail_lines", log_tail_lines},
              {"script_output_cap", script_output_cap},
              {"poc_timeout_seconds", poc_timeout.count()},
              {"version_store", version_store},
              {"lsp_command", lsp_command},
              {"embedding_dimension", embedding_dimension},
              {"workers", workers},
              {"prices", prices.to_json()}};
}

RunConfig RunConfig::from_json(const Json& j) {
  if (!j.is_object()) invalid("config must be a JSON object");
  const Json known = RunConfig{}.to_json();
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) invalid(fmt::format("unknown config field '{}'", key));

  RunConfig c;
  c.n_files = get(j, "n_files", c.n_files);
  c.margin = get(j, "margin", c.margin);
  c.t_patches = get(j, "t_patches", c.t_patches);
  c.chunk_lines = get(j, "chunk_lines", c.chunk_lines);
  c.enable_cpc = get(j, "enable_cpc", c.enable_cpc);
  c.enable_spa = get(j, "enable_spa", c.enable_spa);
  if (j.contains("enhance_stages")) {
    c.enhance_stages.clear();
    for (const auto& s : get(j, "enhance_stages", std::vector<std::string>{})) {
      if (s == "localization") c.enhance_stages.insert(EnhanceStage::Localization);
      else if (s == "generation") c.enhance_stages.insert(EnhanceStage::Generation);
      else invalid(fmt::format("unknown enhance stage '{}'", s));
    }
  }
  if (j.contains("selection_strategy")) {
    auto s = parse_selection_strategy(get(j, "selection_strategy", std::string()));
    if (!s) invalid("selection_strategy must be poc_voting or simple_voting");
    c.selection = *s;
  }
  if (j.contains("input_type")) {
    auto s = get(j, "input_type", std::string());
    if (s == "issue_report") c.input_type = InputType::IssueReport;
    else if (s == "sanitizer_log") c.input_type = InputType::SanitizerLog;
    else invalid("input_type must be issue_report or sanitizer_log");
  }
  c.cpc_max_steps = get(j, "cpc_max_steps", c.cpc_max_steps);
  c.spa_max_steps = get(j, "spa_max_steps", c.spa_max_steps);
  c.log_head_lines = get(j, "log_head_lines", c.log_head_lines);
  c.log_tail_lines = get(j, "log_tail_lines", c.log_tail_lines);
  c.script_output_cap = get(j, "script_output_cap", c.script_output_cap);
  c.poc_timeout = std::chrono::seconds(get(j, "poc_timeout_seconds", static_cast<long>(c.poc_timeout.count())));
  c.version_store = get(j, "version_store", c.version_store);
  c.lsp_command = get(j, "lsp_command", c.lsp_command);
  c.embedding_dimension = get(j, "embedding_dimension", c.embedding_dimension);
  c.workers = get(j, "workers", c.workers);
  if (j.contains("prices")) c.prices = PriceTable::from_json(j["prices"]);
  // The schedule is derived from t_patches; a stated one must agree.
  if (j.contains("temperatures") && get(j, "temperatures", std::vector<double>{}) != c.temperatures())
    invalid("temperatures must be 0 for the first candidate and 1 for the rest");
  c.validate();
  return c;
}

std::vector<std::string> variant_names() {
  return {"base", "cpc", "spa", "full", "enhance_vuln_loc", "enhance_patch_gen", "simple_voting", "sanitizer_input"};
}

RunConfig variant_config(std::string_view name) {
  RunConfig c;
  if (name == "full") return c;
  if (name == "base") {
    c.enable_cpc = c.enable_spa = false;
  } else if (name == "cpc") {
    c.enable_spa = false;
  } else if (name == "spa") {
    c.enable_cpc = false;
  } else if (name == "enhance_vuln_loc") {
    c.enhance_stages = {EnhanceStage::Localization};
  } else if (name == "enhance_patch_gen") {
    c.enhance_stages = {EnhanceStage::Generation};
  } else if (name == "simple_voting") {
    c.selection = SelectionStrategy::SimpleVoting;
  } else if (name == "sanitizer_input") {
    c.input_type = InputType::SanitizerLog;
  } else {
    invalid(fmt::format("unknown variant '{}'", name));
  }
  return c;
}

}  // namespace vulnres
