#include <atomic>
#include <regex>
#include <thread>

#include <fmt/format.h>

#include "vulnres/backends.hpp"
#include "vulnres/code_search.hpp"
#include "vulnres/error.hpp"
#include "vulnres/harness.hpp"
#include "vulnres/symbol_analysis.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;

namespace vulnres {

namespace {

// Run artifacts must not depend on scratch paths, PIDs or ASLR.
class Scrubber {
 public:
  void add_path(const fs::path& p) {
    if (!p.empty()) paths_.push_back(p.string());
  }
  std::string operator()(std::string s) const {
    static const std::regex pid(R"(==\d+==)");
    static const std::regex addr(R"(0x[0-9a-fA-F]{4,})");
    for (const auto& p : paths_) s = text::replace_all(std::move(s), p, "<workspace>");
    s = std::regex_replace(s, pid, "==<pid>==");
    return std::regex_replace(s, addr, "0x<addr>");
  }

 private:
  std::vector<std::string> paths_;
};

class Artifacts {
 public:
  explicit Artifacts(fs::path dir) : dir_(std::move(dir)) {}
  void text(const std::string& rel, std::string_view content) const {
    fs::create_directories((dir_ / rel).parent_path());
    text::write_file(dir_ / rel, content);
  }
  void json(const std::string& rel, const Json& j) const { text(rel, j.dump(2) + "\n"); }

 private:
  fs::path dir_;
};

Json transcript_json(const Transcript& t, const Scrubber& scrub) {
  Json steps = Json::array();
  for (const auto& s : t.steps) {
    Json step{{"thought", scrub(s.thought)}};
    if (s.tool_call) {
      step["tool"] = s.tool_call->name;
      step["arguments"] = s.tool_call->arguments;
      step["observation"] = scrub(s.observation);
      if (s.refused) step["refused"] = true;
    }
    steps.push_back(std::move(step));
  }
  return Json{{"agent", t.agent}, {"steps", steps}};
}

template <typename Report>
Json agent_telemetry(const AgentOutcome<Report>& out) {
  const Transcript& t = out.run.transcript;
  return Json{{"tool_counts", t.tool_counts},
              {"tool_call_steps", t.tool_call_steps()},
              {"model_turns", t.model_turns},
              {"refusals", t.refusals},
              {"forced_finalize", out.run.forced_finalize},
              {"max_steps_exceeded", out.run.max_steps_exceeded},
              {"reasked", out.reasked},
              {"report_parsed", out.report.has_value()}};
}

Json candidate_json(const PatchCandidate& c, const Scrubber& scrub) {
  Json edits = Json::array();
  for (const auto& e : c.edits) edits.push_back({{"file", e.file}, {"search", e.search}, {"replace", e.replace}});
  Json j{{"index", c.index},
         {"temperature", c.temperature},
         {"edits", edits},
         {"parse_failed", c.parse_failed},
         {"error", scrub(c.error)},
         {"applied", c.applied},
         {"poc_pass", c.poc_pass ? Json(*c.poc_pass) : Json()},
         {"poc_phase", c.poc_phase ? Json(*c.poc_phase == PocPhase::Ran ? "ran" : "compile_error") : Json()},
         {"fingerprint", c.fingerprint ? Json(*c.fingerprint) : Json()},
         {"normalizer_fallback", c.normalizer_fallback},
         {"diff", c.diff ? Json(*c.diff) : Json()}};
  return j;
}

Json stage_entry(std::string_view name, std::string_view input = {}) {
  Json j{{"stage", name}};
  if (!input.empty()) j["input"] = input;
  return j;
}

}  // namespace

Prediction run_pipeline(const IssueInstance& instance, const RunConfig& config, Backends backends,
                        const fs::path& out_dir) {
  config.validate();
  Prediction pred;
  pred.instance_id = instance.instance_id;
  const fs::path dir = out_dir / instance.instance_id;
  std::error_code ec;
  fs::remove_all(dir, ec);
  fs::create_directories(dir);
  Artifacts artifacts(dir);
  artifacts.json("config.json", config.to_json());

  MeteredBackend llm(backends.llm, config.prices, pred.cost);
  MeteredEmbedder embedder(backends.embedder, config.prices, pred.cost);
  Scrubber scrub;
  Json stages = Json::array();
  Json telemetry = Json::object();
  std::vector<Transcript> transcripts;
  std::string stage = "setup";

  try {
    InstanceWorkspace workspace(instance);
    const fs::path& root = workspace.root();
    scrub.add_path(root);
    scrub.add_path(root.parent_path());
    Sandbox& sandbox = workspace.sandbox();
    const RepoOptions repo;
    const RepoSnapshot base = snapshot(root, repo);

    auto store = config.version_store == "git" && git_available() ? make_git_store(root, repo)
                                                                  : make_memory_store(root);
    EditHistory history(root, std::move(store));
    LogStore logs;
    PocConfig poc_config;
    poc_config.build_command = instance.build_command;
    poc_config.repro_command = instance.repro_command;
    poc_config.timeout = config.poc_timeout;
    poc_config.head_lines = config.log_head_lines;
    poc_config.tail_lines = config.log_tail_lines;
    PocToolkit poc(sandbox, poc_config, logs);
    CodeSearch search(root);
    auto symbols = open_symbol_backend(root, SymbolBackendConfig{config.lsp_command, true});
    ScriptConfig script_config;
    script_config.output_cap_bytes = config.script_output_cap;
    ScriptSandbox scripts(logs, script_config);
    Toolbox tools = make_toolbox(
        {&search, symbols.get(), &poc, &history, ScriptSandbox::available(script_config) ? &scripts : nullptr});

    stage = "input";
    std::string input = instance.issue_report;
    if (config.input_type == InputType::SanitizerLog) {
      if (!instance.sanitizer_log) throw Error(ErrorCode::SchemaViolation, "instance has no sanitizer_log");
      input = *instance.sanitizer_log;
    }
    stages.push_back(stage_entry("input", config.input_type == InputType::IssueReport ? "issue_report" : "sanitizer_log"));
    const std::string tree = render_repo_tree(root, repo).text;
    artifacts.text("reports/input.md", input);

    std::optional<std::string> context_report;
    std::optional<std::string> property_report;
    if (config.enable_cpc) {
      stage = "cpc";
      auto out = run_cpc_agent({input, tree, std::nullopt, config.cpc_max_steps},
                               tools.restricted_to(static_tool_names()), llm);
      context_report = out.text();
      artifacts.text("reports/context_analysis.md", *context_report);
      artifacts.json("reports/cpc_transcript.json", transcript_json(out.run.transcript, scrub));
      telemetry["cpc"] = agent_telemetry(out);
      transcripts.push_back(out.run.transcript);
      stages.push_back(stage_entry("cpc"));
    }
    if (config.enable_spa) {
      stage = "spa";
      const auto saved_env = sandbox.env();
      install_assert_prelude(sandbox);
      auto out = run_spa_agent({input, tree, context_report, config.spa_max_steps}, tools, llm, history);
      for (const char* var : {"CFLAGS", "CXXFLAGS"}) {
        auto it = saved_env.find(var);
        if (it != saved_env.end()) sandbox.set_env(var, it->second);
        else sandbox.unset_env(var);
      }
      property_report = out.text();
      artifacts.text("reports/property_analysis.md", *property_report);
      artifacts.json("reports/spa_transcript.json", transcript_json(out.run.transcript, scrub));
      telemetry["spa"] = agent_telemetry(out);
      transcripts.push_back(out.run.transcript);
      stages.push_back(stage_entry("spa"));
      if (snapshot(root, repo) != base) throw Error(ErrorCode::WriteFailure, "workspace differs after the SPA agent");
    }

    stage = "enhance";
    const EnhancedIssueReport enhanced = build_enhanced_report(input, context_report, property_report);
    const std::string enhanced_text = enhanced.render();
    artifacts.text("reports/enhanced.md", enhanced_text);
    const bool any_agent = config.enable_cpc || config.enable_spa;
    const bool enhance_loc = any_agent && config.enhance_stages.count(EnhanceStage::Localization) > 0;
    const bool enhance_gen = any_agent && config.enhance_stages.count(EnhanceStage::Generation) > 0;
    const std::string& loc_report = enhance_loc ? enhanced_text : input;
    const std::string& gen_report = enhance_gen ? enhanced_text : input;
    const char* loc_input = enhance_loc ? "enhanced" : "plain";
    const char* gen_input = enhance_gen ? "enhanced" : "plain";

    stage = "loc.files";
    auto prompt_files = localize_files_prompt(loc_report, tree, root, llm, config.n_files);
    artifacts.json("rankings/files_prompt.json",
                   {{"files", prompt_files.files}, {"dropped", prompt_files.dropped}});
    stages.push_back(stage_entry(stage, loc_input));

    stage = "loc.retrieval";
    RetrievalOptions retrieval_options;
    retrieval_options.chunk_lines = config.chunk_lines;
    retrieval_options.repo = repo;
    auto retrieval = localize_files_retrieval(loc_report, tree, root, llm, embedder, config.n_files, retrieval_options);
    Json ranking = Json::array();
    for (const auto& r : retrieval.ranking) ranking.push_back({{"file", r.file}, {"score", r.score}});
    artifacts.json("rankings/files_retrieval.json", {{"ignored_folders", retrieval.ignored_folders},
                                                     {"chunk_count", retrieval.chunk_count},
                                                     {"ranking", ranking},
                                                     {"files", retrieval.files}});
    stages.push_back(stage_entry(stage, loc_input));

    const auto merged = merge_file_lists(prompt_files.files, retrieval.files);
    artifacts.json("rankings/files_merged.json", {{"files", merged}});
    if (merged.empty()) throw Error(ErrorCode::ElementVanished, "no suspicious files were localized");

    stage = "loc.elements";
    auto elements = localize_elements(merged, loc_report, root, llm);
    Json refs = Json::array();
    for (const auto& r : elements.refs) refs.push_back({{"file", r.file}, {"id", r.identifier}});
    Json dropped = Json::array();
    for (const auto& r : elements.dropped) dropped.push_back({{"file", r.file}, {"id", r.identifier}});
    artifacts.json("rankings/elements.json",
                   {{"elements", refs}, {"dropped", dropped}, {"reasked", elements.reasked}, {"flagged", elements.flagged}});
    stages.push_back(stage_entry(stage, loc_input));
    if (elements.refs.empty()) throw Error(ErrorCode::ElementVanished, "no suspicious elements were localized");

    stage = "generation";
    const PatchContext context = build_patch_context(root, elements.refs, config.margin);
    artifacts.text("candidates/context.md", context.render());
    auto candidates = generate_patches(gen_report, context, llm, config.t_patches);
    stages.push_back(stage_entry(stage, gen_input));

    stage = "validation";
    for (auto& c : candidates) {
      normalize_and_fingerprint(c, root);
      if (config.selection == SelectionStrategy::PocVoting) validate_candidate(c, history, poc);
    }
    if (snapshot(root, repo) != base) throw Error(ErrorCode::WriteFailure, "workspace differs after validation");
    if (config.selection == SelectionStrategy::PocVoting) stages.push_back(stage_entry(stage));

    stage = "selection";
    const Selection selection = select_patch(candidates, config.selection);
    for (const auto& c : candidates)
      artifacts.json(fmt::format("candidates/candidate-{}.json", c.index), candidate_json(c, scrub));
    artifacts.json("candidates/selection.json",
                   {{"strategy", to_string(config.selection)},
                    {"chosen", selection.chosen ? Json(*selection.chosen) : Json()},
                    {"group_size", selection.group_size},
                    {"eligible", selection.eligible}});
    stages.push_back(stage_entry(stage, to_string(config.selection)));
    pred.diff = selection.diff;
  } catch (const std::exception& e) {
    pred.errors.push_back(fmt::format("{}: {}", stage, scrub(e.what())));
  }

  Json tool_totals = Json::object();
  for (const auto& t : transcripts)
    for (const auto& [tool, n] : t.tool_counts) tool_totals[tool] = tool_totals.value(tool, 0) + n;
  telemetry["tool_counts"] = tool_totals;
  telemetry["script_calls"] = classify_script_calls(transcripts).to_json();
  telemetry["stages"] = stages;
  telemetry["errors"] = pred.errors;
  pred.telemetry = telemetry;
  artifacts.text("prediction.diff", pred.diff);
  artifacts.json("telemetry.json", telemetry);
  artifacts.json("cost.json", pred.cost.to_json());
  return pred;
}

std::vector<Prediction> run_batch(const std::vector<IssueInstance>& instances, const RunConfig& config,
                                  const BackendFactory& llm_factory, Embedder& embedder, const fs::path& out_dir) {
  config.validate();
  fs::create_directories(out_dir);
  std::vector<Prediction> results(instances.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < instances.size(); i = next++) {
      const auto& inst = instances[i];
      try {
        auto llm = llm_factory(inst);
        results[i] = run_pipeline(inst, config, Backends{*llm, embedder}, out_dir);
      } catch (const std::exception& e) {
        results[i].instance_id = inst.instance_id;
        results[i].errors.push_back(fmt::format("setup: {}", e.what()));
      }
    }
  };
  const size_t width = std::min(config.workers, std::max<size_t>(1, instances.size()));
  std::vector<std::thread> pool;
  for (size_t w = 1; w < width; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::string index;
  for (const auto& p : results) {
    Json line{{"instance_id", p.instance_id},
              {"diff_path", p.instance_id + "/prediction.diff"},
              {"cost", p.cost.total().str()}};
    index += line.dump() + "\n";
  }
  text::write_file(out_dir / "predictions.jsonl", index);
  text::write_file(out_dir / "config.json", config.to_json().dump(2) + "\n");
  return results;
}

}  // namespace vulnres
