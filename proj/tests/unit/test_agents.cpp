#include <doctest.h>

#include <map>
#include <tuple>

#include "test_support.hpp"
#include "vulnres/agents.hpp"
#include "vulnres/backends.hpp"
#include "vulnres/repo_model.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;
using namespace vulnres;
using vulnres::testing::error_code_of;
using vulnres::testing::fixtures_dir;
using vulnres::testing::reply;
using vulnres::testing::tool_reply;
using vulnres::testing::Workbench;

namespace {

std::string scripted_report(const std::string& part) {
  auto entries = load_replay_script(fixtures_dir() / "replay" / "offbyone" / "parts" / (part + ".json"));
  return entries.back().response.content;
}

std::string issue_text() { return text::read_file(fixtures_dir() / "instances" / "offbyone" / "issue.md"); }

AgentInputs inputs_for(const Workbench& bench) { return {issue_text(), render_repo_tree(bench.root).text, {}, {}}; }

std::string bound_assert_edit(const std::string& condition) {
  return "### src/buf.c\n<<<<<<< SEARCH\n        nb->data[i] = name[i];\n=======\n"
         "        SAFETY_PROPERTY_ASSERT(" +
         condition + ", \"copy_name_bound\");\n        nb->data[i] = name[i];\n>>>>>>> REPLACE\n";
}

}  // namespace

TEST_CASE("cpc transcript records every tool step and the final report") {
  Workbench bench("offbyone");
  ReplayBackend llm({
      tool_reply("cpc", "search_code_element", {{"name", "copy_name"}}, "look at frame #0"),
      tool_reply("cpc", "read_code", {{"file", "src/buf.h"}, {"center", 9}, {"num", 10}}),
      tool_reply("cpc", "search_code_element", {{"name", "name_buf_init"}}),
      reply("cpc", scripted_report("cpc")),
  });
  auto out = run_cpc_agent(inputs_for(bench), bench.toolbox().restricted_to(static_tool_names()), llm);
  const Transcript& t = out.run.transcript;
  REQUIRE(t.steps.size() == 4);
  CHECK(t.tool_call_steps() == 3);
  CHECK(t.model_turns == 4);
  CHECK(t.tool_counts.at("search_code_element") == 2);
  CHECK(t.tool_counts.at("read_code") == 1);
  CHECK(t.steps[0].observation.find("src/buf.c") != std::string::npos);
  CHECK_FALSE(out.run.forced_finalize);
  REQUIRE(out.report);
  REQUIRE(out.report->items.size() == 2);
  CHECK(out.report->items[0].source == SourceRef{"src/buf.c", "copy_name", {13, 18}});
  CHECK(trace_frame(out.report->items[0].trace_link) == 0);
  CHECK_FALSE(trace_frame(out.report->items[1].trace_link).has_value());
  CHECK(llm.remaining() == 0);
}

TEST_CASE("a tool outside the agent's set is refused and counted") {
  Workbench bench("offbyone");
  const auto before = snapshot(bench.root);
  ReplayBackend llm({
      tool_reply("cpc", "apply_edits", {{"unique_name", "x"}, {"edits", bound_assert_edit("1")}}),
      reply("cpc", scripted_report("cpc")),
  });
  auto out = run_cpc_agent(inputs_for(bench), bench.toolbox().restricted_to(static_tool_names()), llm);
  const Transcript& t = out.run.transcript;
  REQUIRE(t.steps.size() == 2);
  CHECK(t.steps[0].refused);
  CHECK(t.refusals == 1);
  CHECK(t.tool_counts.at("apply_edits") == 1);
  auto refusal = Json::parse(t.steps[0].observation);
  CHECK(refusal["error"] == "tool_not_allowed");
  CHECK(refusal["tool"] == "apply_edits");
  CHECK(snapshot(bench.root) == before);
}

TEST_CASE("a toolbox wider than the spec is a configuration error") {
  Workbench bench("offbyone");
  ReplayBackend llm({});
  CHECK(error_code_of([&] { run_cpc_agent(inputs_for(bench), bench.toolbox(), llm); }) ==
        ErrorCode::InvalidConfig);
}

TEST_CASE("step budget: finalize turn, then a flagged best-effort result") {
  Workbench bench("offbyone");
  auto tools = bench.toolbox().restricted_to(static_tool_names());
  AgentInputs in = inputs_for(bench);
  in.max_steps = 1;

  SUBCASE("model reports when told to finalize") {
    ReplayBackend llm({tool_reply("cpc", "search_code_element", {{"name", "copy_name"}}),
                       reply("cpc", scripted_report("cpc"))});
    auto out = run_cpc_agent(in, tools, llm);
    CHECK(out.run.forced_finalize);
    CHECK_FALSE(out.run.max_steps_exceeded);
    CHECK(out.report.has_value());
    // The finalize turn offers no tools.
    CHECK(llm.requests().back().tool_count == 0);
  }
  SUBCASE("model keeps calling tools") {
    ReplayBackend llm({tool_reply("cpc", "search_code_element", {{"name", "copy_name"}}, "still looking"),
                       tool_reply("cpc", "read_code", {{"file", "src/buf.c"}, {"center", 1}, {"num", 1}}),
                       reply("cpc", "still nothing")});
    auto out = run_cpc_agent(in, tools, llm);
    CHECK(out.run.forced_finalize);
    CHECK(out.run.max_steps_exceeded);
    CHECK(out.run.final_text == "still looking");
    CHECK(out.reasked);
    CHECK_FALSE(out.report.has_value());
    CHECK(out.text() == "still nothing");
  }
}

TEST_CASE("a report missing a field is re-asked once") {
  Workbench bench("offbyone");
  std::string broken = scripted_report("cpc");
  broken = text::replace_all(broken, "   Rationale: the loop", "   Why: the loop");
  ReplayBackend llm({reply("cpc", broken), reply("cpc", scripted_report("cpc"))});
  auto out = run_cpc_agent(inputs_for(bench), bench.toolbox().restricted_to(static_tool_names()), llm);
  CHECK(out.reasked);
  REQUIRE(out.report.has_value());
  CHECK(out.parse_error.empty());
  CHECK(out.run.transcript.model_turns == 2);
  const auto& asked = out.run.conversation[out.run.conversation.size() - 2];
  CHECK(asked.role == "user");
  CHECK(asked.content.find("item 1: missing or invalid Rationale") != std::string::npos);
}

TEST_CASE("report rendering round-trips") {
  auto context = parse_context_report(scripted_report("cpc"));
  CHECK(parse_context_report(render_context_report(context)).items.size() == context.items.size());
  auto again = parse_context_report(render_context_report(context));
  for (size_t i = 0; i < context.items.size(); ++i) {
    CHECK(again.items[i].code == context.items[i].code);
    CHECK(again.items[i].source == context.items[i].source);
    CHECK(again.items[i].trace_link == context.items[i].trace_link);
    CHECK(again.items[i].rationale == context.items[i].rationale);
  }
  CHECK(again.insights == context.insights);

  auto property = parse_property_report(scripted_report("spa"));
  REQUIRE(property.properties.size() == 1);
  CHECK(property.properties[0].result == PropertyResult::Fail);
  CHECK(property.properties[0].file == "src/buf.c");
  CHECK(property.properties[0].line == 17);
  auto p2 = parse_property_report(render_property_report(property));
  CHECK(p2.properties[0].assertion == property.properties[0].assertion);
  CHECK(p2.properties[0].interpretation == property.properties[0].interpretation);
  CHECK(p2.insights == property.insights);
}

TEST_CASE("property report without properties needs the no-property insight") {
  CHECK(error_code_of([] { parse_property_report("### Safety Properties\n\n### Insights\nunclear\n"); }) ==
        ErrorCode::ReportParseFailure);
  auto r = parse_property_report("### Safety Properties\n\n### Insights\nNo stable property found: flaky.\n");
  CHECK(r.properties.empty());
}

TEST_CASE("assert prelude prints PASS when the condition holds and never aborts") {
  Workbench bench("offbyone");
  install_assert_prelude(bench.sandbox);
  CHECK(fs::exists(bench.root / std::string(kAssertPreludePath)));
  bench.history.apply_edits("always", parse_edit_blocks(bound_assert_edit("1")));
  auto run = bench.poc.run_poc("always_true");
  CHECK(run.phase == PocPhase::Ran);
  CHECK(run.summary.failed == 0);
  CHECK(run.summary.passed > 0);
  // The crash still happens after the assertion line.
  CHECK(run.sanitizer_triggered);
}

TEST_CASE("spa agent leaves the workspace as it found it") {
  Workbench bench("offbyone");
  install_assert_prelude(bench.sandbox);
  const auto before = snapshot(bench.root);

  SUBCASE("normal run") {
    ReplayBackend llm(load_replay_script(fixtures_dir() / "replay" / "offbyone" / "parts" / "spa.json"));
    auto out = run_spa_agent(inputs_for(bench), bench.toolbox(), llm, bench.history);
    REQUIRE(out.report.has_value());
    CHECK(out.run.transcript.tool_counts.at("apply_edits") == 1);
    const auto& observed = out.run.transcript.steps[2].observation;
    CHECK(observed.find("[SPA] copy_name_bound FAIL") != std::string::npos);
    CHECK(bench.history.commits().empty());
    CHECK(snapshot(bench.root) == before);
  }
  SUBCASE("script ends mid-run") {
    ReplayBackend llm({tool_reply("spa", "apply_edits", {{"unique_name", "a"}, {"edits", bound_assert_edit("1")}})});
    CHECK(error_code_of([&] { run_spa_agent(inputs_for(bench), bench.toolbox(), llm, bench.history); }) ==
          ErrorCode::ScriptExhausted);
    CHECK(bench.history.commits().empty());
    CHECK(snapshot(bench.root) == before);
  }
}

TEST_CASE("a compile-breaking assertion can be rolled back and corrected") {
  Workbench bench("offbyone");
  install_assert_prelude(bench.sandbox);
  const auto before = snapshot(bench.root);
  ReplayBackend llm({
      tool_reply("spa", "apply_edits", {{"unique_name", "broken"}, {"edits", bound_assert_edit("i < nb->capacity")}}),
      tool_reply("spa", "run_poc", {{"unique_name", "broken"}}),
      tool_reply("spa", "rollback_the_latest_one_edit_set", Json::object()),
      tool_reply("spa", "apply_edits", {{"unique_name", "fixed"}, {"edits", bound_assert_edit("i < nb->cap")}}),
      tool_reply("spa", "run_poc", {{"unique_name", "fixed"}}),
      reply("spa", scripted_report("spa")),
  });
  auto out = run_spa_agent(inputs_for(bench), bench.toolbox(), llm, bench.history);
  const auto& steps = out.run.transcript.steps;
  REQUIRE(steps.size() == 6);
  CHECK(steps[1].observation.find("phase: compile error") != std::string::npos);
  CHECK(steps[2].observation.find("rolled back 1 edit set(s), last: 'broken'") != std::string::npos);
  CHECK(steps[4].observation.find("copy_name_bound FAIL") != std::string::npos);
  CHECK(snapshot(bench.root) == before);
}

TEST_CASE("enhanced report parsing inverts rendering") {
  const std::vector<std::optional<std::string>> bodies{
      std::nullopt, std::string(), std::string("plain\n"), std::string("## Context Analysis Report\nfake heading"),
      std::string("\n\n## Issue Report\n"), std::string("tail without newline")};
  const std::vector<std::string> issues{"", "title\nbody\n", "## Property Analysis Report\n", " ## indented\n"};
  for (const auto& issue : issues)
    for (const auto& context : bodies)
      for (const auto& property : bodies) {
        auto report = build_enhanced_report(issue, context, property);
        auto back = parse_enhanced_report(report.render());
        CHECK(back.issue_text == report.issue_text);
        CHECK(back.context_report == report.context_report);
        CHECK(back.property_report == report.property_report);
        CHECK(back.context_report.has_value() == context.has_value());
        CHECK(back.property_report.has_value() == property.has_value());
      }
}

TEST_CASE("distinct enhanced reports render to distinct texts") {
  const std::vector<std::optional<std::string>> bodies{std::nullopt, std::string(), std::string("a"),
                                                       std::string("a\n\nb"), std::string("## Issue Report"),
                                                       std::string(" ## Issue Report")};
  std::map<std::string, std::tuple<std::optional<std::string>, std::optional<std::string>, std::string>> seen;
  for (const std::string issue : {"", "x", "## Context Analysis Report"})
    for (const auto& context : bodies)
      for (const auto& property : bodies) {
        auto r = build_enhanced_report(issue, context, property);
        auto key = std::make_tuple(r.context_report, r.property_report, r.issue_text);
        auto [it, fresh] = seen.emplace(r.render(), key);
        if (!fresh) CHECK(it->second == key);
      }
  CHECK(seen.size() == 3 * bodies.size() * bodies.size());
}

TEST_CASE("enhanced report sections appear in order") {
  auto r = build_enhanced_report("issue", std::string("ctx"), std::string("props")).render();
  auto issue = r.find("## Issue Report");
  auto ctx = r.find("## Context Analysis Report");
  auto props = r.find("## Property Analysis Report");
  CHECK(issue < ctx);
  CHECK(ctx < props);
  CHECK(build_enhanced_report("issue\n\n", {}, {}).render() == "## Issue Report\nissue\n");
}

TEST_CASE("prompt assets carry every section the agents use") {
  for (const char* section : {"objective", "analysis_process", "output_format"}) {
    CHECK_FALSE(prompt_section("cpc", section).empty());
    CHECK_FALSE(prompt_section("spa", section).empty());
  }
  CHECK(error_code_of([] { prompt_section("cpc", "nope"); }) == ErrorCode::InvalidConfig);
  CHECK(fill_template("a {{x}} b {{x}}", {{"x", "1"}}) == "a 1 b 1");
  auto spa = spa_agent_spec();
  CHECK(spa.allowed_tools == all_tool_names());
  CHECK(cpc_agent_spec().allowed_tools == static_tool_names());
  CHECK(spa.max_steps == 40);
}
