#include <doctest.h>

#include <map>
#include <regex>
#include <set>

#include "test_support.hpp"
#include "vulnres/backends.hpp"
#include "vulnres/harness.hpp"
#include "vulnres/repo_model.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;
using namespace vulnres;
using vulnres::testing::corpus_dir;
using vulnres::testing::error_code_of;
using vulnres::testing::fixtures_dir;
using vulnres::testing::reply;
using vulnres::testing::TempDir;

namespace {

const fs::path kInstances = fixtures_dir() / "instances" / "offbyone.jsonl";

fs::path replay_script(const std::string& variant) { return fixtures_dir() / "replay" / "offbyone" / (variant + ".json"); }

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = text::read_file(e.path());
  return out;
}

std::string schema_error(const TempDir& dir, const std::string& line) {
  text::write_file(dir / "issue.md", "issue");
  text::write_file(dir / "i.jsonl", line + "\n");
  try {
    load_instances(dir / "i.jsonl");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaViolation);
    return e.what();
  }
  return "";
}

PriceTable fixture_prices() {
  return PriceTable::from_json(Json{{"replay", {{"input_per_million", "2.50"}, {"output_per_million", "10"}}},
                                    {"hashing-256", {{"input_per_million", "0.02"}, {"output_per_million", "0"}}}});
}

Prediction run_variant(const std::string& variant, const fs::path& out, RunConfig config) {
  const auto instances = load_instances(kInstances);
  auto llm = ReplayBackend::from_file(replay_script(variant));
  HashingEmbedder embedder;
  return run_pipeline(instances.at(0), config, Backends{*llm, embedder}, out);
}

}  // namespace

TEST_CASE("fixture instance loads with files resolved") {
  auto instances = load_instances(kInstances);
  REQUIRE(instances.size() == 1);
  const auto& inst = instances[0];
  CHECK(inst.instance_id == "namebuf-0001");
  REQUIRE(inst.workspace);
  CHECK(fs::equivalent(*inst.workspace, corpus_dir("offbyone")));
  CHECK(inst.issue_report.find("heap-buffer-overflow") != std::string::npos);
  REQUIRE(inst.sanitizer_log);
  CHECK(inst.build_command == "sh scripts/build.sh");
  CHECK(inst.repro_command == "./build/poc poc/crash_input");
}

TEST_CASE("instance schema violations name the line and field") {
  TempDir dir;
  fs::create_directories(dir / "ws");
  auto err = schema_error(dir, R"({"instance_id": "a", "workspace": "ws", "issue_report": "x"})");
  CHECK(err.find("line 1: field 'repro_command'") != std::string::npos);
  err = schema_error(dir, R"({"instance_id": "a", "workspace": "ws", "image": "img", "issue_report": "x", "repro_command": "r"})");
  CHECK(err.find("field 'workspace'") != std::string::npos);
  err = schema_error(dir, R"({"instance_id": "a", "issue_report": "x", "repro_command": "r"})");
  CHECK(err.find("field 'workspace'") != std::string::npos);
  err = schema_error(dir, R"({"instance_id": "a", "workspace": "ws", "issue_report": "x", "issue_report_file": "issue.md", "repro_command": "r"})");
  CHECK(err.find("field 'issue_report'") != std::string::npos);
  err = schema_error(dir, R"({"instance_id": "a", "workspace": "ws", "issue_report_file": "nope.md", "repro_command": "r"})");
  CHECK(err.find("field 'issue_report_file'") != std::string::npos);
  err = schema_error(dir, R"({"instance_id": "a", "workspace": "ws", "issue_report": "x", "repro_command": "r", "colour": 1})");
  CHECK(err.find("field 'colour'") != std::string::npos);
  err = schema_error(dir, "[1, 2]");
  CHECK(err.find("line 1") != std::string::npos);

  text::write_file(dir / "dup.jsonl",
                   "{\"instance_id\": \"a\", \"workspace\": \"ws\", \"issue_report\": \"x\", \"repro_command\": \"r\"}\n\n"
                   "{\"instance_id\": \"a\", \"workspace\": \"ws\", \"issue_report\": \"y\", \"repro_command\": \"r\"}\n");
  try {
    load_instances(dir / "dup.jsonl");
    FAIL("duplicate id accepted");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3: field 'instance_id'") != std::string::npos);
  }
}

TEST_CASE("run configuration survives a JSON round trip") {
  RunConfig c;
  c.n_files = 4;
  c.margin = 3;
  c.t_patches = 7;
  c.chunk_lines = 64;
  c.enable_spa = false;
  c.enhance_stages = {EnhanceStage::Generation};
  c.selection = SelectionStrategy::SimpleVoting;
  c.input_type = InputType::SanitizerLog;
  c.cpc_max_steps = 9;
  c.log_head_lines = 5;
  c.script_output_cap = 100;
  c.poc_timeout = std::chrono::seconds(30);
  c.version_store = "memory";
  c.lsp_command = {"clangd", "--log=error"};
  c.workers = 3;
  c.prices = fixture_prices();
  const Json j = c.to_json();
  const RunConfig back = RunConfig::from_json(j);
  CHECK(back.to_json() == j);
  CHECK(back.temperatures() == std::vector<double>{0, 1, 1, 1, 1, 1, 1});
  CHECK(j.at("temperatures").size() == 7);
}

TEST_CASE("run configuration rejects what it cannot honour") {
  auto rejects = [](Json patch) {
    Json j = RunConfig{}.to_json();
    j.merge_patch(patch);
    return error_code_of([&] { RunConfig::from_json(j); }) == ErrorCode::InvalidConfig;
  };
  CHECK(rejects({{"n_fils", 3}}));
  CHECK(rejects({{"selection_strategy", "majority"}}));
  CHECK(rejects({{"temperatures", {0.0, 0.5, 1.0, 1.0, 1.0}}}));
  CHECK(rejects({{"t_patches", 0}}));
  CHECK(rejects({{"enable_cpc", false}, {"enable_spa", false}, {"enhance_stages", {"localization"}}}));
  CHECK(rejects({{"enhance_stages", Json::array()}}));
  CHECK(rejects({{"version_store", "svn"}}));
  CHECK_FALSE(rejects({{"n_files", 5}}));
}

TEST_CASE("eight named variants with distinct configurations") {
  const auto names = variant_names();
  CHECK(names.size() == 8);
  std::set<std::string> dumps;
  for (const auto& n : names) {
    RunConfig c = variant_config(n);
    CHECK_NOTHROW(c.validate());
    dumps.insert(c.to_json().dump());
  }
  CHECK(dumps.size() == 8);
  CHECK_FALSE(variant_config("base").enable_cpc);
  CHECK(variant_config("simple_voting").selection == SelectionStrategy::SimpleVoting);
  CHECK(error_code_of([] { variant_config("turbo"); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("script call categories") {
  CHECK(classify_script_call("print(get_poc_output('a').count('FAIL'))", "3") == "poc");
  CHECK(classify_script_call("import os\nos.system('ls')", "[sandbox] blocked operations: os.system") == "forbidden");
  CHECK(classify_script_call("print('the loop writes len + 1 bytes')", "") == "think");
  CHECK(classify_script_call("s = 'ABCDEFGHIJKLMNOP'\nprint(len(s))", "16") == "string");
  CHECK(classify_script_call("print(hex(0x502000000020 - 0x502000000010))", "0x10") == "int");
  CHECK(classify_script_call("print('abc'[1:])", "bc") == "string");
  CHECK(classify_script_call("x = [1, 2]\nprint(x)", "") == "other");
}

TEST_CASE("money is exact decimal arithmetic") {
  CHECK(Money::parse("0.05").str() == "0.05");
  CHECK(Money::parse("1").str() == "1.00");
  CHECK(Money::parse("0.000125").str() == "0.000125");
  CHECK((Money::parse("0.1") + Money::parse("0.2")) == Money::parse("0.3"));
  CHECK((Money::parse("0.05") + Money::parse("0.09")).divided_by(2) == Money::parse("0.07"));
  CHECK(Money::parse("1").divided_by(3).str() == "0.333333333333");
  CHECK(Money::parse("2").divided_by(3).str() == "0.666666666667");
  CHECK(error_code_of([] { Money::parse("1.0000000000001"); }) == ErrorCode::InvalidConfig);
  CHECK(error_code_of([] { Money::parse("abc"); }) == ErrorCode::InvalidConfig);
  auto prices = fixture_prices();
  CHECK(prices.cost("replay", 1'000'000, 100'000) == Money::parse("3.50"));
  CHECK(prices.cost("unknown", 1'000'000, 1) == Money());
}

TEST_CASE("metrics arithmetic") {
  std::vector<Verdict> verdicts;
  for (int i = 0; i < 80; ++i) verdicts.push_back({"i" + std::to_string(i), i < 60, false, ""});
  auto m = compute_metrics(verdicts, {});
  CHECK(m.resolved == 60);
  CHECK(m.total == 80);
  CHECK(m.resolved_percent() == "75.0%");
  CHECK(m.resolved_rate() == doctest::Approx(0.75));

  auto two = compute_metrics({{"a", true, false, ""}, {"b", false, false, ""}},
                             {Money::parse("0.05"), Money::parse("0.09")});
  CHECK(two.avg_cost == Money::parse("0.07"));
  CHECK(two.total_cost == Money::parse("0.14"));
  CHECK(two.resolved_percent() == "50.0%");
  CHECK(compute_metrics({}, {}).resolved_percent() == "0.0%");
  CHECK(compute_metrics({{"a", true, false, ""}, {"b", false, false, ""}, {"c", false, false, ""}}, {})
            .resolved_percent() == "33.3%");
}

TEST_CASE("replay scripts fail loudly") {
  SUBCASE("exhausted") {
    ReplayBackend llm({reply("loc.files", "x")});
    llm.complete({"loc.files", {}, {}, 0.0});
    try {
      llm.complete({"generation", {}, {}, 0.0});
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ScriptExhausted);
      CHECK(std::string(e.what()).find("stage 'generation'") != std::string::npos);
    }
  }
  SUBCASE("out of step") {
    ReplayBackend llm({reply("loc.files", "x")});
    try {
      llm.complete({"cpc", {}, {}, 0.0});
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ReplayDesync);
      CHECK(std::string(e.what()).find("expects caller 'loc.files' but stage 'cpc'") != std::string::npos);
    }
  }
  SUBCASE("includes resolve relative to the including file") {
    auto entries = load_replay_script(replay_script("full"));
    CHECK(entries.size() == 3 + 5 + 3 + 5);
    CHECK(entries.front().caller == "cpc");
    CHECK(entries.back().caller == "generation");
  }
}

TEST_CASE("end-to-end replay is deterministic and leaves the corpus alone") {
  const auto corpus_before = snapshot(corpus_dir("offbyone"));
  TempDir a, b;
  RunConfig config;
  config.prices = fixture_prices();
  auto first = run_variant("full", a.path(), config);
  auto second = run_variant("full", b.path(), config);
  CHECK(first.errors.empty());
  CHECK(first.diff == second.diff);
  CHECK(read_tree(a.path()) == read_tree(b.path()));
  CHECK(snapshot(corpus_dir("offbyone")) == corpus_before);

  CHECK(first.diff.find("+    if (len >= nb->cap) {") != std::string::npos);
  const auto artifacts = read_tree(a.path() / "namebuf-0001");
  for (const char* rel : {"reports/enhanced.md", "reports/context_analysis.md", "reports/property_analysis.md",
                          "reports/cpc_transcript.json", "reports/spa_transcript.json", "rankings/files_merged.json",
                          "rankings/elements.json", "candidates/selection.json", "prediction.diff", "telemetry.json",
                          "cost.json", "config.json"})
    CHECK_MESSAGE(artifacts.count(rel), rel);
  // Scratch paths, PIDs and addresses from the runs never reach the artifacts.
  const std::regex pid(R"(==\d+==)");
  const std::regex addr(R"(0x[0-9a-fA-F]{4,})");
  for (const auto& [rel, body] : artifacts) {
    CHECK_MESSAGE(body.find("vulnres-namebuf") == std::string::npos, rel);
    if (rel.find("transcript") == std::string::npos) continue;
    CHECK_FALSE_MESSAGE(std::regex_search(body, pid), rel);
    CHECK_FALSE_MESSAGE(std::regex_search(body, addr), rel);
  }
  CHECK(artifacts.at("reports/spa_transcript.json").find("==<pid>==") != std::string::npos);
}

TEST_CASE("cost record matches the scripted token usage") {
  TempDir out;
  RunConfig config;
  config.prices = fixture_prices();
  auto pred = run_variant("full", out.path(), config);
  const auto entries = load_replay_script(replay_script("full"));
  Money chat;
  for (const auto& e : entries)
    chat += config.prices.cost("replay", e.response.usage.input_tokens, e.response.usage.output_tokens);
  CHECK(pred.cost.total(CallKind::Chat) == chat);
  size_t embedding_calls = 0;
  for (const auto& e : pred.cost.entries()) {
    if (e.kind != CallKind::Embedding) continue;
    ++embedding_calls;
    CHECK(e.caller == "loc.retrieval");
    CHECK(e.dollars == config.prices.cost("hashing-256", e.input_tokens, 0));
  }
  CHECK(embedding_calls == 1);
  CHECK(pred.cost.total() == pred.cost.total(CallKind::Chat) + pred.cost.total(CallKind::Embedding));
  const Json cost = Json::parse(text::read_file(out / "namebuf-0001/cost.json"));
  CHECK(cost.at("total_dollars") == pred.cost.total().str());
}

TEST_CASE("a short script names the starving stage") {
  TempDir out;
  const auto instances = load_instances(kInstances);
  auto entries = load_replay_script(replay_script("base"));
  entries.resize(entries.size() - 5);  // drop every generation turn
  ReplayBackend llm(entries);
  HashingEmbedder embedder;
  auto pred = run_pipeline(instances[0], variant_config("base"), Backends{llm, embedder}, out.path());
  REQUIRE(pred.errors.size() == 1);
  CHECK(pred.errors[0].rfind("generation: ScriptExhausted:", 0) == 0);
  CHECK(pred.errors[0].find("stage 'generation'") != std::string::npos);
  CHECK(pred.diff.empty());
  CHECK(text::read_file(out / "namebuf-0001/prediction.diff").empty());
}

TEST_CASE("batch run, evaluation and report") {
  TempDir out;
  const auto instances = load_instances(kInstances);
  HashingEmbedder embedder;
  RunConfig config = variant_config("base");
  config.prices = fixture_prices();
  auto preds = run_batch(
      instances, config,
      [](const IssueInstance&) -> std::unique_ptr<LlmBackend> { return ReplayBackend::from_file(replay_script("base")); },
      embedder, out.path());
  REQUIRE(preds.size() == 1);
  auto stored = load_predictions(out.path());
  REQUIRE(stored.size() == 1);
  CHECK(stored[0].diff == preds[0].diff);
  CHECK(stored[0].cost == preds[0].cost.total());

  SUBCASE("harness verifier") {
    HarnessVerifier verifier(std::chrono::seconds(120));
    auto m = evaluate(out.path(), instances, verifier);
    CHECK(m.resolved == 1);
    CHECK(m.total == 1);
    auto verdict = verifier.verify(instances[0], "not a diff\n");
    CHECK_FALSE(verdict.resolved);
    CHECK(verdict.detail == "diff does not apply");
  }
  SUBCASE("command verifier") {
    CommandVerifier verifier("grep -q 'len >= nb->cap' \"$VULNRES_DIFF_PATH\" && test \"$VULNRES_INSTANCE_ID\" = namebuf-0001");
    auto m = evaluate(out.path(), instances, verifier);
    CHECK(m.resolved == 1);
    const Json evaluation = Json::parse(text::read_file(out / "evaluation.json"));
    CHECK(evaluation.at("metrics").at("resolved_percent") == "100.0%");
    auto report = render_run_report(out.path());
    CHECK(report.find("resolved: 1/1 (100.0%)") != std::string::npos);
    CHECK(report.find("agent tool calls") != std::string::npos);
  }
  SUBCASE("instances without predictions count as unresolved") {
    auto more = instances;
    more.push_back(instances[0]);
    more.back().instance_id = "missing";
    CommandVerifier verifier("true");
    auto m = evaluate(out.path(), more, verifier);
    CHECK(m.resolved == 1);
    CHECK(m.total == 2);
    CHECK(m.resolved_percent() == "50.0%");
  }
}

TEST_CASE("chat backend request and response shapes") {
  LiveEndpoint endpoint;
  endpoint.model = "m";
  endpoint.api_key = "k";
  OpenAiChatBackend backend(endpoint);
  ChatRequest request{"cpc", {ChatMessage::system("s"), ChatMessage::user("u")}, {{"read_code", "read", Json::object()}}, 0.0};
  Json body = backend.request_body(request);
  CHECK(body["model"] == "m");
  CHECK(body["messages"].size() == 2);
  CHECK(body["tools"][0]["function"]["name"] == "read_code");

  Json response = Json::parse(R"({"model": "m", "choices": [{"message": {"content": null, "tool_calls": [
      {"id": "c1", "type": "function", "function": {"name": "run_poc", "arguments": "{\"unique_name\": \"x\"}"}}]}}],
      "usage": {"prompt_tokens": 12, "completion_tokens": 3}})");
  auto parsed = OpenAiChatBackend::parse_response(response);
  REQUIRE(parsed.tool_calls.size() == 1);
  CHECK(parsed.tool_calls[0].arguments["unique_name"] == "x");
  CHECK(parsed.usage.input_tokens == 12);
  CHECK(parsed.usage.output_tokens == 3);
}
