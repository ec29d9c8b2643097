#include <doctest.h>

#include <map>
#include <random>

#include "test_support.hpp"
#include "vulnres/backends.hpp"
#include "vulnres/repair.hpp"
#include "vulnres/repo_model.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;
using namespace vulnres;
using vulnres::testing::corpus_dir;
using vulnres::testing::error_code_of;
using vulnres::testing::fixtures_dir;
using vulnres::testing::reply;
using vulnres::testing::Workbench;

namespace {

std::vector<ReplayEntry> scripted_generation() {
  return load_replay_script(fixtures_dir() / "replay" / "offbyone" / "parts" / "generation.json");
}

std::string file_lines(const fs::path& path, int first, int last) {
  const std::string content = text::read_file(path);
  auto lines = text::split_lines(content);
  std::string out;
  for (int i = first; i <= last; ++i) out += std::string(lines[i - 1]) + "\n";
  return out;
}

SearchReplaceEdit fix_edit(std::string replace) {
  return {"src/buf.c", "    if (len > nb->cap) {\n", std::move(replace)};
}

PatchCandidate candidate_with(size_t index, std::vector<SearchReplaceEdit> edits) {
  PatchCandidate c;
  c.index = index;
  c.edits = std::move(edits);
  return c;
}

}  // namespace

TEST_CASE("patch context with zero margin is the element text") {
  const fs::path root = corpus_dir("offbyone");
  auto ctx = build_patch_context(root, {{"src/buf.c", "copy_name"}}, 0);
  REQUIRE(ctx.windows.size() == 1);
  CHECK(ctx.windows[0].lines == LineRange{8, 21});
  CHECK(ctx.windows[0].text == file_lines(root / "src/buf.c", 8, 21));
  CHECK(ctx.render().find("src/buf.c") != std::string::npos);
}

TEST_CASE("patch context clamps margins and merges touching windows") {
  const fs::path root = corpus_dir("offbyone");
  auto wide = build_patch_context(root, {{"src/buf.c", "copy_name"}}, 1000);
  REQUIRE(wide.windows.size() == 1);
  CHECK(wide.windows[0].lines == LineRange{1, 21});

  // g_count is line 5, copy_name 8-21: margin 1 makes 4-6 and 7-22, which touch.
  auto merged = build_patch_context(root, {{"src/buf.c", "copy_name"}, {"src/buf.c", "g_count"}}, 1);
  REQUIRE(merged.windows.size() == 1);
  CHECK(merged.windows[0].lines == LineRange{4, 21});
  CHECK(merged.windows[0].elements.size() == 2);

  auto apart = build_patch_context(root, {{"src/buf.c", "copy_name"}, {"src/buf.c", "g_count"}}, 0);
  CHECK(apart.windows.size() == 2);

  auto two_files = build_patch_context(root, {{"src/main.c", "main"}, {"src/buf.c", "copy_name"}}, 2);
  REQUIRE(two_files.windows.size() == 2);
  CHECK(two_files.windows[0].file == "src/main.c");

  CHECK(error_code_of([&] { build_patch_context(root, {{"src/buf.c", "gone"}}, 3); }) == ErrorCode::ElementVanished);
}

TEST_CASE("generation samples greedily first and records temperatures") {
  const fs::path root = corpus_dir("offbyone");
  auto ctx = build_patch_context(root, {{"src/buf.c", "copy_name"}}, 2);
  ReplayBackend llm(scripted_generation());
  auto candidates = generate_patches("report", ctx, llm, 5);
  REQUIRE(candidates.size() == 5);
  const auto requests = llm.requests();
  REQUIRE(requests.size() == 5);
  for (size_t i = 0; i < 5; ++i) {
    CHECK(requests[i].caller == "generation");
    CHECK(requests[i].temperature == (i == 0 ? 0.0 : 1.0));
    CHECK(candidates[i].temperature == requests[i].temperature);
    CHECK(candidates[i].index == i);
  }
  CHECK_FALSE(candidates[0].parse_failed);
  CHECK(candidates[0].edits.size() == 1);
  CHECK(candidates[4].parse_failed);
  CHECK(candidates[4].edits.empty());
}

TEST_CASE("normalizer ignores comments and layout but not code") {
  const std::string a = "int f(int x)\n{\n    if (x > 1) {\n        return 2; /* two */\n    }\n    return x;\n}\n";
  const std::string b = "int f(int x) {\n  // comment\n  if (x > 1)  { return 2; }\n  return x;\n}\n";
  const std::string c = "int f(int x) {\n  if (x >= 1) { return 2; }\n  return x;\n}\n";
  CHECK(normalize_source(a) == normalize_source(b));
  CHECK(normalize_source(a) != normalize_source(c));
  CHECK(normalize_source("#define  A(x)   ((x)+1)\n") == normalize_source("#define A(x) ((x) + 1)\n"));
  CHECK(error_code_of([] { normalize_source("int f() {\n"); }) == ErrorCode::ParseFailure);
  CHECK(collapse_whitespace("a  /* c */ b\n\tc") == collapse_whitespace("a b c"));
}

TEST_CASE("equivalent fixes share a fingerprint and the workspace stays untouched") {
  Workbench bench("offbyone");
  const auto before = snapshot(bench.root);
  auto ctx = build_patch_context(bench.root, {{"src/buf.c", "copy_name"}}, 2);
  ReplayBackend llm(scripted_generation());
  auto candidates = generate_patches("report", ctx, llm, 5);
  for (auto& c : candidates) normalize_and_fingerprint(c, bench.root);
  CHECK(snapshot(bench.root) == before);

  REQUIRE(candidates[0].fingerprint);
  CHECK(candidates[1].fingerprint == candidates[0].fingerprint);
  CHECK(candidates[2].fingerprint == candidates[0].fingerprint);
  REQUIRE(candidates[3].fingerprint);
  CHECK(candidates[3].fingerprint != candidates[0].fingerprint);
  CHECK_FALSE(candidates[4].fingerprint);
  CHECK_FALSE(candidates[4].applied);

  REQUIRE(candidates[0].diff);
  CHECK(candidates[0].diff->find("-    if (len > nb->cap) {\n+    if (len >= nb->cap) {\n") != std::string::npos);
  CHECK(candidates[1].diff != candidates[0].diff);
}

TEST_CASE("edits that do not apply get no fingerprint") {
  const fs::path root = corpus_dir("offbyone");
  auto c = candidate_with(0, {{"src/buf.c", "no such line\n", "x\n"}});
  normalize_and_fingerprint(c, root);
  CHECK_FALSE(c.applied);
  CHECK_FALSE(c.fingerprint);
  CHECK_FALSE(c.error.empty());
}

TEST_CASE("validation runs the PoC on each candidate and rolls back") {
  Workbench bench("offbyone");
  const auto before = snapshot(bench.root);

  auto fixed = candidate_with(0, {fix_edit("    if (len >= nb->cap) {\n")});
  validate_candidate(fixed, bench.history, bench.poc);
  CHECK(fixed.poc_pass == true);
  CHECK(fixed.poc_phase == PocPhase::Ran);

  auto broken = candidate_with(1, {fix_edit("    if (len >= nb->cap {\n")});
  validate_candidate(broken, bench.history, bench.poc);
  CHECK(broken.poc_pass == false);
  CHECK(broken.poc_phase == PocPhase::CompileError);

  auto still_crashes = candidate_with(2, {{"src/buf.c", "    g_count++;\n", "    g_count += 1;\n"}});
  validate_candidate(still_crashes, bench.history, bench.poc);
  CHECK(still_crashes.poc_pass == false);
  CHECK(still_crashes.poc_phase == PocPhase::Ran);

  const size_t runs = bench.logs.all().size();
  auto empty = candidate_with(3, {});
  validate_candidate(empty, bench.history, bench.poc);
  auto stale = candidate_with(4, {{"src/buf.c", "missing\n", "x\n"}});
  validate_candidate(stale, bench.history, bench.poc);
  CHECK(bench.logs.all().size() == runs);
  CHECK(empty.poc_pass == false);
  CHECK(stale.poc_pass == false);
  CHECK_FALSE(stale.poc_phase);

  CHECK(bench.history.commits().empty());
  CHECK(snapshot(bench.root) == before);
}

TEST_CASE("selection agrees with a brute-force oracle") {
  std::mt19937 rng(2024);
  for (int round = 0; round < 2000; ++round) {
    const size_t count = rng() % 8;
    std::vector<PatchCandidate> candidates;
    for (size_t i = 0; i < count; ++i) {
      PatchCandidate c;
      c.index = i;
      if (rng() % 5) {
        c.applied = true;
        c.fingerprint = std::string(1, static_cast<char>('a' + rng() % 3));
        c.diff = "diff " + std::to_string(i);
      }
      switch (rng() % 3) {
        case 0: break;
        case 1: c.poc_pass = true; break;
        default: c.poc_pass = false; break;
      }
      candidates.push_back(c);
    }
    // Mix up the order; selection must not depend on it.
    std::shuffle(candidates.begin(), candidates.end(), rng);

    for (auto strategy : {SelectionStrategy::PocVoting, SelectionStrategy::SimpleVoting}) {
      std::map<std::string, std::vector<size_t>> groups;
      size_t eligible = 0;
      for (const auto& c : candidates) {
        bool ok = c.fingerprint && (strategy == SelectionStrategy::SimpleVoting || c.poc_pass == true);
        if (!ok) continue;
        ++eligible;
        groups[*c.fingerprint].push_back(c.index);
      }
      std::optional<size_t> want;
      size_t want_size = 0;
      for (auto& [_, members] : groups) {
        size_t first = *std::min_element(members.begin(), members.end());
        if (members.size() > want_size || (members.size() == want_size && first < *want)) {
          want = first;
          want_size = members.size();
        }
      }
      auto got = select_patch(candidates, strategy);
      CHECK(got.chosen == want);
      CHECK(got.group_size == want_size);
      CHECK(got.eligible == eligible);
      CHECK(got.diff == (want ? "diff " + std::to_string(*want) : std::string()));
    }
  }
}

TEST_CASE("selection strategy names") {
  CHECK(to_string(SelectionStrategy::PocVoting) == "poc_voting");
  CHECK(parse_selection_strategy("simple_voting") == SelectionStrategy::SimpleVoting);
  CHECK_FALSE(parse_selection_strategy("majority"));
}
