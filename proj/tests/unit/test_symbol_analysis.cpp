#include <doctest.h>

#include <algorithm>
#include <map>
#include <regex>

#include "test_support.hpp"
#include "vulnres/error.hpp"
#include "vulnres/symbol_analysis.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;
using namespace vulnres;
using vulnres::testing::corpus_dir;
using vulnres::testing::error_code_of;

namespace {

const char* kFigureQuery =
    "### njs/src/njs_vmcode.c\n"
    "<<<<<< SEARCH\n"
    "struct njs_property_next_s {\n"
    "    uint32_t    index;\n"
    "    njs_array_t *array;\n"
    "};\n"
    "======\n"
    "struct njs_property_next_s {\n"
    "    uint32_t    FIND_REFERENCES(index);\n"
    "    njs_array_t *array;\n"
    "};\n"
    ">>>>>> REPLACE\n";

// 1-based (line, column) of the first whole-word occurrence of `word` on a line containing `anchor`.
std::pair<int, int> scan_position(const fs::path& file, const std::string& anchor, const std::string& word) {
  auto content = text::read_file(file);
  auto lines = text::split_lines(content);
  std::regex word_re("\\b" + word + "\\b");
  for (size_t i = 0; i < lines.size(); ++i) {
    std::string l(lines[i]);
    if (l.find(anchor) == std::string::npos) continue;
    std::smatch m;
    if (std::regex_search(l, m, word_re)) return {static_cast<int>(i) + 1, static_cast<int>(m.position(0)) + 1};
  }
  return {0, 0};
}

std::string block(const std::string& file, const std::string& search, const std::string& replace) {
  return "### " + file + "\n<<<<<<< SEARCH\n" + search + "=======\n" + replace + ">>>>>>> REPLACE\n";
}

const std::string kCallSearch = "    if (copy_name(&nb, line) != 0) {\n";

}  // namespace

TEST_CASE("figure query maps to the index field") {
  fs::path root = corpus_dir("njs_mini");
  auto queries = plan_queries(root, kFigureQuery);
  REQUIRE(queries.size() == 1);
  auto [line, col] = scan_position(root / "njs/src/njs_vmcode.c", "uint32_t    index;", "index");
  REQUIRE(line > 0);
  CHECK(queries[0] == MarkerQuery{QueryKind::References, "index", "njs/src/njs_vmcode.c", line, col});
}

TEST_CASE("blocks without markers") {
  fs::path root = corpus_dir("offbyone");
  auto same = block("src/main.c", kCallSearch, kCallSearch);
  CHECK(error_code_of([&] { plan_queries(root, same); }) == ErrorCode::NoMarkersFound);
  CHECK(error_code_of([&] { plan_queries(root, ""); }) == ErrorCode::NoMarkersFound);
}

TEST_CASE("call-site marker matches a substring scan") {
  fs::path root = corpus_dir("offbyone");
  REQUIRE(text::read_file(root / "src/main.c").find(kCallSearch) != std::string::npos);
  auto q = plan_queries(root, block("src/main.c", kCallSearch, "    if (FIND_DEFINITION(copy_name)(&nb, line) != 0) {\n"));
  REQUIRE(q.size() == 1);
  auto [line, col] = scan_position(root / "src/main.c", "copy_name(&nb, line)", "copy_name");
  CHECK(q[0] == MarkerQuery{QueryKind::Definition, "copy_name", "src/main.c", line, col});

  // Whitespace drift in SEARCH and REPLACE still maps to the same spot.
  auto drift = plan_queries(root, block("src/main.c", "if (copy_name(&nb,   line) != 0) {\n",
                                        "if ( FIND_DEFINITION( copy_name ) (&nb, line) != 0) {\n"));
  REQUIRE(drift.size() == 1);
  CHECK(drift[0] == q[0]);
}

TEST_CASE("several markers in one call keep their order") {
  fs::path root = corpus_dir("offbyone");
  std::string text =
      block("src/buf.c", "        nb->data[i] = name[i];\n",
            "        FIND_REFERENCES(nb)->data[i] = FIND_DEFINITION(name)[i];\n") +
      block("src/main.c", kCallSearch, "    if (FIND_REFERENCES(copy_name)(&nb, line) != 0) {\n");
  auto q = plan_queries(root, text);
  REQUIRE(q.size() == 3);
  CHECK(q[0].symbol == "nb");
  CHECK(q[0].kind == QueryKind::References);
  CHECK(q[1].symbol == "name");
  CHECK(q[1].kind == QueryKind::Definition);
  CHECK(q[1].line == q[0].line);
  CHECK(q[1].column > q[0].column);
  CHECK(q[2].file == "src/main.c");
  CHECK(plan_queries(root, text) == q);
}

TEST_CASE("malformed markers and bad search text") {
  fs::path root = corpus_dir("offbyone");
  CHECK(error_code_of([&] {
          plan_queries(root, block("src/buf.c", "        nb->data[i] = name[i];\n",
                                   "        FIND_REFERENCES(nb->data)[i] = name[i];\n"));
        }) == ErrorCode::MalformedBlock);
  CHECK(error_code_of([&] {
          plan_queries(root, block("src/buf.c", "        nb->data[i] = name[i];\n",
                                   "        FIND_REFERENCES nb->data[i] = name[i];\n"));
        }) == ErrorCode::MalformedBlock);
  CHECK(error_code_of([&] {
          plan_queries(root, block("src/buf.c", "no such text\n", "FIND_DEFINITION(x)\n"));
        }) == ErrorCode::SearchTextNotFound);
  CHECK(error_code_of([&] {
          plan_queries(root, block("src/buf.c", "    }\n", "    FIND_DEFINITION(x)\n"));
        }) == ErrorCode::SearchTextAmbiguous);
  CHECK(error_code_of([&] {
          plan_queries(root, block("src/buf.c", "        nb->data[i] = name[i];\n",
                                   "        nb->data[i] = FIND_DEFINITION(other)[i];\n"));
        }) == ErrorCode::MalformedBlock);
}

TEST_CASE("planning and resolving never touch the tree") {
  fs::path root = corpus_dir("njs_mini");
  auto before = snapshot(root);
  FallbackIndex index;
  index.init(root);
  for (int i = 0; i < 3; ++i) resolve(plan_queries(root, kFigureQuery), index);
  CHECK(snapshot(root) == before);
}

TEST_CASE("definition of copy_name from its call site") {
  fs::path root = corpus_dir("offbyone");
  FallbackIndex index;
  index.init(root);
  auto q = plan_queries(root, block("src/main.c", kCallSearch, "    if (FIND_DEFINITION(copy_name)(&nb, line) != 0) {\n"));
  auto r = resolve(q, index);
  REQUIRE(r.outcomes.size() == 1);
  REQUIRE(r.outcomes[0].outcome == Outcome::Locations);
  REQUIRE(r.outcomes[0].locations.size() == 1);
  const auto& loc = r.outcomes[0].locations[0];
  CodeElement oracle;
  for (const auto& e : parse_elements(root, "src/buf.c"))
    if (e.name == "copy_name") oracle = e;
  CHECK(loc.file == "src/buf.c");
  CHECK(loc.lines == oracle.lines);
  CHECK(loc.preview == oracle.text);
}

TEST_CASE("not found, order, cap") {
  fs::path root = corpus_dir("offbyone");
  FallbackIndex index;
  index.init(root);
  auto [mline, mcol] = scan_position(root / "src/name_buf.c", "malloc", "malloc");
  REQUIRE(mline > 0);
  auto [cline, ccol] = scan_position(root / "src/main.c", "copy_name(&nb, line)", "copy_name");
  std::vector<MarkerQuery> qs{{QueryKind::Definition, "malloc", "src/name_buf.c", mline, mcol},
                              {QueryKind::References, "copy_name", "src/main.c", cline, ccol}};
  auto r = resolve(qs, index);
  REQUIRE(r.outcomes.size() == 2);
  CHECK(r.outcomes[0].query == qs[0]);
  CHECK(r.outcomes[0].outcome == Outcome::NotFound);
  CHECK(r.outcomes[1].query == qs[1]);
  CHECK(r.outcomes[1].outcome == Outcome::Locations);
  CHECK(r.references_include_declaration);
  // buf.h prototype, buf.c definition, main.c call, tests call
  CHECK(r.outcomes[1].locations.size() >= 3);

  auto capped = resolve({qs[1]}, index, ResolveOptions{2});
  CHECK(capped.outcomes[0].locations.size() == 2);
  CHECK(capped.outcomes[0].truncated);

  std::string view = render_resolution(r);
  CHECK(view.find("not found") != std::string::npos);
  CHECK(view.find("src/buf.c:") != std::string::npos);
}

TEST_CASE("every preview is the file slice") {
  fs::path root = corpus_dir("njs_mini");
  FallbackIndex index;
  index.init(root);
  auto r = resolve(plan_queries(root, kFigureQuery), index);
  REQUIRE(r.outcomes[0].outcome == Outcome::Locations);
  for (const auto& loc : r.outcomes[0].locations) {
    auto content = text::read_file(root / loc.file);
    CHECK(loc.preview == text::slice_lines(content, loc.lines.start, loc.lines.end));
    CHECK(loc.preview.find("index") != std::string::npos);
  }
}

TEST_CASE("fallback definitions agree with parse_elements across the corpus") {
  int checked = 0;
  for (const std::string corpus : {"offbyone", "njs_mini", "cpp_mini"}) {
    fs::path root = corpus_dir(corpus);
    std::map<std::string, std::vector<CodeElement>> by_name;
    for (const auto& f : list_source_files(root))
      for (const auto& e : parse_elements(root, f)) by_name[e.name].push_back(e);
    FallbackIndex index;
    index.init(root);
    for (const auto& [name, elems] : by_name) {
      if (elems.size() != 1 || !elems[0].qualifier.empty()) continue;
      if (!std::all_of(name.begin(), name.end(), text::is_ident_char)) continue;
      const auto& e = elems[0];
      // Position of the name inside the element, by word search.
      auto lines = text::split_lines(e.text);
      std::regex word("\\b" + name + "\\b");
      int line = 0, col = 0;
      for (size_t i = 0; i < lines.size() && !line; ++i) {
        std::string l(lines[i]);
        std::smatch m;
        if (std::regex_search(l, m, word)) {
          line = e.lines.start + static_cast<int>(i);
          col = static_cast<int>(m.position(0)) + 1;
        }
      }
      REQUIRE(line > 0);
      auto r = resolve({{QueryKind::Definition, name, e.file, line, col}}, index);
      CAPTURE(name);
      REQUIRE(r.outcomes[0].locations.size() == 1);
      CHECK(r.outcomes[0].locations[0].file == e.file);
      CHECK(r.outcomes[0].locations[0].lines == e.lines);
      ++checked;
    }
  }
  CHECK(checked >= 50);
}

TEST_CASE("language server client agrees with the fallback index") {
  fs::path root = corpus_dir("offbyone");
  for (const char* mode : {"--quiet", "--noisy"}) {
    CAPTURE(mode);
    LspBackend lsp({VULNRES_FAKE_LSP, mode});
    lsp.init(root);
    FallbackIndex index;
    index.init(root);
    auto q = plan_queries(root, block("src/main.c", kCallSearch,
                                      "    if (FIND_DEFINITION(copy_name)(&FIND_REFERENCES(nb), line) != 0) {\n"));
    auto a = resolve(q, lsp);
    auto b = resolve(q, index);
    REQUIRE(a.outcomes.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
      CHECK(a.outcomes[i].outcome == Outcome::Locations);
      CHECK(a.outcomes[i].locations == b.outcomes[i].locations);
    }
    CHECK(a.backend.rfind("lsp:", 0) == 0);
    lsp.shutdown();
  }
}

TEST_CASE("backend selection falls back when the server fails") {
  fs::path root = corpus_dir("offbyone");
  SymbolBackendConfig config;
  config.lsp_command = {VULNRES_FAKE_LSP, "--crash"};
  auto backend = open_symbol_backend(root, config);
  CHECK(backend->name() == "fallback-index");

  config.fallback_on_failure = false;
  CHECK(error_code_of([&] { open_symbol_backend(root, config); }) == ErrorCode::BackendUnavailable);

  config.lsp_command = {VULNRES_FAKE_LSP};
  CHECK(open_symbol_backend(root, config)->name().rfind("lsp:", 0) == 0);

  CHECK(open_symbol_backend(root, {})->name() == "fallback-index");
}

TEST_CASE("resolve_code_symbol renders one entry per query") {
  fs::path root = corpus_dir("njs_mini");
  FallbackIndex index;
  index.init(root);
  std::string out = resolve_code_symbol(root, index, kFigureQuery);
  CHECK(out.find("[1] FIND_REFERENCES(index) at njs/src/njs_vmcode.c:") != std::string::npos);
  CHECK(out.find("[2]") == std::string::npos);
}
