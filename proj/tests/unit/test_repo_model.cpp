#include <doctest.h>

#include <set>
#include <thread>
#include <tuple>

#include "test_support.hpp"
#include "vulnres/error.hpp"
#include "vulnres/repo_model.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;
using namespace vulnres;
using vulnres::testing::corpus_dir;
using vulnres::testing::TempDir;

namespace {

const std::vector<std::string> kCorpora{"offbyone", "njs_mini", "cpp_mini"};

// Independent scan: first line starting with `prefix` and the next line that is exactly `closer`.
LineRange scan_range(const fs::path& file, const std::string& prefix, const std::string& closer) {
  auto content = text::read_file(file);
  auto lines = text::split_lines(content);
  int start = 0;
  for (size_t i = 0; i < lines.size(); ++i) {
    std::string l(text::trim_right(lines[i]));
    if (!start && l.rfind(prefix, 0) == 0) start = static_cast<int>(i) + 1;
    if (start && l == closer) return {start, static_cast<int>(i) + 1};
  }
  return {0, 0};
}

using Signature = std::tuple<std::string, std::string, ElementKind>;

std::set<Signature> signatures(const std::vector<CodeElement>& elements) {
  std::set<Signature> out;
  for (const auto& e : elements) out.emplace(e.name, e.qualifier, e.kind);
  return out;
}

}  // namespace

TEST_CASE("element kinds") {
  CHECK(kElementKindCount == 7);
  for (auto k : {ElementKind::Class, ElementKind::Struct, ElementKind::Union, ElementKind::Enum,
                 ElementKind::Function, ElementKind::Macro, ElementKind::GlobalVariable}) {
    CHECK(parse_element_kind(to_string(k)) == k);
  }
  CHECK_FALSE(parse_element_kind("Namespace").has_value());
}

TEST_CASE("buf.c yields one function and one global at scanned lines") {
  fs::path root = corpus_dir("offbyone");
  auto elements = parse_elements(root, "src/buf.c");
  REQUIRE(elements.size() == 2);

  LineRange global = scan_range(root / "src/buf.c", "size_t g_count", "size_t g_count = 0;");
  LineRange func = scan_range(root / "src/buf.c", "int copy_name(", "}");
  REQUIRE(global.start > 0);
  REQUIRE(func.start > 0);

  CHECK(elements[0].name == "g_count");
  CHECK(elements[0].kind == ElementKind::GlobalVariable);
  CHECK(elements[0].lines == global);
  CHECK(elements[1].name == "copy_name");
  CHECK(elements[1].kind == ElementKind::Function);
  CHECK(elements[1].lines == func);
}

TEST_CASE("empty file yields nothing") {
  CHECK(parse_source("", "empty.c").empty());
  CHECK(parse_source("\n\n  \n", "blank.c").empty());
}

TEST_CASE("njs_property_next_s is one Struct") {
  auto elements = parse_elements(corpus_dir("njs_mini"), "njs/src/njs_vmcode.c");
  int hits = 0;
  for (const auto& e : elements) {
    if (e.name != "njs_property_next_s") continue;
    ++hits;
    CHECK(e.kind == ElementKind::Struct);
    CHECK(e.text.find("uint32_t    index;") != std::string::npos);
    CHECK(e.text.find("njs_array_t *array;") != std::string::npos);
  }
  CHECK(hits == 1);
}

TEST_CASE("class members carry their qualifier") {
  auto elements = parse_elements(corpus_dir("cpp_mini"), "include/io/file.hpp");
  auto sigs = signatures(elements);
  CHECK(sigs.count({"File", "io", ElementKind::Class}));
  CHECK(sigs.count({"size", "io::File", ElementKind::Function}));
  CHECK(sigs.count({"Stat", "io::File", ElementKind::Struct}));
  CHECK(sigs.count({"OpenMode", "io", ElementKind::Enum}));
  CHECK(sigs.count({"WordView", "io", ElementKind::Union}));

  auto impl = parse_elements(corpus_dir("cpp_mini"), "src/file.cpp");
  bool found_open = false;
  for (const auto& e : impl) {
    if (e.name == "open" && e.kind == ElementKind::Function) {
      found_open = true;
      CHECK(e.qualified_name() == "io::File::open");
    }
  }
  CHECK(found_open);
}

TEST_CASE("macros of both forms are elements") {
  auto elements = parse_source("#define A 1\n#define SQ(x) ((x) * (x))\n#define LONG(a) \\\n  (a + 1)\n", "m.h");
  REQUIRE(elements.size() == 3);
  for (const auto& e : elements) CHECK(e.kind == ElementKind::Macro);
  CHECK(elements[2].name == "LONG");
  CHECK(elements[2].lines == LineRange{3, 4});
}

TEST_CASE("parse_elements errors") {
  CHECK_THROWS_AS(parse_elements(corpus_dir("offbyone"), "src/nope.c"), Error);
  try {
    parse_elements(corpus_dir("offbyone"), "src/nope.c");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FileNotFound);
  }
}

TEST_CASE("element text equals the file slice for the whole corpus") {
  int checked = 0;
  for (const auto& corpus : kCorpora) {
    fs::path root = corpus_dir(corpus);
    for (const auto& file : list_source_files(root)) {
      std::string content = text::read_file(root / file);
      for (const auto& e : parse_elements(root, file)) {
        CHECK(e.lines.start <= e.lines.end);
        CHECK(e.file == file);
        CHECK(e.text == text::slice_lines(content, e.lines.start, e.lines.end));
        ++checked;
      }
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("skeleton keeps the element signature set") {
  for (const auto& corpus : kCorpora) {
    fs::path root = corpus_dir(corpus);
    for (const auto& file : list_source_files(root)) {
      CAPTURE(file);
      std::string original = text::read_file(root / file);
      auto skel = skeletonize(root, file);
      CHECK(skel.file == file);
      CHECK(skel.text.size() <= original.size());
      CHECK(signatures(parse_source(skel.text, file)) == signatures(parse_source(original, file)));
    }
  }
}

TEST_CASE("skeleton of buf.c") {
  fs::path root = corpus_dir("offbyone");
  auto skel = skeletonize(root, "src/buf.c");
  CHECK(skel.text.size() < text::read_file(root / "src/buf.c").size());
  CHECK(skel.text.find("{ ... }") != std::string::npos);
  CHECK(skel.text.find("int copy_name(") != std::string::npos);
  CHECK(skel.text.find("nb->data[i]") == std::string::npos);
}

TEST_CASE("skeleton of a long body and of a file with no functions") {
  std::string body;
  for (int i = 0; i < 40; ++i) body += "  x += " + std::to_string(i) + ";\n";
  std::string src = "static int x;\nint f(int a)\n{\n" + body + "  return a;\n}\n";
  std::string skel = skeletonize_source(src);
  CHECK(skel.find("int f(int a)") != std::string::npos);
  CHECK(skel.find("{ ... }") != std::string::npos);
  CHECK(signatures(parse_source(skel, "f.c")) == signatures(parse_source(src, "f.c")));

  std::string decls = "#define N 4\nstruct s { int a; };\nextern int g;\n";
  CHECK(skeletonize_source(decls) == decls);
}

TEST_CASE("repo tree lists only source files") {
  fs::path root = corpus_dir("offbyone");
  RepoOptions opts;
  opts.extensions = {".c", ".h"};
  auto view = render_repo_tree(root, opts);
  CHECK(view.text.find("buf.c") != std::string::npos);
  CHECK(view.text.find("buf.h") != std::string::npos);
  CHECK(view.text.find("README.md") == std::string::npos);
  CHECK(view.text.find("build.sh") == std::string::npos);
  CHECK(view.text == render_repo_tree(root, opts).text);
  CHECK(view.text.rfind("offbyone/\n", 0) == 0);
}

TEST_CASE("repo tree equals a directory walk") {
  for (const auto& corpus : kCorpora) {
    fs::path root = corpus_dir(corpus);
    RepoOptions opts;
    std::set<std::string> oracle;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (entry.is_regular_file() && opts.is_source(entry.path())) {
        oracle.insert(entry.path().filename().string());
      }
    }
    // Leaf names in the rendering, recovered from its indentation structure.
    std::set<std::string> listed;
    auto view = render_repo_tree(root, opts);
    for (auto line : text::split_lines(view.text)) {
      std::string_view l = text::trim(line);
      if (!l.empty() && l.back() != '/') listed.insert(std::string(l));
    }
    CHECK(listed == oracle);
  }
}

TEST_CASE("repo tree of an empty directory") {
  TempDir dir;
  fs::create_directory(dir / "empty");
  CHECK(render_repo_tree(dir / "empty").text == "empty/\n");
  CHECK_THROWS_AS(render_repo_tree(dir / "missing"), Error);
}

TEST_CASE("snapshot is content-only") {
  TempDir dir;
  fs::path root = vulnres::testing::copy_corpus(dir, "offbyone");
  auto before = snapshot(root);
  CHECK(before == snapshot(root));
  CHECK(before == snapshot_serial(root));

  fs::last_write_time(root / "src/buf.c", fs::file_time_type::clock::now() + std::chrono::hours(1));
  CHECK(snapshot(root) == before);

  text::write_file(root / "src/buf.c", text::read_file(root / "src/buf.c") + " ");
  auto after = snapshot(root);
  CHECK_FALSE(after == before);
  CHECK(after == snapshot_serial(root));

  CHECK_THROWS_AS(snapshot(dir / "missing"), Error);
}

TEST_CASE("snapshot ignores build outputs") {
  TempDir dir;
  fs::path root = vulnres::testing::copy_corpus(dir, "offbyone");
  auto before = snapshot(root);
  text::write_file(root / "build/poc.o", "object");
  text::write_file(root / ".vulnres/prelude.h", "x");
  CHECK(snapshot(root) == before);
}
