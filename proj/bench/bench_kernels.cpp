// Serial reference vs OpenMP kernels: chunk embedding, chunk scoring and
// repository snapshot hashing.

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>
#include <fmt/format.h>
#include <unistd.h>

#include "vulnres/localization.hpp"
#include "vulnres/repo_model.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;
using namespace vulnres;

namespace {

std::string synthetic_line(std::mt19937& rng) {
  static const std::vector<std::string> words{"buf",  "len",   "copy_name", "cap",   "index", "njs_value",
                                              "next", "alloc", "free",      "check", "size",  "ptr"};
  std::string line = "    ";
  for (int i = 0, n = 3 + static_cast<int>(rng() % 6); i < n; ++i) line += words[rng() % words.size()] + " ";
  return line + ";\n";
}

// Synthetic sources, chunked the way retrieval chunks them.
const std::vector<std::string>& chunk_texts() {
  static const std::vector<std::string> texts = [] {
    std::mt19937 rng(1);
    std::vector<std::string> out;
    for (int c = 0; c < 512; ++c) {
      std::string text;
      for (int l = 0; l < 128; ++l) text += synthetic_line(rng);
      out.push_back(std::move(text));
    }
    return out;
  }();
  return texts;
}

// A generated source tree, removed at exit.
struct SyntheticRepo {
  fs::path root;
  SyntheticRepo() {
    root = fs::temp_directory_path() / fmt::format("vulnres-bench-{}", ::getpid());
    std::mt19937 rng(2);
    for (int f = 0; f < 400; ++f) {
      std::string content;
      for (int l = 0; l < 300; ++l) content += synthetic_line(rng);
      const fs::path file = root / fmt::format("dir{}", f % 20) / fmt::format("file{}.c", f);
      fs::create_directories(file.parent_path());
      text::write_file(file, content);
    }
  }
  ~SyntheticRepo() { fs::remove_all(root); }
};

const fs::path& repo_root() {
  static SyntheticRepo repo;
  return repo.root;
}

void BM_EmbedSerial(benchmark::State& state) {
  HashingEmbedder embedder;
  for (auto _ : state) benchmark::DoNotOptimize(embedder.embed_serial(chunk_texts()));
  state.SetItemsProcessed(state.iterations() * chunk_texts().size());
}

void BM_EmbedParallel(benchmark::State& state) {
  HashingEmbedder embedder;
  for (auto _ : state) benchmark::DoNotOptimize(embedder.embed(chunk_texts()));
  state.SetItemsProcessed(state.iterations() * chunk_texts().size());
}

std::vector<std::vector<float>> random_vectors(size_t count, size_t dimension) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> dist(-1, 1);
  std::vector<std::vector<float>> out(count, std::vector<float>(dimension));
  for (auto& v : out)
    for (auto& x : v) x = dist(rng);
  return out;
}

void BM_ScoreSerial(benchmark::State& state) {
  const auto chunks = random_vectors(static_cast<size_t>(state.range(0)), 1536);
  const auto query = random_vectors(1, 1536)[0];
  for (auto _ : state) benchmark::DoNotOptimize(score_chunks_serial(query, chunks));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScoreParallel(benchmark::State& state) {
  const auto chunks = random_vectors(static_cast<size_t>(state.range(0)), 1536);
  const auto query = random_vectors(1, 1536)[0];
  for (auto _ : state) benchmark::DoNotOptimize(score_chunks(query, chunks));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SnapshotSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(snapshot_serial(repo_root()));
}

void BM_SnapshotParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(snapshot(repo_root()));
}

}  // namespace

BENCHMARK(BM_EmbedSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EmbedParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreSerial)->Arg(1 << 12)->Arg(1 << 15)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ScoreParallel)->Arg(1 << 12)->Arg(1 << 15)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SnapshotSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SnapshotParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
