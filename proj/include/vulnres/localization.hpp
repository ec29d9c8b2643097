#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vulnres/llm.hpp"
#include "vulnres/repo_model.hpp"

namespace vulnres {

struct EmbeddingBatch {
  std::vector<std::vector<float>> vectors;
  std::int64_t tokens = 0;  // as billed by the provider
};

// Batched text embedding. Failures throw Error(EmbedderError).
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingBatch embed(const std::vector<std::string>& texts) = 0;
  virtual std::string model() const = 0;
};

// Feature-hashed bag of identifier tokens and their '_'-separated parts.
// Deterministic and offline.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(size_t dimension = 256);
  EmbeddingBatch embed(const std::vector<std::string>& texts) override;  // OpenMP over texts
  EmbeddingBatch embed_serial(const std::vector<std::string>& texts) const;
  std::vector<float> embed_one(std::string_view text) const;
  std::string model() const override { return "hashing-" + std::to_string(dimension_); }
  size_t dimension() const { return dimension_; }

 private:
  size_t dimension_;
};

double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b);

struct Chunk {
  std::string file;
  size_t index = 0;
  std::string text;
  LineRange lines;
};

// Consecutive non-overlapping runs of `chunk_lines` lines; ceil(L / chunk_lines)
// chunks whose concatenation is the content.
std::vector<Chunk> chunk_content(const std::string& file, std::string_view content, size_t chunk_lines);

// Cosine of the query against each chunk vector.
std::vector<double> score_chunks(const std::vector<float>& query, const std::vector<std::vector<float>>& chunks);
std::vector<double> score_chunks_serial(const std::vector<float>& query,
                                        const std::vector<std::vector<float>>& chunks);

struct ScoredFile {
  std::string file;
  double score = 0.0;
};

// Files ordered by their best chunk score, descending; ties by path.
std::vector<ScoredFile> rank_files(const std::vector<Chunk>& chunks, const std::vector<double>& scores);

struct FileLocalization {
  std::vector<std::string> files;
  std::vector<std::string> dropped;  // model output naming no existing file
  std::string raw_response;
};

// Asks the model for the top `n` files (caller tag "loc.files").
FileLocalization localize_files_prompt(const std::string& report, const std::string& repo_tree,
                                       const std::filesystem::path& root, LlmBackend& llm, size_t n);

struct RetrievalOptions {
  size_t chunk_lines = 512;
  RepoOptions repo;
};

struct RetrievalLocalization {
  std::vector<std::string> ignored_folders;
  size_t chunk_count = 0;
  std::vector<ScoredFile> ranking;  // every candidate file
  std::vector<std::string> files;   // top n
};

// Source files under `root` outside the ignored folders, chunked in path order.
std::vector<Chunk> collect_chunks(const std::filesystem::path& root, const std::vector<std::string>& ignored_folders,
                                  const RetrievalOptions& options);

// Model-named ignore folders (caller tag "loc.ignore"), then embedding
// retrieval over the remaining files.
RetrievalLocalization localize_files_retrieval(const std::string& report, const std::string& repo_tree,
                                               const std::filesystem::path& root, LlmBackend& llm,
                                               Embedder& embedder, size_t n, const RetrievalOptions& options = {});

// Prompt-ranked files first, then retrieval-only ones; first occurrence wins.
std::vector<std::string> merge_file_lists(const std::vector<std::string>& prompt_files,
                                          const std::vector<std::string>& retrieval_files);

struct ElementRef {
  std::string file;
  std::string identifier;  // name or Scope::name
  friend bool operator==(const ElementRef&, const ElementRef&) = default;
};

// Elements of ref.file named by the id: the plain name, the full qualified
// name, or a trailing part of it ("File::open" for io::File::open).
std::vector<CodeElement> resolve_element(const std::filesystem::path& root, const ElementRef& ref);

struct ElementLocalization {
  std::vector<ElementRef> refs;
  std::vector<ElementRef> dropped;
  bool reasked = false;
  bool flagged = false;  // empty or unparseable model answer
  std::string raw_response;
};

// Skeleton-based element localization (caller tag "loc.elements").
ElementLocalization localize_elements(const std::vector<std::string>& files, const std::string& report,
                                      const std::filesystem::path& root, LlmBackend& llm);

// Lines of the first ``` block, or of the whole text when there is none.
std::vector<std::string> fenced_lines(std::string_view text);

}  // namespace vulnres
