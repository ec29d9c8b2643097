#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vulnres/repo_model.hpp"

namespace vulnres {

enum class QueryKind { Definition, References };

std::string_view to_string(QueryKind kind);

struct MarkerQuery {
  QueryKind kind = QueryKind::Definition;
  std::string symbol;
  std::string file;
  int line = 1;    // 1-based, in the unedited file
  int column = 1;  // 1-based byte column
  friend bool operator==(const MarkerQuery&, const MarkerQuery&) = default;
};

struct SymbolLocation {
  std::string file;
  LineRange lines;
  std::string preview;  // file slice over `lines`
  friend bool operator==(const SymbolLocation&, const SymbolLocation&) = default;
};

enum class Outcome { Locations, NotFound, BackendError };

struct QueryOutcome {
  MarkerQuery query;
  Outcome outcome = Outcome::NotFound;
  std::vector<SymbolLocation> locations;
  bool truncated = false;
  std::string reason;  // set for BackendError
};

struct ResolutionResult {
  std::string backend;
  bool references_include_declaration = true;
  std::vector<QueryOutcome> outcomes;
};

// Locates every FIND_DEFINITION(x) / FIND_REFERENCES(x) wrapper of the
// REPLACE sections in the original files under root. Never writes.
std::vector<MarkerQuery> plan_queries(const std::filesystem::path& root, std::string_view edit_blocks);

class SymbolBackend {
 public:
  virtual ~SymbolBackend() = default;
  virtual void init(const std::filesystem::path& root) = 0;
  virtual std::vector<SymbolLocation> definition(const std::string& file, int line, int column) = 0;
  virtual std::vector<SymbolLocation> references(const std::string& file, int line, int column) = 0;
  virtual void shutdown() = 0;
  virtual std::string name() const = 0;
  virtual bool references_include_declaration() const = 0;
};

// In-process index: definitions from parse_elements, references from an
// identifier token scan. Definition queries on a definition site return
// that site.
class FallbackIndex final : public SymbolBackend {
 public:
  explicit FallbackIndex(RepoOptions options = {}) : options_(std::move(options)) {}

  void init(const std::filesystem::path& root) override;
  std::vector<SymbolLocation> definition(const std::string& file, int line, int column) override;
  std::vector<SymbolLocation> references(const std::string& file, int line, int column) override;
  void shutdown() override {}
  std::string name() const override { return "fallback-index"; }
  bool references_include_declaration() const override { return true; }

  // Identifier starting at (line, column), if any.
  std::optional<std::string> identifier_at(const std::string& file, int line, int column) const;

 private:
  struct Occurrence {
    std::string file;
    int line;
  };
  std::filesystem::path root_;
  RepoOptions options_;
  std::map<std::string, std::string> contents_;
  std::map<std::string, std::vector<CodeElement>> definitions_;
  std::map<std::string, std::vector<Occurrence>> occurrences_;
  // file -> (line, column) -> identifier
  std::map<std::string, std::map<std::pair<int, int>, std::string>> positions_;
};

// Language Server Protocol client over the stdio of `command`.
class LspBackend final : public SymbolBackend {
 public:
  explicit LspBackend(std::vector<std::string> command);
  ~LspBackend() override;

  void init(const std::filesystem::path& root) override;
  std::vector<SymbolLocation> definition(const std::string& file, int line, int column) override;
  std::vector<SymbolLocation> references(const std::string& file, int line, int column) override;
  void shutdown() override;
  std::string name() const override;
  bool references_include_declaration() const override { return true; }

 private:
  struct Session;
  std::vector<std::string> command_;
  std::unique_ptr<Session> session_;
};

struct SymbolBackendConfig {
  std::vector<std::string> lsp_command;  // empty: fallback index only
  bool fallback_on_failure = true;
};

// LSP backend when configured and it initializes, else the fallback index.
// Throws BackendUnavailable if the server fails and fallback is off.
std::unique_ptr<SymbolBackend> open_symbol_backend(const std::filesystem::path& root,
                                                   const SymbolBackendConfig& config);

struct ResolveOptions {
  size_t reference_cap = 50;
};

ResolutionResult resolve(const std::vector<MarkerQuery>& queries, SymbolBackend& backend,
                         const ResolveOptions& options = {});

std::string render_resolution(const ResolutionResult& result);

// The agent-facing resolve_code_symbol tool: plan + resolve + render.
std::string resolve_code_symbol(const std::filesystem::path& root, SymbolBackend& backend,
                                std::string_view queries, const ResolveOptions& options = {});

}  // namespace vulnres
