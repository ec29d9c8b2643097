#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vulnres/edit_engine.hpp"
#include "vulnres/execution.hpp"
#include "vulnres/llm.hpp"
#include "vulnres/localization.hpp"

namespace vulnres {

// One contiguous slice of a file covering one or more localized elements
// plus their margins.
struct PatchWindow {
  std::string file;
  LineRange lines;
  std::vector<std::string> elements;  // qualified names, localization order
  std::vector<LineRange> element_lines;
  std::string text;
};

struct PatchContext {
  std::vector<PatchWindow> windows;

  std::string render() const;
};

// Throws ElementVanished when a ref no longer resolves.
PatchContext build_patch_context(const std::filesystem::path& root, const std::vector<ElementRef>& refs, int margin);

struct PatchCandidate {
  size_t index = 0;  // 0 is the greedy sample
  double temperature = 0.0;
  std::vector<SearchReplaceEdit> edits;
  std::string raw_response;
  bool parse_failed = false;
  std::string error;  // parse or apply failure

  bool applied = false;  // edits apply cleanly to the base tree
  std::optional<bool> poc_pass;
  std::optional<PocPhase> poc_phase;
  std::optional<std::string> fingerprint;
  bool normalizer_fallback = false;
  std::optional<std::string> diff;
};

// Candidate 0 at temperature 0, the rest at 1 (caller tag "generation").
std::vector<PatchCandidate> generate_patches(const std::string& report, const PatchContext& context,
                                             LlmBackend& llm, size_t count);

// Token-level canonical form: comments dropped, one space between tokens,
// line breaks after statements and braces, two-space brace indentation.
// Throws ParseFailure on input the lexer cannot make sense of.
std::string normalize_source(std::string_view content);
// Whitespace-collapsed form with comments removed; the fallback normalizer.
std::string collapse_whitespace(std::string_view content);

// Applies the edits in memory against `base_root` and fills applied, diff
// and fingerprint. The workspace is not touched.
void normalize_and_fingerprint(PatchCandidate& candidate, const std::filesystem::path& base_root);

// Applies the edits through the history, runs the PoC and rolls back.
// Candidates that do not apply get poc_pass = false without any run.
void validate_candidate(PatchCandidate& candidate, EditHistory& history, PocToolkit& poc);

enum class SelectionStrategy { PocVoting, SimpleVoting };
std::string_view to_string(SelectionStrategy strategy);
std::optional<SelectionStrategy> parse_selection_strategy(std::string_view name);

struct Selection {
  std::optional<size_t> chosen;  // candidate index; empty is NoPatch
  size_t group_size = 0;
  size_t eligible = 0;
  std::string diff;
};

Selection select_patch(const std::vector<PatchCandidate>& candidates, SelectionStrategy strategy);

}  // namespace vulnres
