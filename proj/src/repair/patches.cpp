#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "vulnres/agents.hpp"
#include "vulnres/error.hpp"
#include "vulnres/lexer.hpp"
#include "vulnres/repair.hpp"
#include "vulnres/util/hash.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;

namespace vulnres {

std::vector<PatchCandidate> generate_patches(const std::string& report, const PatchContext& context,
                                             LlmBackend& llm, size_t count) {
  if (count == 0) throw Error(ErrorCode::InvalidConfig, "at least one patch candidate is required");
  const std::string prompt =
      fill_template(prompt_section("repair", "generation"), {{"report", report}, {"context", context.render()}});
  std::vector<PatchCandidate> out;
  for (size_t i = 0; i < count; ++i) {
    ChatRequest request;
    request.caller = "generation";
    request.temperature = i == 0 ? 0.0 : 1.0;
    request.messages.push_back(ChatMessage::system(prompt_section("common", "system")));
    request.messages.push_back(ChatMessage::user(prompt));
    ChatResponse response = complete_with_retry(llm, request, 2);

    PatchCandidate c;
    c.index = i;
    c.temperature = request.temperature;
    c.raw_response = response.content;
    try {
      c.edits = parse_edit_blocks(response.content);
      if (c.edits.empty()) {
        c.parse_failed = true;
        c.error = "no SEARCH/REPLACE blocks";
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MalformedBlock) throw;
      c.parse_failed = true;
      c.error = e.what();
    }
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

std::string directive_text(std::string_view raw) {
  std::string body(raw);
  body = text::replace_all(std::move(body), "\\\r\n", " ");
  body = text::replace_all(std::move(body), "\\\n", " ");
  auto hash = body.find('#');
  body = hash == std::string::npos ? body : body.substr(hash + 1);
  std::string out = "#";
  bool first = true;
  for (const auto& t : lex::tokenize(body)) {
    if (!first) out += ' ';
    out += t.text;
    first = false;
  }
  return out;
}

}  // namespace

std::string normalize_source(std::string_view content) {
  std::string out;
  int depth = 0;
  int parens = 0;
  bool line_start = true;
  auto newline = [&] {
    if (!line_start) out += '\n';
    line_start = true;
  };
  auto emit = [&](std::string_view s) {
    if (line_start) out.append(static_cast<size_t>(std::max(depth, 0)) * 2, ' ');
    else out += ' ';
    out += s;
    line_start = false;
  };
  for (const auto& t : lex::tokenize(content)) {
    if (t.kind == lex::TokKind::Directive) {
      newline();
      out += directive_text(t.text);
      line_start = false;
      newline();
      continue;
    }
    if (t.punct("(") || t.punct("[")) ++parens;
    if (t.punct(")") || t.punct("]")) parens = std::max(0, parens - 1);
    if (t.punct("}")) {
      --depth;
      newline();
      emit(t.text);
      newline();
      continue;
    }
    emit(t.text);
    if (t.punct("{")) {
      ++depth;
      newline();
    } else if (t.punct(";") && parens == 0) {
      newline();
    }
  }
  newline();
  if (depth != 0) throw Error(ErrorCode::ParseFailure, "unbalanced braces");
  return out;
}

std::string collapse_whitespace(std::string_view content) {
  std::string stripped(content);
  auto comments = lex::find_comments(content);
  for (auto it = comments.rbegin(); it != comments.rend(); ++it)
    stripped.replace(it->begin, it->end - it->begin, " ");
  std::string out;
  bool blank = false;
  for (char c : stripped) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      blank = true;
      continue;
    }
    if (blank && !out.empty()) out += ' ';
    blank = false;
    out += c;
  }
  return out;
}

void normalize_and_fingerprint(PatchCandidate& candidate, const fs::path& base_root) {
  candidate.applied = false;
  candidate.fingerprint.reset();
  candidate.diff.reset();
  candidate.normalizer_fallback = false;
  if (candidate.edits.empty()) return;

  std::map<std::string, std::string> before;
  for (const auto& e : candidate.edits) {
    std::error_code ec;
    if (!before.count(e.file) && fs::is_regular_file(base_root / e.file, ec))
      before[e.file] = text::read_file(base_root / e.file);
  }
  std::map<std::string, std::string> after;
  try {
    after = apply_edits_to_contents(before, candidate.edits);
  } catch (const Error& e) {
    candidate.error = e.what();
    return;
  }

  Sha256 digest;
  std::string diff;
  for (const auto& [path, new_text] : after) {
    const std::string& old_text = before.at(path);
    if (new_text == old_text) continue;
    diff += unified_diff_file(path, old_text, new_text);
    std::string normalized;
    try {
      normalized = normalize_source(new_text);
    } catch (const Error&) {
      normalized = collapse_whitespace(new_text);
      candidate.normalizer_fallback = true;
    }
    digest.update_framed(path).update_framed(normalized);
  }
  if (diff.empty()) {
    candidate.error = "edits change nothing";
    return;
  }
  candidate.applied = true;
  candidate.diff = std::move(diff);
  candidate.fingerprint = digest.hex_digest();
}

void validate_candidate(PatchCandidate& candidate, EditHistory& history, PocToolkit& poc) {
  candidate.poc_pass = false;
  candidate.poc_phase.reset();
  if (candidate.edits.empty()) return;
  const std::string name = fmt::format("candidate-{}", candidate.index);
  try {
    history.apply_edits(name, candidate.edits);
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::SearchTextNotFound:
      case ErrorCode::SearchTextAmbiguous:
      case ErrorCode::FileNotFound:
      case ErrorCode::NoChanges:
        candidate.applied = false;
        if (candidate.error.empty()) candidate.error = e.what();
        return;
      default:
        throw;
    }
  }
  try {
    PoCRunResult run = poc.run_poc(name);
    candidate.poc_phase = run.phase;
    candidate.poc_pass = run.phase == PocPhase::Ran && !run.sanitizer_triggered && !run.timed_out;
  } catch (...) {
    history.rollback_latest();
    throw;
  }
  history.rollback_latest();
}

std::string_view to_string(SelectionStrategy strategy) {
  return strategy == SelectionStrategy::PocVoting ? "poc_voting" : "simple_voting";
}

std::optional<SelectionStrategy> parse_selection_strategy(std::string_view name) {
  if (name == "poc_voting") return SelectionStrategy::PocVoting;
  if (name == "simple_voting") return SelectionStrategy::SimpleVoting;
  return std::nullopt;
}

Selection select_patch(const std::vector<PatchCandidate>& candidates, SelectionStrategy strategy) {
  struct Group {
    size_t size = 0;
    size_t first = 0;  // lowest candidate index
  };
  std::map<std::string, Group> groups;
  Selection out;
  for (const auto& c : candidates) {
    if (!c.fingerprint) continue;
    if (strategy == SelectionStrategy::PocVoting && c.poc_pass != true) continue;
    ++out.eligible;
    auto [it, inserted] = groups.try_emplace(*c.fingerprint, Group{0, c.index});
    ++it->second.size;
    it->second.first = std::min(it->second.first, c.index);
  }
  const Group* best = nullptr;
  for (const auto& [_, g] : groups)
    if (!best || g.size > best->size || (g.size == best->size && g.first < best->first)) best = &g;
  if (!best) return out;
  out.chosen = best->first;
  out.group_size = best->size;
  for (const auto& c : candidates)
    if (c.index == best->first && c.diff) out.diff = *c.diff;
  return out;
}

}  // namespace vulnres
