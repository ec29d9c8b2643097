#include <algorithm>
#include <regex>

#include <fmt/format.h>

#include "vulnres/agents.hpp"
#include "vulnres/error.hpp"
#include "vulnres/util/text.hpp"

namespace vulnres {

namespace {

struct RawItem {
  int number = 0;
  std::map<std::string, std::vector<std::string>> fields;  // lower-case label -> lines
};

struct RawReport {
  std::vector<RawItem> items;
  std::vector<std::string> insights;
  bool has_insights = false;
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool is_fence(std::string_view line) { return text::trim(line).substr(0, 3) == "```"; }

// Splits free-form model output into numbered items of labelled fields plus
// an insights section. Lines inside ``` fences are never interpreted.
RawReport scan(std::string_view body, const std::vector<std::string>& labels) {
  std::string alternatives;
  for (const auto& l : labels) alternatives += (alternatives.empty() ? "" : "|") + l;
  const std::regex label_re("^\\s*(?:[-*]\\s+)?\\**\\s*(" + alternatives + ")\\s*\\**\\s*:\\s*\\**\\s*(.*)$",
                            std::regex::icase);
  const std::regex item_re(R"(^\s*(\d+)[.)]\s*(.*)$)");
  const std::regex heading_re(R"(^\s*#{1,6}\s+(.*)$)");

  RawReport out;
  bool in_insights = false;
  bool in_fence = false;
  RawItem* item = nullptr;
  std::vector<std::string>* field = nullptr;

  auto complete = [&](const RawItem& it) {
    for (const auto& l : labels)
      if (!it.fields.count(lower(l))) return false;
    return true;
  };

  for (auto line_view : text::split_lines(body)) {
    std::string line(line_view);
    if (in_fence) {
      if (in_insights) out.insights.push_back(line);
      else if (field) field->push_back(line);
      if (is_fence(line)) in_fence = false;
      continue;
    }
    std::smatch m;
    if (std::regex_match(line, m, heading_re)) {
      in_insights = lower(m[1].str()).find("insight") != std::string::npos;
      out.has_insights = out.has_insights || in_insights;
      field = nullptr;
      continue;
    }
    if (in_insights) {
      out.insights.push_back(line);
      if (is_fence(line)) in_fence = true;
      continue;
    }
    std::string rest = line;
    if (std::regex_match(line, m, item_re)) {
      std::string after = m[2].str();
      std::smatch lm;
      bool labelled = std::regex_match(after, lm, label_re);
      if (!item || labelled || after.empty() || complete(*item)) {
        out.items.push_back(RawItem{std::stoi(m[1].str()), {}});
        item = &out.items.back();
        field = nullptr;
        rest = after;
        if (!labelled) continue;  // a title line
      }
    }
    if (std::regex_match(rest, m, label_re) && item) {
      field = &item->fields[lower(m[1].str())];
      field->clear();
      std::string first = m[2].str();
      if (!first.empty()) field->push_back(first);
      if (is_fence(first)) in_fence = true;
      continue;
    }
    if (field) {
      field->push_back(line);
      if (is_fence(line)) in_fence = true;
    }
  }
  return out;
}

// Trimmed lines, leading and trailing blank lines dropped.
std::string prose(const std::vector<std::string>& lines) {
  std::vector<std::string> kept;
  for (const auto& l : lines) kept.emplace_back(text::trim(l));
  while (!kept.empty() && kept.back().empty()) kept.pop_back();
  size_t first = 0;
  while (first < kept.size() && kept[first].empty()) ++first;
  std::string out;
  for (size_t i = first; i < kept.size(); ++i) out += (i > first ? "\n" : "") + kept[i];
  return out;
}

// Body of a fenced block with the fence's own indentation removed; plain
// prose when there is no fence.
std::string code_body(const std::vector<std::string>& lines) {
  size_t open = 0;
  while (open < lines.size() && text::trim(lines[open]).empty()) ++open;
  if (open == lines.size() || !is_fence(lines[open])) return prose(lines);
  const size_t indent = lines[open].find_first_not_of(" \t");
  std::string out;
  for (size_t i = open + 1; i < lines.size(); ++i) {
    if (is_fence(lines[i])) break;
    std::string_view l = lines[i];
    size_t strip = 0;
    while (strip < indent && strip < l.size() && (l[strip] == ' ' || l[strip] == '\t')) ++strip;
    out += std::string(l.substr(strip)) + "\n";
  }
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

std::string field_text(const RawItem& item, const std::string& label, bool code = false) {
  auto it = item.fields.find(label);
  if (it == item.fields.end()) return {};
  return code ? code_body(it->second) : prose(it->second);
}

[[noreturn]] void missing(size_t index, std::string_view what) {
  throw Error(ErrorCode::ReportParseFailure, fmt::format("item {}: missing or invalid {}", index + 1, what));
}

std::optional<SourceRef> parse_source_ref(const std::string& s) {
  static const std::regex colon_form(
      R"(^`?([^\s`:,]+):(\d+)(?:\s*-\s*(\d+))?`?(?:\s*(?:,|\bin\b|\()\s*(?:function\s+)?`?([A-Za-z_~][\w:~]*)`?\)?)?.*$)");
  static const std::regex comma_form(
      R"(^`?([^\s`:,]+)`?,\s*(?:`?([A-Za-z_~][\w:~]*)`?,\s*)?lines?\s+(\d+)(?:\s*-\s*(\d+))?.*$)",
      std::regex::icase);
  std::smatch m;
  SourceRef ref;
  if (std::regex_match(s, m, colon_form)) {
    ref.file = m[1].str();
    ref.lines.start = std::stoi(m[2].str());
    ref.lines.end = m[3].matched ? std::stoi(m[3].str()) : ref.lines.start;
    ref.element = m[4].matched ? m[4].str() : "";
  } else if (std::regex_match(s, m, comma_form)) {
    ref.file = m[1].str();
    ref.element = m[2].matched ? m[2].str() : "";
    ref.lines.start = std::stoi(m[3].str());
    ref.lines.end = m[4].matched ? std::stoi(m[4].str()) : ref.lines.start;
  } else {
    return std::nullopt;
  }
  if (ref.lines.end < ref.lines.start) return std::nullopt;
  return ref;
}

std::string indent_continuation(const std::string& s) { return text::replace_all(s, "\n", "\n   "); }

std::string fenced(const std::string& code) { return "```c\n" + code + "\n```\n"; }

void require_insights(const RawReport& raw, const std::string& insights) {
  if (!raw.has_insights) throw Error(ErrorCode::ReportParseFailure, "missing Insights section");
  if (insights.empty()) throw Error(ErrorCode::ReportParseFailure, "empty Insights section");
}

}  // namespace

std::optional<int> trace_frame(std::string_view trace_link) {
  static const std::regex frame_re(R"(frame\s*#?\s*(\d+)|#(\d+))", std::regex::icase);
  std::string s(trace_link);
  if (lower(s).find("not in trace") != std::string::npos) return std::nullopt;
  std::smatch m;
  if (!std::regex_search(s, m, frame_re)) return std::nullopt;
  return std::stoi(m[1].matched ? m[1].str() : m[2].str());
}

ContextAnalysisReport parse_context_report(std::string_view text) {
  RawReport raw = scan(text, {"Code", "Source", "Trace link", "Rationale"});
  ContextAnalysisReport report;
  for (size_t i = 0; i < raw.items.size(); ++i) {
    const RawItem& it = raw.items[i];
    ContextItem item;
    item.code = field_text(it, "code", true);
    if (item.code.empty()) missing(i, "Code");
    auto src = parse_source_ref(field_text(it, "source"));
    if (!src) missing(i, "Source (expected <path>:<first>-<last>)");
    item.source = *src;
    item.trace_link = field_text(it, "trace link");
    if (item.trace_link.empty()) missing(i, "Trace link");
    item.rationale = field_text(it, "rationale");
    if (item.rationale.empty()) missing(i, "Rationale");
    report.items.push_back(std::move(item));
  }
  if (report.items.empty()) throw Error(ErrorCode::ReportParseFailure, "no context items");
  report.insights = prose(raw.insights);
  require_insights(raw, report.insights);
  return report;
}

std::string render_context_report(const ContextAnalysisReport& report) {
  std::string out = "### Context Items\n\n";
  for (size_t i = 0; i < report.items.size(); ++i) {
    const auto& item = report.items[i];
    const auto& src = item.source;
    out += fmt::format("{}. Code:\n{}", i + 1, fenced(item.code));
    out += fmt::format("   Source: {}:{}-{}{}\n", src.file, src.lines.start, src.lines.end,
                       src.element.empty() ? "" : " in " + src.element);
    out += fmt::format("   Trace link: {}\n", indent_continuation(item.trace_link));
    out += fmt::format("   Rationale: {}\n\n", indent_continuation(item.rationale));
  }
  out += "### Insights\n" + report.insights + "\n";
  return out;
}

std::string_view to_string(PropertyResult result) { return result == PropertyResult::Pass ? "PASS" : "FAIL"; }

PropertyAnalysisReport parse_property_report(std::string_view text) {
  static const std::regex location_re(R"(^`?([^\s`:,]+):(\d+)\b.*$)");
  static const std::regex result_re(R"(^\**`?(PASS|FAIL)\b.*$)", std::regex::icase);
  RawReport raw = scan(text, {"Assertion", "Location", "Purpose", "Result", "Interpretation"});
  PropertyAnalysisReport report;
  for (size_t i = 0; i < raw.items.size(); ++i) {
    const RawItem& it = raw.items[i];
    SafetyProperty p;
    p.assertion = field_text(it, "assertion", true);
    if (p.assertion.empty()) missing(i, "Assertion");
    std::smatch m;
    std::string location = field_text(it, "location");
    if (!std::regex_match(location, m, location_re)) missing(i, "Location (expected <path>:<line>)");
    p.file = m[1].str();
    p.line = std::stoi(m[2].str());
    p.purpose = field_text(it, "purpose");
    if (p.purpose.empty()) missing(i, "Purpose");
    std::string result = field_text(it, "result");
    if (!std::regex_match(result, m, result_re)) missing(i, "Result (expected PASS or FAIL)");
    p.result = lower(m[1].str()) == "pass" ? PropertyResult::Pass : PropertyResult::Fail;
    p.interpretation = field_text(it, "interpretation");
    if (p.interpretation.empty()) missing(i, "Interpretation");
    report.properties.push_back(std::move(p));
  }
  report.insights = prose(raw.insights);
  require_insights(raw, report.insights);
  if (report.properties.empty() && lower(report.insights).find("no stable property") == std::string::npos)
    throw Error(ErrorCode::ReportParseFailure, "no properties listed and no \"no stable property found\" insight");
  return report;
}

std::string render_property_report(const PropertyAnalysisReport& report) {
  std::string out = "### Safety Properties\n\n";
  for (size_t i = 0; i < report.properties.size(); ++i) {
    const auto& p = report.properties[i];
    out += fmt::format("{}. Assertion:\n{}", i + 1, fenced(p.assertion));
    out += fmt::format("   Location: {}:{}\n", p.file, p.line);
    out += fmt::format("   Purpose: {}\n", indent_continuation(p.purpose));
    out += fmt::format("   Result: {}\n", to_string(p.result));
    out += fmt::format("   Interpretation: {}\n\n", indent_continuation(p.interpretation));
  }
  out += "### Insights\n" + report.insights + "\n";
  return out;
}

}  // namespace vulnres
