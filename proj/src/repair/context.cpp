#include <algorithm>

#include <fmt/format.h>

#include "vulnres/error.hpp"
#include "vulnres/repair.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;

namespace vulnres {

PatchContext build_patch_context(const fs::path& root, const std::vector<ElementRef>& refs, int margin) {
  margin = std::max(0, margin);
  PatchContext ctx;
  std::map<std::string, std::string> contents;
  for (const auto& ref : refs) {
    auto elements = resolve_element(root, ref);
    if (elements.empty())
      throw Error(ErrorCode::ElementVanished, fmt::format("{} no longer defines {}", ref.file, ref.identifier));
    if (!contents.count(ref.file)) contents[ref.file] = text::read_file(root / ref.file);
    const int eof = static_cast<int>(text::split_lines(contents[ref.file]).size());
    for (const auto& e : elements) {
      LineRange span{std::max(1, e.lines.start - margin), std::min(eof, e.lines.end + margin)};
      // Merge with an existing window of the same file that overlaps or touches.
      auto it = std::find_if(ctx.windows.begin(), ctx.windows.end(), [&](const PatchWindow& w) {
        return w.file == ref.file && span.start <= w.lines.end + 1 && w.lines.start <= span.end + 1;
      });
      if (it == ctx.windows.end()) {
        ctx.windows.push_back(PatchWindow{ref.file, span, {}, {}, {}});
        it = std::prev(ctx.windows.end());
      } else {
        it->lines = {std::min(it->lines.start, span.start), std::max(it->lines.end, span.end)};
      }
      if (std::find(it->element_lines.begin(), it->element_lines.end(), e.lines) == it->element_lines.end()) {
        it->elements.push_back(e.qualified_name());
        it->element_lines.push_back(e.lines);
      }
    }
  }
  // A grown window may now touch another one of the same file.
  for (bool merged = true; merged;) {
    merged = false;
    for (size_t i = 0; i < ctx.windows.size() && !merged; ++i)
      for (size_t j = i + 1; j < ctx.windows.size() && !merged; ++j) {
        auto& a = ctx.windows[i];
        auto& b = ctx.windows[j];
        if (a.file != b.file || b.lines.start > a.lines.end + 1 || a.lines.start > b.lines.end + 1) continue;
        a.lines = {std::min(a.lines.start, b.lines.start), std::max(a.lines.end, b.lines.end)};
        a.elements.insert(a.elements.end(), b.elements.begin(), b.elements.end());
        a.element_lines.insert(a.element_lines.end(), b.element_lines.begin(), b.element_lines.end());
        ctx.windows.erase(ctx.windows.begin() + static_cast<std::ptrdiff_t>(j));
        merged = true;
      }
  }
  for (auto& w : ctx.windows) w.text = std::string(text::slice_lines(contents[w.file], w.lines.start, w.lines.end));
  return ctx;
}

std::string PatchContext::render() const {
  std::string out;
  for (const auto& w : windows) {
    out += fmt::format("### {} (lines {}-{}; {})\n```\n{}", w.file, w.lines.start, w.lines.end,
                       fmt::join(w.elements, ", "), w.text);
    if (!w.text.empty() && w.text.back() != '\n') out += '\n';
    out += "```\n\n";
  }
  return out;
}

}  // namespace vulnres
