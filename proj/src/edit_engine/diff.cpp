#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "vulnres/edit_engine.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;

namespace vulnres {
namespace {

enum class Op { Keep, Del, Add };

struct DiffLine {
  Op op;
  size_t a;  // index into old (Keep/Del)
  size_t b;  // index into new (Keep/Add)
};

// Myers O((N+M)D) shortest edit script over lines.
std::vector<DiffLine> myers(const std::vector<std::string_view>& a, const std::vector<std::string_view>& b) {
  const long n = static_cast<long>(a.size());
  const long m = static_cast<long>(b.size());
  const long max = n + m;
  const long off = max + 1;
  std::vector<long> v(2 * max + 3, 0);
  std::vector<std::vector<long>> trace;
  long found_d = -1;
  for (long d = 0; d <= max; ++d) {
    trace.push_back(v);
    for (long k = -d; k <= d; k += 2) {
      long x;
      if (k == -d || (k != d && v[off + k - 1] < v[off + k + 1])) {
        x = v[off + k + 1];
      } else {
        x = v[off + k - 1] + 1;
      }
      long y = x - k;
      while (x < n && y < m && a[x] == b[y]) {
        ++x;
        ++y;
      }
      v[off + k] = x;
      if (x >= n && y >= m) {
        found_d = d;
        break;
      }
    }
    if (found_d >= 0) break;
  }
  std::vector<DiffLine> script;
  long x = n;
  long y = m;
  for (long d = found_d; d > 0; --d) {
    const auto& vd = trace[d];
    long k = x - y;
    long prev_k;
    if (k == -d || (k != d && vd[off + k - 1] < vd[off + k + 1])) {
      prev_k = k + 1;
    } else {
      prev_k = k - 1;
    }
    long prev_x = vd[off + prev_k];
    long prev_y = prev_x - prev_k;
    while (x > prev_x && y > prev_y) {
      --x;
      --y;
      script.push_back({Op::Keep, static_cast<size_t>(x), static_cast<size_t>(y)});
    }
    if (x == prev_x) {
      --y;
      script.push_back({Op::Add, static_cast<size_t>(x), static_cast<size_t>(y)});
    } else {
      --x;
      script.push_back({Op::Del, static_cast<size_t>(x), static_cast<size_t>(y)});
    }
  }
  while (x > 0 && y > 0) {
    --x;
    --y;
    script.push_back({Op::Keep, static_cast<size_t>(x), static_cast<size_t>(y)});
  }
  std::reverse(script.begin(), script.end());
  // Within each change run, emit deletions before additions.
  std::vector<DiffLine> ordered;
  ordered.reserve(script.size());
  size_t i = 0;
  while (i < script.size()) {
    if (script[i].op == Op::Keep) {
      ordered.push_back(script[i++]);
      continue;
    }
    size_t j = i;
    while (j < script.size() && script[j].op != Op::Keep) ++j;
    for (size_t t = i; t < j; ++t)
      if (script[t].op == Op::Del) ordered.push_back(script[t]);
    for (size_t t = i; t < j; ++t)
      if (script[t].op == Op::Add) ordered.push_back(script[t]);
    i = j;
  }
  return ordered;
}

// Lines without terminators; the flag says whether the last line had one.
std::vector<std::string_view> body_lines(std::string_view s, bool& trailing_newline) {
  std::vector<std::string_view> out;
  trailing_newline = s.empty() || s.back() == '\n';
  size_t pos = 0;
  while (pos < s.size()) {
    size_t nl = s.find('\n', pos);
    if (nl == std::string_view::npos) {
      out.push_back(s.substr(pos));
      break;
    }
    out.push_back(s.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

std::string range(size_t start, size_t len) {
  // start is 1-based; for an empty range it names the line before.
  if (len == 1) return fmt::format("{}", start);
  return fmt::format("{},{}", len == 0 ? start - 1 : start, len);
}

}  // namespace

std::string unified_diff_file(const std::string& path, const std::optional<std::string>& before,
                              const std::optional<std::string>& after, int context) {
  if (before == after) return {};
  bool a_nl = true;
  bool b_nl = true;
  const std::string old_text = before.value_or("");
  const std::string new_text = after.value_or("");
  auto a = body_lines(old_text, a_nl);
  auto b = body_lines(new_text, b_nl);
  // A missing final newline makes the last line differ from its terminated twin.
  std::vector<std::string> a_keys(a.begin(), a.end());
  std::vector<std::string> b_keys(b.begin(), b.end());
  if (!a_nl && !a_keys.empty()) a_keys.back() += '\0';
  if (!b_nl && !b_keys.empty()) b_keys.back() += '\0';
  std::vector<std::string_view> ak(a_keys.begin(), a_keys.end());
  std::vector<std::string_view> bk(b_keys.begin(), b_keys.end());
  auto script = myers(ak, bk);

  std::string out = fmt::format("diff --git a/{0} b/{0}\n", path);
  if (!before) out += "new file mode 100644\n";
  if (!after) out += "deleted file mode 100644\n";
  out += before ? fmt::format("--- a/{}\n", path) : "--- /dev/null\n";
  out += after ? fmt::format("+++ b/{}\n", path) : "+++ /dev/null\n";

  const size_t ctx = static_cast<size_t>(std::max(context, 0));
  size_t i = 0;
  while (i < script.size()) {
    while (i < script.size() && script[i].op == Op::Keep) ++i;
    if (i == script.size()) break;
    size_t begin = i >= ctx ? i - ctx : 0;
    // Extend the hunk while changes are within 2*ctx of each other.
    size_t end = i;
    while (true) {
      while (end < script.size() && script[end].op != Op::Keep) ++end;
      size_t keep = end;
      while (keep < script.size() && script[keep].op == Op::Keep) ++keep;
      if (keep < script.size() && keep - end <= 2 * ctx) {
        end = keep;
        continue;
      }
      end = std::min(end + ctx, script.size());
      break;
    }
    size_t a_start = 0, a_len = 0, b_start = 0, b_len = 0;
    bool a_set = false, b_set = false;
    std::string body;
    for (size_t t = begin; t < end; ++t) {
      const auto& dl = script[t];
      if (dl.op != Op::Add) {
        if (!a_set) a_start = dl.a + 1, a_set = true;
        ++a_len;
      }
      if (dl.op != Op::Del) {
        if (!b_set) b_start = dl.b + 1, b_set = true;
        ++b_len;
      }
      char tag = dl.op == Op::Keep ? ' ' : dl.op == Op::Del ? '-' : '+';
      std::string_view line = dl.op == Op::Add ? b[dl.b] : a[dl.a];
      body += tag;
      body += line;
      body += '\n';
      bool no_nl = dl.op == Op::Add ? (!b_nl && dl.b + 1 == b.size()) : (!a_nl && dl.a + 1 == a.size());
      if (dl.op == Op::Keep) no_nl = !a_nl && dl.a + 1 == a.size();
      if (no_nl) body += "\\ No newline at end of file\n";
    }
    if (!a_set) {
      // Pure insertion: position after the preceding old line.
      a_start = script[begin].a + 1;
    }
    if (!b_set) b_start = script[begin].b + 1;
    out += fmt::format("@@ -{} +{} @@\n", range(a_start, a_len), range(b_start, b_len));
    out += body;
    i = end;
  }
  return out;
}

std::string to_unified_diff(const fs::path& before_root, const fs::path& after_root, const RepoOptions& options) {
  std::set<std::string> paths;
  auto before_files = list_files(before_root, options);
  auto after_files = list_files(after_root, options);
  paths.insert(before_files.begin(), before_files.end());
  paths.insert(after_files.begin(), after_files.end());
  std::string out;
  for (const auto& p : paths) {
    std::optional<std::string> a;
    std::optional<std::string> b;
    if (fs::is_regular_file(before_root / p)) a = text::read_file(before_root / p);
    if (fs::is_regular_file(after_root / p)) b = text::read_file(after_root / p);
    out += unified_diff_file(p, a, b);
  }
  return out;
}

DiffStats diff_stats(std::string_view diff) {
  DiffStats s;
  bool in_header = false;
  for (auto line : text::split_lines(diff)) {
    line = text::trim_right(line);
    if (line.substr(0, 11) == "diff --git ") {
      ++s.files;
      in_header = true;
    } else if (line.substr(0, 3) == "@@ ") {
      ++s.hunks;
      in_header = false;
    } else if (in_header || line.empty()) {
      continue;
    } else if (line[0] == '+') {
      ++s.added;
    } else if (line[0] == '-') {
      ++s.removed;
    }
  }
  return s;
}

}  // namespace vulnres
