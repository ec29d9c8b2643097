#include "vulnres/repo_model.hpp"

#include <algorithm>
#include <map>

#include "vulnres/error.hpp"
#include "vulnres/util/hash.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;

namespace vulnres {

std::string_view to_string(ElementKind kind) {
  switch (kind) {
    case ElementKind::Class: return "Class";
    case ElementKind::Struct: return "Struct";
    case ElementKind::Union: return "Union";
    case ElementKind::Enum: return "Enum";
    case ElementKind::Function: return "Function";
    case ElementKind::Macro: return "Macro";
    case ElementKind::GlobalVariable: return "GlobalVariable";
  }
  return "Unknown";
}

std::optional<ElementKind> parse_element_kind(std::string_view name) {
  for (int k = 0; k < kElementKindCount; ++k) {
    auto kind = static_cast<ElementKind>(k);
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string CodeElement::qualified_name() const {
  return qualifier.empty() ? name : qualifier + "::" + name;
}

bool RepoOptions::is_source(const fs::path& p) const {
  auto ext = p.extension().string();
  return std::find(extensions.begin(), extensions.end(), ext) != extensions.end();
}

namespace {

void require_dir(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error(ErrorCode::NotADirectory, root.string());
}

fs::path resolve_in_root(const fs::path& root, const std::string& file) {
  fs::path p = root / file;
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) throw Error(ErrorCode::FileNotFound, file);
  return p;
}

}  // namespace

std::vector<CodeElement> parse_elements(const fs::path& root, const std::string& file) {
  return parse_source(text::read_file(resolve_in_root(root, file)), file);
}

SkeletonFile skeletonize(const fs::path& root, const std::string& file) {
  return {file, skeletonize_source(text::read_file(resolve_in_root(root, file)))};
}

std::vector<std::string> list_files(const fs::path& root, const RepoOptions& options) {
  require_dir(root);
  std::vector<std::string> files;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied, ec);
       it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) break;
    const auto& entry = *it;
    if (entry.is_symlink(ec)) {
      if (entry.is_directory(ec)) it.disable_recursion_pending();
      continue;
    }
    if (entry.is_directory(ec)) {
      if (options.ignore_dirs.count(entry.path().filename().string())) it.disable_recursion_pending();
      continue;
    }
    if (entry.is_regular_file(ec)) files.push_back(fs::relative(entry.path(), root).generic_string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<std::string> list_source_files(const fs::path& root, const RepoOptions& options) {
  auto all = list_files(root, options);
  std::vector<std::string> out;
  for (auto& f : all) {
    if (options.is_source(f)) out.push_back(std::move(f));
  }
  return out;
}

namespace {

struct TreeNode {
  std::map<std::string, TreeNode> children;
  bool is_file = false;
};

void render_node(const TreeNode& node, int depth, std::string& out) {
  for (const auto& [name, child] : node.children) {
    out.append(static_cast<size_t>(depth) * 2, ' ');
    out += name;
    if (!child.is_file) out += '/';
    out += '\n';
    if (!child.is_file) render_node(child, depth + 1, out);
  }
}

}  // namespace

RepoTreeView render_repo_tree(const fs::path& root, const RepoOptions& options) {
  TreeNode top;
  for (const auto& file : list_source_files(root, options)) {
    TreeNode* node = &top;
    auto parts = text::split(file, '/');
    for (size_t i = 0; i < parts.size(); ++i) {
      node = &node->children[parts[i]];
      node->is_file = i + 1 == parts.size();
    }
  }
  auto name = fs::absolute(root).lexically_normal();
  std::string root_name = name.filename().empty() ? name.parent_path().filename().string()
                                                  : name.filename().string();
  std::string out = root_name + "/\n";
  render_node(top, 1, out);
  return {out, options.extensions};
}

namespace {

RepoSnapshot combine(const std::vector<std::string>& files, const std::vector<std::string>& digests) {
  Sha256 h;
  for (size_t i = 0; i < files.size(); ++i) {
    h.update_framed(files[i]);
    h.update_framed(digests[i]);
  }
  return {h.hex_digest(), files.size()};
}

}  // namespace

RepoSnapshot snapshot(const fs::path& root, const RepoOptions& options) {
  auto files = list_files(root, options);
  std::vector<std::string> digests(files.size());
  std::vector<char> failed(files.size(), 0);
  const auto n = static_cast<std::ptrdiff_t>(files.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      digests[i] = sha256_hex(text::read_file(root / files[i]));
    } catch (...) {
      failed[i] = 1;  // exceptions must not escape the parallel region
    }
  }
  for (size_t i = 0; i < files.size(); ++i) {
    if (failed[i]) throw Error(ErrorCode::FileNotFound, files[i]);
  }
  return combine(files, digests);
}

RepoSnapshot snapshot_serial(const fs::path& root, const RepoOptions& options) {
  auto files = list_files(root, options);
  std::vector<std::string> digests;
  digests.reserve(files.size());
  for (const auto& f : files) digests.push_back(sha256_hex(text::read_file(root / f)));
  return combine(files, digests);
}

void copy_tree(const fs::path& from, const fs::path& to, const RepoOptions& options) {
  fs::create_directories(to);
  for (const auto& f : list_files(from, options)) {
    fs::create_directories((to / f).parent_path());
    fs::copy_file(from / f, to / f, fs::copy_options::overwrite_existing);
  }
}

}  // namespace vulnres
