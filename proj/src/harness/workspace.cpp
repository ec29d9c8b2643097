#include <unistd.h>

#include <fmt/format.h>

#include "vulnres/error.hpp"
#include "vulnres/harness.hpp"
#include "vulnres/util/process.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;

namespace vulnres {

namespace {

fs::path make_scratch(const std::string& id) {
  std::string safe;
  for (char c : id) safe += text::is_ident_char(c) || c == '-' || c == '.' ? c : '_';
  std::string tmpl = (fs::temp_directory_path() / ("vulnres-" + safe + "-XXXXXX")).string();
  if (!::mkdtemp(tmpl.data())) throw Error(ErrorCode::SandboxUnavailable, "cannot create scratch directory");
  return tmpl;
}

std::string docker(const std::vector<std::string>& args) {
  std::vector<std::string> argv{"docker"};
  argv.insert(argv.end(), args.begin(), args.end());
  ProcessResult r;
  try {
    r = run_process(argv, ProcessOptions{{}, {}, std::chrono::minutes(10), "", false});
  } catch (const Error& e) {
    throw Error(ErrorCode::SandboxUnavailable, fmt::format("container runtime unavailable: {}", e.what()));
  }
  if (r.exit_code != 0)
    throw Error(ErrorCode::SandboxUnavailable, fmt::format("docker {} failed: {}", args.front(), r.err));
  return std::string(text::trim(r.out));
}

}  // namespace

InstanceWorkspace::InstanceWorkspace(const IssueInstance& instance) {
  scratch_ = make_scratch(instance.instance_id);
  root_ = scratch_ / "repo";
  try {
    if (instance.workspace) {
      copy_tree(*instance.workspace, root_);
      sandbox_ = std::make_unique<LocalSandbox>(root_);
      return;
    }
    // Copy the image's tree out, then bind-mount it back so host-side
    // edits and in-container builds see the same files.
    fs::create_directories(root_);
    std::string seed = docker({"create", *instance.image});
    try {
      docker({"cp", seed + ":" + instance.container_workdir + "/.", root_.string()});
    } catch (...) {
      docker({"rm", "-f", seed});
      throw;
    }
    docker({"rm", "-f", seed});
    container_id_ = docker({"run", "-d", "-v", root_.string() + ":" + instance.container_workdir, "--entrypoint",
                            "sleep", *instance.image, "infinity"});
    sandbox_ = std::make_unique<ContainerSandbox>(container_id_, instance.container_workdir, root_);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(scratch_, ec);
    throw;
  }
}

InstanceWorkspace::~InstanceWorkspace() {
  if (!container_id_.empty()) {
    try {
      docker({"rm", "-f", container_id_});
    } catch (...) {
    }
  }
  std::error_code ec;
  fs::remove_all(scratch_, ec);
}

}  // namespace vulnres
