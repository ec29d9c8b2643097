#include <unistd.h>

#include <cstdlib>
#include <map>

#include <fmt/format.h>

#include "vulnres/error.hpp"
#include "vulnres/harness.hpp"
#include "vulnres/util/process.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;

namespace vulnres {

namespace {

// Unique temp file holding the diff; removed on scope exit.
class DiffFile {
 public:
  explicit DiffFile(const std::string& diff) {
    std::string pattern = (fs::temp_directory_path() / "vulnres-diff-XXXXXX").string();
    int fd = ::mkstemp(pattern.data());
    if (fd < 0) throw Error(ErrorCode::IoError, "cannot create a temporary diff file");
    ::close(fd);
    path_ = pattern;
    text::write_file(path_, diff);
  }
  ~DiffFile() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DiffFile(const DiffFile&) = delete;
  DiffFile& operator=(const DiffFile&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace

Verdict HarnessVerifier::verify(const IssueInstance& instance, const std::string& diff) {
  Verdict verdict{instance.instance_id, false, false, {}};
  try {
    InstanceWorkspace workspace(instance);
    DiffFile patch_file(diff);
    ProcessOptions options;
    options.cwd = workspace.root();
    options.merge_stderr = true;
    auto applied = run_process({"patch", "-p1", "--batch", "--forward", "-i", patch_file.path().string()}, options);
    if (applied.exit_code != 0) {
      verdict.detail = "diff does not apply";
      return verdict;
    }
    const auto timeout = std::chrono::duration_cast<std::chrono::milliseconds>(timeout_);
    Sandbox& sandbox = workspace.sandbox();
    if (instance.build_command) {
      auto build = sandbox.exec(*instance.build_command, timeout);
      if (build.timed_out || build.exit_code != 0) {
        verdict.detail = "build failed";
        return verdict;
      }
    }
    auto repro = sandbox.exec(instance.repro_command, timeout);
    if (repro.timed_out) {
      verdict.detail = "reproduction timed out";
      return verdict;
    }
    if (SanitizerSignatures().matches(repro.out)) {
      verdict.detail = "sanitizer report persists";
      return verdict;
    }
    verdict.resolved = true;
    verdict.detail = "no sanitizer report";
  } catch (const std::exception& e) {
    verdict.verifier_failed = true;
    verdict.detail = e.what();
  }
  return verdict;
}

Verdict CommandVerifier::verify(const IssueInstance& instance, const std::string& diff) {
  Verdict verdict{instance.instance_id, false, false, {}};
  try {
    DiffFile patch_file(diff);
    ProcessOptions options;
    options.env = {{"VULNRES_INSTANCE_ID", instance.instance_id}, {"VULNRES_DIFF_PATH", patch_file.path().string()}};
    options.merge_stderr = true;
    auto result = run_shell(command_, options);
    verdict.resolved = !result.timed_out && result.exit_code == 0;
    verdict.detail = result.timed_out ? "verifier timed out" : fmt::format("exit {}", result.exit_code);
  } catch (const std::exception& e) {
    verdict.verifier_failed = true;
    verdict.detail = e.what();
  }
  return verdict;
}

std::string Metrics::resolved_percent() const {
  if (total == 0) return "0.0%";
  const size_t permille = (resolved * 1000 + total / 2) / total;
  return fmt::format("{}.{}%", permille / 10, permille % 10);
}

Json Metrics::to_json() const {
  return Json{{"resolved", resolved},
              {"total", total},
              {"resolved_percent", resolved_percent()},
              {"total_cost", total_cost.str()},
              {"avg_cost", avg_cost.str()}};
}

Metrics compute_metrics(const std::vector<Verdict>& verdicts, const std::vector<Money>& costs) {
  Metrics m;
  m.total = verdicts.size();
  for (const auto& v : verdicts) m.resolved += v.resolved ? 1 : 0;
  for (const auto& c : costs) m.total_cost += c;
  if (m.total > 0) m.avg_cost = m.total_cost.divided_by(static_cast<std::int64_t>(m.total));
  return m;
}

std::vector<StoredPrediction> load_predictions(const fs::path& dir) {
  const fs::path index = dir / "predictions.jsonl";
  if (!fs::exists(index)) throw Error(ErrorCode::FileNotFound, index.string());
  std::vector<StoredPrediction> out;
  size_t line_no = 0;
  const std::string content = text::read_file(index);
  for (const auto& line : text::split_lines(content)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::JsonParseFailure, fmt::format("predictions.jsonl line {}: {}", line_no, e.what()));
    }
    StoredPrediction p;
    p.instance_id = j.at("instance_id").get<std::string>();
    const fs::path diff_path = dir / j.at("diff_path").get<std::string>();
    if (fs::exists(diff_path)) p.diff = text::read_file(diff_path);
    if (j.contains("cost")) p.cost = Money::parse(j.at("cost").get<std::string>());
    out.push_back(std::move(p));
  }
  return out;
}

Metrics evaluate(const fs::path& predictions_dir, const std::vector<IssueInstance>& instances, Verifier& verifier) {
  std::map<std::string, StoredPrediction> by_id;
  for (auto& p : load_predictions(predictions_dir)) by_id[p.instance_id] = std::move(p);

  std::vector<Verdict> verdicts;
  std::vector<Money> costs;
  for (const auto& inst : instances) {
    auto it = by_id.find(inst.instance_id);
    if (it == by_id.end()) {
      verdicts.push_back({inst.instance_id, false, false, "no prediction"});
      continue;
    }
    costs.push_back(it->second.cost);
    if (it->second.diff.empty()) {
      verdicts.push_back({inst.instance_id, false, false, "no patch"});
      continue;
    }
    verdicts.push_back(verifier.verify(inst, it->second.diff));
  }

  Metrics metrics = compute_metrics(verdicts, costs);
  Json rows = Json::array();
  for (const auto& v : verdicts)
    rows.push_back({{"instance_id", v.instance_id},
                    {"resolved", v.resolved},
                    {"verifier_failed", v.verifier_failed},
                    {"detail", v.detail}});
  text::write_file(predictions_dir / "evaluation.json",
                   Json{{"metrics", metrics.to_json()}, {"verdicts", rows}}.dump(2) + "\n");
  return metrics;
}

}  // namespace vulnres
