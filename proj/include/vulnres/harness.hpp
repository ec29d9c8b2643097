#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vulnres/agents.hpp"
#include "vulnres/cost.hpp"
#include "vulnres/execution.hpp"
#include "vulnres/llm.hpp"
#include "vulnres/localization.hpp"
#include "vulnres/repair.hpp"

namespace vulnres {

struct IssueInstance {
  std::string instance_id;
  std::optional<std::filesystem::path> workspace;  // local checkout
  std::optional<std::string> image;                // container image
  std::string container_workdir = "/src";
  std::string issue_report;
  std::optional<std::string> sanitizer_log;
  std::optional<std::string> build_command;
  std::string repro_command;
  std::string language = "c";
};

// JSON lines, one instance per line. *_file fields and relative workspace
// paths resolve against the file's directory. Throws SchemaViolation
// naming the field and line.
std::vector<IssueInstance> load_instances(const std::filesystem::path& path);

enum class EnhanceStage { Localization, Generation };
enum class InputType { IssueReport, SanitizerLog };

struct RunConfig {
  size_t n_files = 3;
  int margin = 10;
  size_t t_patches = 5;
  size_t chunk_lines = 512;
  bool enable_cpc = true;
  bool enable_spa = true;
  std::set<EnhanceStage> enhance_stages{EnhanceStage::Localization, EnhanceStage::Generation};
  SelectionStrategy selection = SelectionStrategy::PocVoting;
  InputType input_type = InputType::IssueReport;
  int cpc_max_steps = 25;
  int spa_max_steps = 40;
  size_t log_head_lines = 100;
  size_t log_tail_lines = 100;
  size_t script_output_cap = 8 * 1024;
  std::chrono::seconds poc_timeout{600};
  std::string version_store = "git";  // git | memory
  std::vector<std::string> lsp_command;
  size_t embedding_dimension = 256;
  size_t workers = 1;
  PriceTable prices;

  // 0 for the first candidate, 1 for the rest.
  std::vector<double> temperatures() const;

  Json to_json() const;
  // Unknown keys, unknown enum values and combinations whose effect would
  // be silently void are rejected with InvalidConfig.
  static RunConfig from_json(const Json& j);
  void validate() const;
};

// base, cpc, spa, full, enhance_vuln_loc, enhance_patch_gen, simple_voting,
// sanitizer_input.
std::vector<std::string> variant_names();
RunConfig variant_config(std::string_view name);

// Categories of run_python_code calls.
struct ScriptCallCounts {
  int poc = 0;
  int string = 0;
  int integer = 0;
  int think = 0;
  int forbidden = 0;
  int other = 0;
  int total() const { return poc + string + integer + think + forbidden + other; }
  Json to_json() const;
};

std::string classify_script_call(const std::string& code, const std::string& observation);
ScriptCallCounts classify_script_calls(const std::vector<Transcript>& transcripts);

struct Prediction {
  std::string instance_id;
  std::string diff;  // empty: no patch
  CostRecord cost;
  Json telemetry;
  std::vector<std::string> errors;  // "<stage>: <message>"
};

// Live or replay model plus the embedder, shared by every stage.
struct Backends {
  LlmBackend& llm;
  Embedder& embedder;
};

// Runs every enabled stage on a scratch copy of the instance workspace and
// persists stage artifacts under out_dir/<instance_id>/.
Prediction run_pipeline(const IssueInstance& instance, const RunConfig& config, Backends backends,
                        const std::filesystem::path& out_dir);

using BackendFactory = std::function<std::unique_ptr<LlmBackend>(const IssueInstance&)>;

// Bounded worker pool over instances; writes predictions.jsonl into out_dir.
std::vector<Prediction> run_batch(const std::vector<IssueInstance>& instances, const RunConfig& config,
                                  const BackendFactory& llm_factory, Embedder& embedder,
                                  const std::filesystem::path& out_dir);

// Scratch workspace and sandbox for one instance. Local workspaces are
// copied; images are started as containers.
class InstanceWorkspace {
 public:
  explicit InstanceWorkspace(const IssueInstance& instance);
  ~InstanceWorkspace();
  InstanceWorkspace(const InstanceWorkspace&) = delete;
  InstanceWorkspace& operator=(const InstanceWorkspace&) = delete;

  const std::filesystem::path& root() const { return root_; }
  Sandbox& sandbox() { return *sandbox_; }

 private:
  std::filesystem::path scratch_;
  std::filesystem::path root_;
  std::unique_ptr<Sandbox> sandbox_;
  std::string container_id_;
};

struct Verdict {
  std::string instance_id;
  bool resolved = false;
  bool verifier_failed = false;
  std::string detail;
};

class Verifier {
 public:
  virtual ~Verifier() = default;
  virtual Verdict verify(const IssueInstance& instance, const std::string& diff) = 0;
};

// Applies the diff to a fresh copy and reruns build + repro; resolved when
// the diff applies and no sanitizer signature shows up.
class HarnessVerifier final : public Verifier {
 public:
  explicit HarnessVerifier(std::chrono::seconds timeout = std::chrono::seconds(600)) : timeout_(timeout) {}
  Verdict verify(const IssueInstance& instance, const std::string& diff) override;

 private:
  std::chrono::seconds timeout_;
};

// Runs an external command with VULNRES_INSTANCE_ID and VULNRES_DIFF_PATH
// set; exit status 0 means resolved.
class CommandVerifier final : public Verifier {
 public:
  explicit CommandVerifier(std::string command) : command_(std::move(command)) {}
  Verdict verify(const IssueInstance& instance, const std::string& diff) override;

 private:
  std::string command_;
};

struct Metrics {
  size_t resolved = 0;
  size_t total = 0;
  Money total_cost;
  Money avg_cost;

  double resolved_rate() const { return total ? static_cast<double>(resolved) / total : 0.0; }
  std::string resolved_percent() const;  // "75.0%"
  Json to_json() const;
};

Metrics compute_metrics(const std::vector<Verdict>& verdicts, const std::vector<Money>& costs);

struct StoredPrediction {
  std::string instance_id;
  std::string diff;
  Money cost;
};

// Reads predictions.jsonl and the diffs it points to.
std::vector<StoredPrediction> load_predictions(const std::filesystem::path& dir);

// Verdicts for every instance (missing predictions count as unresolved);
// writes evaluation.json into the predictions dir.
Metrics evaluate(const std::filesystem::path& predictions_dir, const std::vector<IssueInstance>& instances,
                 Verifier& verifier);

// Metrics (when evaluated) and the tool-usage table of a run directory.
std::string render_run_report(const std::filesystem::path& run_dir);

}  // namespace vulnres
