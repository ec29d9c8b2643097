#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "vulnres/backends.hpp"
#include "vulnres/error.hpp"
#include "vulnres/harness.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;
using namespace vulnres;

namespace {

RunConfig load_config(const std::string& config_path, const std::string& variant) {
  RunConfig config = variant.empty() ? RunConfig{} : variant_config(variant);
  if (config_path.empty()) return config;
  Json j;
  try {
    j = Json::parse(text::read_file(config_path));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, fmt::format("{}: {}", config_path, e.what()));
  }
  if (!variant.empty()) {
    // Variant first, file keys on top.
    Json merged = config.to_json();
    for (const auto& [k, v] : j.items()) merged[k] = v;
    j = std::move(merged);
  }
  return RunConfig::from_json(j);
}

BackendFactory make_factory(const std::string& spec) {
  if (spec == "live") {
    const LiveEndpoint endpoint = live_endpoint_from_env();
    return [endpoint](const IssueInstance&) -> std::unique_ptr<LlmBackend> {
      return std::make_unique<OpenAiChatBackend>(endpoint);
    };
  }
  if (spec.rfind("replay:", 0) == 0) {
    const fs::path path = spec.substr(7);
    if (!fs::exists(path)) throw Error(ErrorCode::FileNotFound, path.string());
    return [path](const IssueInstance& inst) -> std::unique_ptr<LlmBackend> {
      return ReplayBackend::from_file(fs::is_directory(path) ? path / (inst.instance_id + ".json") : path);
    };
  }
  throw Error(ErrorCode::InvalidConfig, fmt::format("unknown backend '{}' (live | replay:<path>)", spec));
}

std::unique_ptr<Embedder> make_embedder(const std::string& backend, const RunConfig& config) {
  if (backend == "live" && std::getenv("VULNRES_EMBEDDING_MODEL"))
    return std::make_unique<OpenAiEmbedder>(live_endpoint_from_env("VULNRES_EMBEDDING_MODEL"));
  return std::make_unique<HashingEmbedder>(config.embedding_dimension);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vulnres: agent-assisted vulnerability repair"};
  app.require_subcommand(1);

  std::string instances_path, config_path, variant, backend = "replay:", out_dir;
  size_t workers = 0;
  auto* run = app.add_subcommand("run", "localize and patch every instance");
  run->add_option("--instances", instances_path, "instances .jsonl")->required();
  run->add_option("--config", config_path, "run configuration .json");
  run->add_option("--variant", variant, "named configuration to start from");
  run->add_option("--backend", backend, "live | replay:<script or dir>")->required();
  run->add_option("--out", out_dir, "run directory")->required();
  run->add_option("--workers", workers, "override the worker count");

  std::string predictions_dir, verifier_command;
  int verifier_timeout = 600;
  auto* eval = app.add_subcommand("evaluate", "verify predictions and compute metrics");
  eval->add_option("--predictions", predictions_dir, "run directory")->required();
  eval->add_option("--instances", instances_path, "instances .jsonl")->required();
  eval->add_option("--verifier", verifier_command, "external verifier command");
  eval->add_option("--timeout", verifier_timeout, "seconds per build or repro step");

  std::string run_dir;
  auto* report = app.add_subcommand("report", "summarize a run directory");
  report->add_option("--run", run_dir, "run directory")->required();

  app.add_subcommand("variants", "list named configurations");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      RunConfig config = load_config(config_path, variant);
      if (workers) config.workers = workers;
      config.validate();
      const auto instances = load_instances(instances_path);
      auto factory = make_factory(backend);
      auto embedder = make_embedder(backend, config);
      const auto predictions = run_batch(instances, config, factory, *embedder, out_dir);
      int errors = 0;
      for (const auto& p : predictions) {
        std::cout << fmt::format("{}: {} (${})\n", p.instance_id, p.diff.empty() ? "no patch" : "patch",
                                 p.cost.total().str());
        for (const auto& e : p.errors) {
          std::cerr << fmt::format("  {}\n", e);
          ++errors;
        }
      }
      return errors ? 2 : 0;
    }
    if (eval->parsed()) {
      const auto instances = load_instances(instances_path);
      std::unique_ptr<Verifier> verifier;
      if (verifier_command.empty()) verifier = std::make_unique<HarnessVerifier>(std::chrono::seconds(verifier_timeout));
      else verifier = std::make_unique<CommandVerifier>(verifier_command);
      const Metrics m = evaluate(predictions_dir, instances, *verifier);
      std::cout << fmt::format("resolved {}/{} ({}), avg cost ${}\n", m.resolved, m.total, m.resolved_percent(),
                               m.avg_cost.str());
      return 0;
    }
    if (report->parsed()) {
      std::cout << render_run_report(run_dir);
      return 0;
    }
    for (const auto& name : variant_names()) std::cout << name << "\n";
  } catch (const std::exception& e) {
    std::cerr << "vulnres: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
