#include <map>

#include <fmt/format.h>

#include "vulnres/error.hpp"
#include "vulnres/harness.hpp"
#include "vulnres/util/text.hpp"

namespace fs = std::filesystem;

namespace vulnres {

namespace {

Json read_json(const fs::path& path) {
  try {
    return Json::parse(text::read_file(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::JsonParseFailure, fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string share(long part, long whole) {
  if (whole == 0) return "-";
  const long permille = (part * 1000 + whole / 2) / whole;
  return fmt::format("{}.{}%", permille / 10, permille % 10);
}

}  // namespace

std::string render_run_report(const fs::path& run_dir) {
  const auto predictions = load_predictions(run_dir);
  std::map<std::string, long> tools;
  std::map<std::string, long> scripts;
  long tool_total = 0;
  long script_total = 0;
  long failed = 0;
  Money cost;
  for (const auto& p : predictions) {
    cost += p.cost;
    const fs::path telemetry_path = run_dir / p.instance_id / "telemetry.json";
    if (!fs::exists(telemetry_path)) continue;
    const Json telemetry = read_json(telemetry_path);
    const Json tool_counts = telemetry.value("tool_counts", Json::object());
    const Json script_calls = telemetry.value("script_calls", Json::object());
    for (const auto& [tool, n] : tool_counts.items()) {
      tools[tool] += n.get<long>();
      tool_total += n.get<long>();
    }
    for (const auto& [kind, n] : script_calls.items()) {
      if (kind == "total") continue;
      scripts[kind] += n.get<long>();
      script_total += n.get<long>();
    }
    if (!telemetry.value("errors", Json::array()).empty()) ++failed;
  }

  std::string out;
  out += fmt::format("instances: {}\n", predictions.size());
  if (failed) out += fmt::format("instances with stage errors: {}\n", failed);
  const fs::path evaluation_path = run_dir / "evaluation.json";
  if (fs::exists(evaluation_path)) {
    const Json metrics = read_json(evaluation_path).at("metrics");
    out += fmt::format("resolved: {}/{} ({})\n", metrics.at("resolved").get<size_t>(), metrics.at("total").get<size_t>(),
                       metrics.at("resolved_percent").get<std::string>());
    out += fmt::format("avg cost: ${}\n", metrics.at("avg_cost").get<std::string>());
  } else {
    out += "resolved: not evaluated\n";
    if (!predictions.empty())
      out += fmt::format("avg cost: ${}\n", cost.divided_by(static_cast<std::int64_t>(predictions.size())).str());
  }
  out += fmt::format("total cost: ${}\n", cost.str());

  out += "\nagent tool calls\n";
  out += fmt::format("  {:<34}{:>7}{:>9}\n", "tool", "calls", "share");
  for (const auto& [tool, n] : tools) out += fmt::format("  {:<34}{:>7}{:>9}\n", tool, n, share(n, tool_total));
  out += fmt::format("  {:<34}{:>7}\n", "total", tool_total);

  out += "\nrun_python_code calls\n";
  out += fmt::format("  {:<34}{:>7}{:>9}\n", "category", "calls", "share");
  for (const auto& [kind, n] : scripts) out += fmt::format("  {:<34}{:>7}{:>9}\n", kind, n, share(n, script_total));
  out += fmt::format("  {:<34}{:>7}\n", "total", script_total);
  return out;
}

}  // namespace vulnres
