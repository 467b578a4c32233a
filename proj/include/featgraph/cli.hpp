#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "featgraph/config.hpp"
#include "featgraph/controller.hpp"

namespace featgraph::cli {

/// Environment variable naming the directory under which runs are created.
inline constexpr const char* kRunRootVariable = "FEATGRAPH_RUN_ROOT";

struct RunRequest {
  std::filesystem::path config_path;
  std::vector<std::string> overrides;
  std::string data_path;
  std::string label_column;
  std::string task;
  /// Empty: <run root>/<method>-seed<seed>.
  std::filesystem::path out;
};

std::filesystem::path default_run_root();

/// Flags are folded into the overrides, after the ones given with --set.
config::PipelineConfig resolve_config(const RunRequest& request);

struct RunOutcome {
  controller::RunReport report;
  std::filesystem::path directory;
};

/// Runs the search and writes config.json, report.json, graph.json,
/// graph.dot, the raw and transformed train/test CSVs and (for the agent
/// search) agents/*.json.
RunOutcome command_run(const RunRequest& request, controller::Method method, std::ostream* log = nullptr);

/// Formula of every node of the stored best graph, one per line.
std::vector<std::string> command_trace(const std::filesystem::path& run_dir);

/// Re-emits the stored graph as dot, json, or the transformed csv of a split.
std::string command_export(const std::filesystem::path& run_dir, const std::string& format,
                           const std::string& split = "train");

/// Recomputes raw and best held-out metrics from the run directory alone.
nlohmann::json command_evaluate(const std::filesystem::path& run_dir);

/// Full command-line entry point. Returns the process exit code.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace featgraph::cli
