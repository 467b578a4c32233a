#include "featgraph/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"

#include "featgraph/error.hpp"
#include "featgraph/graph_io.hpp"

namespace featgraph::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  json value = json::parse(in, nullptr, false);
  if (value.is_discarded()) throw Error(ErrorCode::MalformedProgram, path.string() + " is not valid JSON");
  return value;
}

std::string csv_text(const std::vector<std::string>& names, const std::vector<std::vector<double>>& columns,
                     const std::string& label, const std::vector<double>& labels) {
  std::ostringstream out;
  tabular::write_csv(out, names, columns, label, labels);
  return out.str();
}

std::string method_name(controller::Method method) {
  switch (method) {
    case controller::Method::Tcto: return "tcto";
    case controller::Method::Rdg: return "rdg";
    case controller::Method::Erg: return "erg";
  }
  return "run";
}

/// Everything a stored run needs to be re-evaluated or exported.
struct StoredRun {
  config::PipelineConfig config;
  tabular::Dataset train;
  tabular::Dataset test;
  json program;
};

StoredRun load_run(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, dir.string() + " is not a run directory");
  StoredRun run;
  run.config = config::from_json(read_json(dir / "config.json"));
  run.train = tabular::load_csv(dir / "train.csv", run.config.label_column, run.config.task);
  run.test = tabular::load_csv(dir / "test.csv", run.config.label_column, run.config.task);
  run.program = read_json(dir / "graph.json");
  return run;
}

}  // namespace

fs::path default_run_root() {
  const char* root = std::getenv(kRunRootVariable);
  return root != nullptr && *root != '\0' ? fs::path(root) : fs::path("runs");
}

config::PipelineConfig resolve_config(const RunRequest& request) {
  auto overrides = request.overrides;
  // Quoted so the override parser keeps them as strings.
  if (!request.data_path.empty()) overrides.push_back("data_path=" + json(request.data_path).dump());
  if (!request.label_column.empty()) overrides.push_back("label_column=" + json(request.label_column).dump());
  if (!request.task.empty()) overrides.push_back("task=" + json(request.task).dump());
  auto config = config::parse_config(request.config_path, overrides);
  if (config.data_path.empty()) throw Error(ErrorCode::MalformedConfig, "no dataset given (data_path or --data)");
  if (config.label_column.empty()) throw Error(ErrorCode::MalformedConfig, "no label column given (label_column or --label)");
  return config;
}

RunOutcome command_run(const RunRequest& request, controller::Method method, std::ostream* log) {
  const auto config = resolve_config(request);
  const auto data = tabular::load_csv(config.data_path, config.label_column, config.task);
  const auto [train, test] = tabular::split(data, {config.train_fraction, config.seed});

  RunOutcome outcome;
  outcome.directory = request.out.empty()
                          ? default_run_root() / (method_name(method) + "-seed" + std::to_string(config.seed))
                          : request.out;
  std::error_code ec;
  fs::create_directories(outcome.directory, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + outcome.directory.string() + ": " + ec.message());

  outcome.report = controller::run_pipeline(config, data, method, {log});
  auto& report = outcome.report;
  const auto& best = report.best_graph;
  const auto& dir = outcome.directory;

  report.artifacts = {{"config", "config.json"},         {"report", "report.json"},
                      {"graph_json", "graph.json"},      {"graph_dot", "graph.dot"},
                      {"train", "train.csv"},            {"test", "test.csv"},
                      {"train_transformed", "train_transformed.csv"},
                      {"test_transformed", "test_transformed.csv"}};

  write_text(dir / "config.json", config::to_json(config).dump(2) + "\n");
  write_text(dir / "graph.json", graph::to_program_json(best).dump(2) + "\n");
  write_text(dir / "graph.dot", graph::to_dot(best));
  write_text(dir / "train.csv", csv_text(train.names, train.columns, config.label_column, train.labels));
  write_text(dir / "test.csv", csv_text(test.names, test.columns, config.label_column, test.labels));
  const auto formulas = best.trace_all();
  write_text(dir / "train_transformed.csv", csv_text(formulas, best.materialize(train), config.label_column, train.labels));
  write_text(dir / "test_transformed.csv", csv_text(formulas, best.materialize(test), config.label_column, test.labels));
  if (report.agents.is_object()) {
    fs::create_directories(dir / "agents", ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create agents directory: " + ec.message());
    for (const auto& [name, payload] : report.agents.items()) {
      write_text(dir / "agents" / (name + ".json"), payload.dump() + "\n");
      report.artifacts["agent_" + name] = "agents/" + name + ".json";
    }
  }
  write_text(dir / "report.json", controller::to_json(report).dump(2) + "\n");
  return outcome;
}

std::vector<std::string> command_trace(const fs::path& run_dir) {
  const auto run = load_run(run_dir);
  return graph::from_program_json(run.program, run.train).trace_all();
}

std::string command_export(const fs::path& run_dir, const std::string& format, const std::string& split) {
  const auto run = load_run(run_dir);
  const auto graph = graph::from_program_json(run.program, run.train);
  if (format == "dot") return graph::to_dot(graph);
  if (format == "json") return graph::to_program_json(graph).dump(2) + "\n";
  if (format == "csv") {
    if (split != "train" && split != "test") throw Error(ErrorCode::OutOfRange, "split must be train or test");
    const auto& data = split == "train" ? run.train : run.test;
    return csv_text(graph.trace_all(), graph.materialize(data), run.config.label_column, data.labels);
  }
  throw Error(ErrorCode::OutOfRange, "export format must be dot, json or csv");
}

json command_evaluate(const fs::path& run_dir) {
  const auto run = load_run(run_dir);
  const auto graph = graph::from_program_json(run.program, run.train);
  const auto spec = run.config.evaluator_spec();
  const auto seed = controller::final_seed(run.config);
  const auto raw = graph::FeatureGraph::from_training(run.train, run.config.safety());
  return json{{"metric", run.train.task == tabular::TaskKind::Classification ? "f1" : "1-rae"},
              {"raw", controller::evaluate_final(raw, run.train, run.test, spec, seed)},
              {"best", controller::evaluate_final(graph, run.train, run.test, spec, seed)},
              {"best_feature_count", graph.node_count()}};
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transformation-graph feature engineering"};
  app.require_subcommand(1);

  RunRequest request;
  const auto add_run_options = [&request](CLI::App* sub) {
    sub->add_option("--config", request.config_path, "JSON configuration file");
    sub->add_option("--data", request.data_path, "CSV dataset");
    sub->add_option("--label", request.label_column, "label column name");
    sub->add_option("--task", request.task, "classification or regression");
    sub->add_option("--set", request.overrides, "key=value configuration override")->take_all();
    sub->add_option("--out", request.out, "run directory");
  };

  auto* run = app.add_subcommand("run", "search with the cascading agents");
  add_run_options(run);
  auto* baseline = app.add_subcommand("baseline", "run a random baseline");
  add_run_options(baseline);
  std::string kind = "rdg";
  baseline->add_option("--kind", kind, "rdg or erg")->check(CLI::IsMember({"rdg", "erg"}));

  fs::path run_dir;
  auto* trace = app.add_subcommand("trace", "print the formula of every node of a stored graph");
  trace->add_option("--run", run_dir, "run directory")->required();
  auto* exporter = app.add_subcommand("export", "re-emit a stored graph");
  exporter->add_option("--run", run_dir, "run directory")->required();
  std::string format = "json";
  std::string split = "train";
  fs::path export_out;
  exporter->add_option("--format", format, "dot, json or csv")->check(CLI::IsMember({"dot", "json", "csv"}));
  exporter->add_option("--split", split, "split for csv export")->check(CLI::IsMember({"train", "test"}));
  exporter->add_option("--out", export_out, "write to this file instead of stdout");
  auto* evaluate = app.add_subcommand("evaluate", "recompute held-out metrics of a stored run");
  evaluate->add_option("--run", run_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*run || *baseline) {
      const auto method = *run ? controller::Method::Tcto
                               : (kind == "rdg" ? controller::Method::Rdg : controller::Method::Erg);
      const auto outcome = command_run(request, method, &err);
      const auto& f = *outcome.report.final_metrics;
      out << outcome.report.method << " " << f.metric << " raw=" << f.raw << " best=" << f.best
          << " features=" << f.best_feature_count << "\n"
          << "run directory: " << outcome.directory.string() << "\n";
    } else if (*trace) {
      for (const auto& line : command_trace(run_dir)) out << line << "\n";
    } else if (*exporter) {
      const auto text = command_export(run_dir, format, split);
      if (export_out.empty()) {
        out << text;
      } else {
        write_text(export_out, text);
      }
    } else if (*evaluate) {
      out << command_evaluate(run_dir).dump(2) << "\n";
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace featgraph::cli
