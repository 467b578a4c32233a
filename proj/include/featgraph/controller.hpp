#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "featgraph/cluster.hpp"
#include "featgraph/config.hpp"
#include "featgraph/eval.hpp"
#include "featgraph/graph.hpp"

namespace featgraph::controller {

using config::PipelineConfig;
using graph::FeatureGraph;
using graph::NodeId;

struct Reward {
  double performance = 0.0;  // R_p
  double complexity = 0.0;   // R_c
  double total = 0.0;        // R_p + R_c
};

/// R_c is the mean of exp(-depth) over every node of `graph`.
Reward compute_reward(double previous_metric, double next_metric, const FeatureGraph& graph);

/// Reward handed to each of the `acting` agents.
std::vector<double> assign_rewards(double reward, std::size_t acting, config::RewardSplit split);

/// Equal-frequency bin of each value. A value's bin is floor(r * bins / n)
/// where r counts the values strictly below it, so equal values share a bin.
std::vector<std::size_t> equal_frequency_bins(std::span<const double> values, std::size_t bins);

/// Plug-in mutual information (nats) between two discrete codings.
double discrete_mutual_information(std::span<const std::size_t> a, std::span<const std::size_t> b);

/// Feature is binned; class labels are used as they are and regression
/// labels are binned like the feature.
double mutual_information(std::span<const double> feature, std::span<const double> labels, tabular::TaskKind task,
                          std::size_t bins = 20);

struct PruneEvent {
  std::string kind;  // node_wise, backtrack, random
  std::size_t removed = 0;
  std::size_t node_count = 0;
};

/// Keeps every root plus the top-k derived nodes by mutual information with
/// the labels (ties to the lower id). Returns the number of nodes removed.
std::size_t node_wise_prune(FeatureGraph& graph, std::span<const double> labels, tabular::TaskKind task,
                            std::size_t k, std::size_t bins = 20);

struct EpisodeState {
  FeatureGraph graph;
  double metric = 0.0;
  graph::GraphSnapshot episode_best;
  double episode_best_metric = 0.0;
};

/// Restores the episode-best snapshot when the metric fell below it or the
/// graph outgrew the cap; otherwise records the current graph as the new
/// episode best. Returns true when it restored.
bool step_backtrack(EpisodeState& state, std::size_t node_cap);

/// Unary operations map every head node; binary ones walk head x operand in
/// ascending id order and stop after `cap` creations. Returns created ids.
std::vector<NodeId> apply_cluster_transformation(FeatureGraph& graph, std::span<const NodeId> head,
                                                 const ops::OperationKind& op,
                                                 std::optional<std::span<const NodeId>> operand, std::size_t cap);

/// Wall-clock seconds per phase.
struct PhaseTimings {
  double reward_estimation = 0.0;
  double agent_decision = 0.0;
  double graph_update = 0.0;
  double pruning = 0.0;
  double clustering = 0.0;

  PhaseTimings& operator+=(const PhaseTimings& other);
};

nlohmann::json to_json(const PhaseTimings& timings);

struct StepRecord {
  std::string phase;  // train or test
  std::size_t episode = 0;
  std::size_t step = 0;
  std::optional<std::size_t> head;
  std::string operation;
  std::optional<std::size_t> operand;
  std::vector<NodeId> parents;  // baselines record the nodes they touched
  std::size_t nodes_created = 0;
  std::size_t node_count = 0;
  double previous_metric = 0.0;
  double metric = 0.0;
  Reward reward;
  std::vector<double> agent_rewards;
  std::vector<PruneEvent> prune_events;
  double episode_best_metric = 0.0;
  double best_metric = 0.0;
  std::optional<std::string> error;
  PhaseTimings timings;
};

struct FinalMetrics {
  std::string metric;  // f1 or 1-rae
  double raw = 0.0;    // roots-only graph
  double best = 0.0;   // best graph
  std::size_t best_feature_count = 0;
};

struct RunReport {
  std::string method;  // tcto, rdg, erg
  nlohmann::json config;
  double raw_cv_metric = 0.0;
  double best_cv_metric = 0.0;
  std::size_t evaluations = 0;
  std::vector<StepRecord> steps;
  FeatureGraph best_graph;
  PhaseTimings timings;
  double total_seconds = 0.0;
  std::optional<FinalMetrics> final_metrics;
  std::map<std::string, std::string> artifacts;
  /// Agent checkpoints keyed by file stem; null for baselines.
  nlohmann::json agents;
  nlohmann::json parameter_counts;
};

/// Wall times sit under "timings" keys everywhere, so stripping those keys
/// leaves the deterministic part of the report.
nlohmann::json to_json(const RunReport& report);
nlohmann::json strip_timings(const nlohmann::json& report);

struct RunOptions {
  std::ostream* log = nullptr;
};

/// Training-split search with the cascading agents. The returned best graph
/// maximises the cross-validated metric on `train`.
RunReport run_training(const PipelineConfig& config, const tabular::Dataset& train, const RunOptions& options = {});

RunReport run_baseline_rdg(const PipelineConfig& config, const tabular::Dataset& train, const RunOptions& options = {});
RunReport run_baseline_erg(const PipelineConfig& config, const tabular::Dataset& train, const RunOptions& options = {});

/// Materialises `best` on both splits (fit states from train), fits the
/// evaluator on train and scores test.
double evaluate_final(const FeatureGraph& best, const tabular::Dataset& train, const tabular::Dataset& test,
                      const eval::EvaluatorSpec& spec, std::uint64_t seed);

/// Cross-validated metric of the graph's training columns.
double graph_cv_metric(const FeatureGraph& graph, const tabular::Dataset& train, const PipelineConfig& config);

enum class Method { Tcto, Rdg, Erg };

/// Split, search with `method`, then evaluate the best graph and the raw
/// features on the held-out split.
RunReport run_pipeline(const PipelineConfig& config, const tabular::Dataset& data, Method method,
                       const RunOptions& options = {});

std::uint64_t final_seed(const PipelineConfig& config);

}  // namespace featgraph::controller
