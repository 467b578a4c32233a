#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "featgraph/cluster.hpp"
#include "featgraph/eval.hpp"
#include "featgraph/tabular.hpp"

namespace featgraph::config {

enum class EpisodeStart { Roots, GlobalBest };
enum class RewardSplit { Same, Divided };

struct PipelineConfig {
  std::size_t train_episodes = 50;
  std::size_t steps_per_episode = 100;
  std::size_t test_episodes = 10;
  double gamma = 0.95;
  double epsilon_start = 0.9;
  double epsilon_end = 0.1;
  /// Steps over which epsilon decays; 0 spans all training steps.
  std::size_t epsilon_decay_steps = 0;
  /// 0 picks max(2, floor(sqrt(n))) each step.
  std::size_t cluster_count = 0;
  /// 0 means 4x the original feature count.
  std::size_t node_cap = 0;
  /// 0 means 2x the original feature count.
  std::size_t prune_top_k = 0;
  std::size_t max_new_features_per_step = 64;
  double prune_fraction = 0.30;
  std::uint64_t seed = 0;

  eval::EvaluatorKind evaluator = eval::EvaluatorKind::RandomForest;
  eval::F1Averaging f1_averaging = eval::F1Averaging::Weighted;
  std::size_t cv_folds = 5;
  std::size_t forest_trees = 100;
  std::size_t forest_max_depth = 10;
  std::size_t forest_min_samples_leaf = 2;
  std::size_t forest_max_features = 0;
  double ridge_lambda = 1.0;

  std::size_t encoder_hidden = 32;
  std::size_t encoder_output = 64;
  std::size_t predictor_hidden = 100;
  std::size_t target_sync_interval = 10;
  std::size_t replay_capacity = 16;
  std::size_t batch_size = 8;
  double learning_rate = 0.01;

  double train_fraction = 0.8;
  cluster::ClusterSignal cluster_mode = cluster::ClusterSignal::Combined;
  /// "cluster_count": d = min(8, k); "node_count": d = min(8, n).
  bool spectral_dimension_from_k = true;
  EpisodeStart episode_start = EpisodeStart::Roots;
  RewardSplit reward_split = RewardSplit::Same;
  bool exclude_head_from_operands = true;
  std::vector<std::string> operations;  // empty: the full catalog
  bool safe_math = true;

  std::string data_path;
  std::string label_column;
  tabular::TaskKind task = tabular::TaskKind::Classification;

  std::size_t resolved_node_cap(std::size_t feature_count) const;
  std::size_t resolved_top_k(std::size_t feature_count) const;
  std::size_t node_wise_episodes() const;
  eval::EvaluatorSpec evaluator_spec() const;
  std::vector<ops::OperationKind> operation_set() const;
  ops::SafetyConfig safety() const;
};

nlohmann::json to_json(const PipelineConfig& config);

/// Reads a flat JSON object. Missing keys keep their defaults; unknown keys
/// and wrongly typed values are rejected.
PipelineConfig from_json(const nlohmann::json& object);

/// Applies "key=value" overrides to a JSON object. Values that parse as JSON
/// keep that type; anything else is taken as a string.
void apply_overrides(nlohmann::json& object, const std::vector<std::string>& overrides);

/// Loads `path` (an empty path means "{}"), applies overrides, validates.
PipelineConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
PipelineConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides = {});

void validate(const PipelineConfig& config);

}  // namespace featgraph::config
