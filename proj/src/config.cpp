#include "featgraph/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "featgraph/error.hpp"

namespace featgraph::config {

using nlohmann::json;

namespace {

std::size_t as_count(const std::string& key, const json& value) {
  if (value.is_number_unsigned()) return value.get<std::size_t>();
  if (value.is_number_integer()) {
    if (value.get<std::int64_t>() < 0) throw Error(ErrorCode::OutOfRange, key + " must be non-negative");
    return static_cast<std::size_t>(value.get<std::int64_t>());
  }
  throw Error(ErrorCode::MalformedConfig, key + " must be an integer");
}

double as_real(const std::string& key, const json& value) {
  if (!value.is_number()) throw Error(ErrorCode::MalformedConfig, key + " must be a number");
  return value.get<double>();
}

bool as_bool(const std::string& key, const json& value) {
  if (!value.is_boolean()) throw Error(ErrorCode::MalformedConfig, key + " must be true or false");
  return value.get<bool>();
}

std::string as_text(const std::string& key, const json& value) {
  if (!value.is_string()) throw Error(ErrorCode::MalformedConfig, key + " must be a string");
  return value.get<std::string>();
}

std::string_view signal_name(cluster::ClusterSignal s) {
  switch (s) {
    case cluster::ClusterSignal::Combined: return "combined";
    case cluster::ClusterSignal::StructureOnly: return "structure";
    case cluster::ClusterSignal::FeatureOnly: return "feature";
  }
  return "combined";
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const json&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    const auto count = [&t](const char* key, std::size_t PipelineConfig::*field) {
      t[key] = [field](PipelineConfig& c, const std::string& k, const json& v) { c.*field = as_count(k, v); };
    };
    const auto real = [&t](const char* key, double PipelineConfig::*field) {
      t[key] = [field](PipelineConfig& c, const std::string& k, const json& v) { c.*field = as_real(k, v); };
    };
    count("train_episodes", &PipelineConfig::train_episodes);
    count("steps_per_episode", &PipelineConfig::steps_per_episode);
    count("test_episodes", &PipelineConfig::test_episodes);
    real("gamma", &PipelineConfig::gamma);
    real("epsilon_start", &PipelineConfig::epsilon_start);
    real("epsilon_end", &PipelineConfig::epsilon_end);
    count("epsilon_decay_steps", &PipelineConfig::epsilon_decay_steps);
    count("cluster_count", &PipelineConfig::cluster_count);
    count("node_cap", &PipelineConfig::node_cap);
    count("prune_top_k", &PipelineConfig::prune_top_k);
    count("max_new_features_per_step", &PipelineConfig::max_new_features_per_step);
    real("prune_fraction", &PipelineConfig::prune_fraction);
    t["seed"] = [](PipelineConfig& c, const std::string& k, const json& v) { c.seed = as_count(k, v); };
    t["evaluator"] = [](PipelineConfig& c, const std::string& k, const json& v) {
      c.evaluator = eval::parse_evaluator(as_text(k, v));
    };
    t["f1_averaging"] = [](PipelineConfig& c, const std::string& k, const json& v) {
      c.f1_averaging = eval::parse_averaging(as_text(k, v));
    };
    count("cv_folds", &PipelineConfig::cv_folds);
    count("forest_trees", &PipelineConfig::forest_trees);
    count("forest_max_depth", &PipelineConfig::forest_max_depth);
    count("forest_min_samples_leaf", &PipelineConfig::forest_min_samples_leaf);
    count("forest_max_features", &PipelineConfig::forest_max_features);
    real("ridge_lambda", &PipelineConfig::ridge_lambda);
    count("encoder_hidden", &PipelineConfig::encoder_hidden);
    count("encoder_output", &PipelineConfig::encoder_output);
    count("predictor_hidden", &PipelineConfig::predictor_hidden);
    count("target_sync_interval", &PipelineConfig::target_sync_interval);
    count("replay_capacity", &PipelineConfig::replay_capacity);
    count("batch_size", &PipelineConfig::batch_size);
    real("learning_rate", &PipelineConfig::learning_rate);
    real("train_fraction", &PipelineConfig::train_fraction);
    t["cluster_mode"] = [](PipelineConfig& c, const std::string& k, const json& v) {
      const auto text = as_text(k, v);
      if (text == "combined") c.cluster_mode = cluster::ClusterSignal::Combined;
      else if (text == "structure") c.cluster_mode = cluster::ClusterSignal::StructureOnly;
      else if (text == "feature") c.cluster_mode = cluster::ClusterSignal::FeatureOnly;
      else throw Error(ErrorCode::OutOfRange, "cluster_mode must be combined, structure or feature");
    };
    t["spectral_dimension"] = [](PipelineConfig& c, const std::string& k, const json& v) {
      const auto text = as_text(k, v);
      if (text == "cluster_count") c.spectral_dimension_from_k = true;
      else if (text == "node_count") c.spectral_dimension_from_k = false;
      else throw Error(ErrorCode::OutOfRange, "spectral_dimension must be cluster_count or node_count");
    };
    t["episode_start"] = [](PipelineConfig& c, const std::string& k, const json& v) {
      const auto text = as_text(k, v);
      if (text == "roots") c.episode_start = EpisodeStart::Roots;
      else if (text == "global_best") c.episode_start = EpisodeStart::GlobalBest;
      else throw Error(ErrorCode::OutOfRange, "episode_start must be roots or global_best");
    };
    t["reward_split"] = [](PipelineConfig& c, const std::string& k, const json& v) {
      const auto text = as_text(k, v);
      if (text == "same") c.reward_split = RewardSplit::Same;
      else if (text == "divided") c.reward_split = RewardSplit::Divided;
      else throw Error(ErrorCode::OutOfRange, "reward_split must be same or divided");
    };
    t["exclude_head_from_operands"] = [](PipelineConfig& c, const std::string& k, const json& v) {
      c.exclude_head_from_operands = as_bool(k, v);
    };
    t["operations"] = [](PipelineConfig& c, const std::string& k, const json& v) {
      if (!v.is_array()) throw Error(ErrorCode::MalformedConfig, k + " must be a list of operation names");
      c.operations.clear();
      for (const auto& item : v) c.operations.push_back(as_text(k, item));
    };
    t["safe_math"] = [](PipelineConfig& c, const std::string& k, const json& v) { c.safe_math = as_bool(k, v); };
    t["data_path"] = [](PipelineConfig& c, const std::string& k, const json& v) { c.data_path = as_text(k, v); };
    t["label_column"] = [](PipelineConfig& c, const std::string& k, const json& v) { c.label_column = as_text(k, v); };
    t["task"] = [](PipelineConfig& c, const std::string& k, const json& v) {
      try {
        c.task = tabular::parse_task(as_text(k, v));
      } catch (const Error&) {
        throw Error(ErrorCode::OutOfRange, "task must be classification or regression");
      }
    };
    return t;
  }();
  return table;
}

}  // namespace

std::size_t PipelineConfig::resolved_node_cap(std::size_t feature_count) const {
  return node_cap != 0 ? node_cap : 4 * feature_count;
}

std::size_t PipelineConfig::resolved_top_k(std::size_t feature_count) const {
  return prune_top_k != 0 ? prune_top_k : 2 * feature_count;
}

std::size_t PipelineConfig::node_wise_episodes() const {
  return static_cast<std::size_t>(std::ceil(prune_fraction * static_cast<double>(train_episodes) - 1e-9));
}

eval::EvaluatorSpec PipelineConfig::evaluator_spec() const {
  eval::EvaluatorSpec spec;
  spec.kind = evaluator;
  spec.averaging = f1_averaging;
  spec.forest.tree_count = forest_trees;
  spec.forest.max_depth = forest_max_depth;
  spec.forest.min_samples_leaf = forest_min_samples_leaf;
  spec.forest.max_features = forest_max_features;
  spec.ridge_lambda = ridge_lambda;
  return spec;
}

std::vector<ops::OperationKind> PipelineConfig::operation_set() const {
  if (operations.empty()) return ops::default_operation_set();
  std::vector<ops::OperationKind> out;
  for (const auto& name : operations) {
    const auto& op = ops::operation_by_name(name);
    for (const auto& existing : out)
      if (existing.id == op.id) throw Error(ErrorCode::OutOfRange, "operation '" + name + "' listed twice");
    out.push_back(op);
  }
  return out;
}

ops::SafetyConfig PipelineConfig::safety() const {
  ops::SafetyConfig s;
  s.enabled = safe_math;
  return s;
}

json to_json(const PipelineConfig& c) {
  json ops_list = json::array();
  for (const auto& op : c.operation_set()) ops_list.push_back(std::string(op.name));
  return json{
      {"train_episodes", c.train_episodes},
      {"steps_per_episode", c.steps_per_episode},
      {"test_episodes", c.test_episodes},
      {"gamma", c.gamma},
      {"epsilon_start", c.epsilon_start},
      {"epsilon_end", c.epsilon_end},
      {"epsilon_decay_steps", c.epsilon_decay_steps},
      {"cluster_count", c.cluster_count},
      {"node_cap", c.node_cap},
      {"prune_top_k", c.prune_top_k},
      {"max_new_features_per_step", c.max_new_features_per_step},
      {"prune_fraction", c.prune_fraction},
      {"seed", c.seed},
      {"evaluator", std::string(eval::to_string(c.evaluator))},
      {"f1_averaging", std::string(eval::to_string(c.f1_averaging))},
      {"cv_folds", c.cv_folds},
      {"forest_trees", c.forest_trees},
      {"forest_max_depth", c.forest_max_depth},
      {"forest_min_samples_leaf", c.forest_min_samples_leaf},
      {"forest_max_features", c.forest_max_features},
      {"ridge_lambda", c.ridge_lambda},
      {"encoder_hidden", c.encoder_hidden},
      {"encoder_output", c.encoder_output},
      {"predictor_hidden", c.predictor_hidden},
      {"target_sync_interval", c.target_sync_interval},
      {"replay_capacity", c.replay_capacity},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"train_fraction", c.train_fraction},
      {"cluster_mode", std::string(signal_name(c.cluster_mode))},
      {"spectral_dimension", c.spectral_dimension_from_k ? "cluster_count" : "node_count"},
      {"episode_start", c.episode_start == EpisodeStart::Roots ? "roots" : "global_best"},
      {"reward_split", c.reward_split == RewardSplit::Same ? "same" : "divided"},
      {"exclude_head_from_operands", c.exclude_head_from_operands},
      {"operations", ops_list},
      {"safe_math", c.safe_math},
      {"data_path", c.data_path},
      {"label_column", c.label_column},
      {"task", tabular::to_string(c.task)},
  };
}

PipelineConfig from_json(const json& object) {
  if (!object.is_object()) throw Error(ErrorCode::MalformedConfig, "configuration must be a JSON object");
  PipelineConfig config;
  const auto& table = setters();
  for (const auto& [key, value] : object.items()) {
    const auto it = table.find(key);
    if (it == table.end()) throw Error(ErrorCode::UnknownKey, "unknown configuration key '" + key + "'");
    it->second(config, key, value);
  }
  validate(config);
  return config;
}

void apply_overrides(json& object, const std::vector<std::string>& overrides) {
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw Error(ErrorCode::MalformedConfig, "override '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq);
    const std::string text = item.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    object[key] = value;
  }
}

PipelineConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides) {
  json object = json::object();
  const bool blank = text.find_first_not_of(" \t\r\n") == std::string::npos;
  if (!blank) {
    object = json::parse(text, nullptr, false);
    if (object.is_discarded()) throw Error(ErrorCode::MalformedConfig, "configuration is not valid JSON");
  }
  if (!object.is_object()) throw Error(ErrorCode::MalformedConfig, "configuration must be a JSON object");
  apply_overrides(object, overrides);
  return from_json(object);
}

PipelineConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  if (path.empty()) return parse_config_text("", overrides);
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read configuration " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), overrides);
}

void validate(const PipelineConfig& c) {
  const auto positive = [](const char* key, std::size_t v) {
    if (v == 0) throw Error(ErrorCode::OutOfRange, std::string(key) + " must be positive");
  };
  const auto unit = [](const char* key, double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::OutOfRange, std::string(key) + " must lie in [0, 1]");
  };
  positive("train_episodes", c.train_episodes);
  positive("steps_per_episode", c.steps_per_episode);
  positive("max_new_features_per_step", c.max_new_features_per_step);
  positive("forest_trees", c.forest_trees);
  positive("forest_max_depth", c.forest_max_depth);
  positive("forest_min_samples_leaf", c.forest_min_samples_leaf);
  positive("encoder_hidden", c.encoder_hidden);
  positive("encoder_output", c.encoder_output);
  positive("predictor_hidden", c.predictor_hidden);
  positive("target_sync_interval", c.target_sync_interval);
  positive("replay_capacity", c.replay_capacity);
  positive("batch_size", c.batch_size);
  unit("gamma", c.gamma);
  unit("epsilon_start", c.epsilon_start);
  unit("epsilon_end", c.epsilon_end);
  unit("prune_fraction", c.prune_fraction);
  if (c.cv_folds < 2) throw Error(ErrorCode::OutOfRange, "cv_folds must be at least 2");
  if (!(c.learning_rate > 0.0)) throw Error(ErrorCode::OutOfRange, "learning_rate must be positive");
  if (!(c.ridge_lambda >= 0.0)) throw Error(ErrorCode::OutOfRange, "ridge_lambda must be non-negative");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0))
    throw Error(ErrorCode::OutOfRange, "train_fraction must lie in (0, 1)");
  if (c.batch_size > c.replay_capacity) throw Error(ErrorCode::OutOfRange, "batch_size exceeds replay_capacity");
  const auto operations = c.operation_set();
  if (operations.empty()) throw Error(ErrorCode::OutOfRange, "operation set is empty");
  if (operations.size() > c.encoder_output)
    throw Error(ErrorCode::OutOfRange, "operation embedding needs encoder_output >= operation count");
}

}  // namespace featgraph::config
