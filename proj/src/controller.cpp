#include "featgraph/controller.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <set>

#include "featgraph/agents.hpp"
#include "featgraph/error.hpp"
#include "featgraph/graph_io.hpp"
#include "featgraph/nn.hpp"

namespace featgraph::controller {

using nlohmann::json;

Reward compute_reward(double previous_metric, double next_metric, const FeatureGraph& graph) {
  Reward r;
  r.performance = next_metric - previous_metric;
  double sum = 0.0;
  for (const auto& node : graph.nodes()) sum += std::exp(-static_cast<double>(node.depth));
  r.complexity = graph.node_count() == 0 ? 0.0 : sum / static_cast<double>(graph.node_count());
  r.total = r.performance + r.complexity;
  return r;
}

std::vector<double> assign_rewards(double reward, std::size_t acting, config::RewardSplit split) {
  const double each = split == config::RewardSplit::Same || acting == 0 ? reward : reward / static_cast<double>(acting);
  return std::vector<double>(acting, each);
}

std::vector<std::size_t> equal_frequency_bins(std::span<const double> values, std::size_t bins) {
  const std::size_t n = values.size();
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto below = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), values[i]) - sorted.begin());
    out[i] = below * bins / n;
  }
  return out;
}

double discrete_mutual_information(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "mutual information needs equal lengths");
  if (a.empty()) return 0.0;
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  std::map<std::size_t, double> pa;
  std::map<std::size_t, double> pb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    pa[a[i]] += 1.0;
    pb[b[i]] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  double mi = 0.0;
  for (const auto& [key, count] : joint) {
    const double pxy = count / n;
    mi += pxy * std::log(count * n / (pa[key.first] * pb[key.second]));
  }
  return std::max(0.0, mi);
}

double mutual_information(std::span<const double> feature, std::span<const double> labels, tabular::TaskKind task,
                          std::size_t bins) {
  const auto f = equal_frequency_bins(feature, bins);
  std::vector<std::size_t> y;
  if (task == tabular::TaskKind::Classification) {
    y.reserve(labels.size());
    for (double v : labels) y.push_back(static_cast<std::size_t>(v));
  } else {
    y = equal_frequency_bins(labels, bins);
  }
  return discrete_mutual_information(f, y);
}

std::size_t node_wise_prune(FeatureGraph& graph, std::span<const double> labels, tabular::TaskKind task,
                            std::size_t k, std::size_t bins) {
  if (graph.derived_count() <= k) return 0;
  std::vector<std::pair<double, NodeId>> scored;
  for (const auto& node : graph.nodes()) {
    if (node.is_root()) continue;
    scored.emplace_back(mutual_information(node.train_column, labels, task, bins), node.id);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::set<NodeId> drop;
  for (std::size_t i = k; i < scored.size(); ++i) drop.insert(scored[i].second);
  return graph.remove_nodes(drop);
}

bool step_backtrack(EpisodeState& state, std::size_t node_cap) {
  if (state.metric < state.episode_best_metric || state.graph.node_count() > node_cap) {
    state.graph = FeatureGraph::restore(state.episode_best);
    state.metric = state.episode_best_metric;
    return true;
  }
  state.episode_best = state.graph.snapshot();
  state.episode_best_metric = state.metric;
  return false;
}

std::vector<NodeId> apply_cluster_transformation(FeatureGraph& graph, std::span<const NodeId> head,
                                                 const ops::OperationKind& op,
                                                 std::optional<std::span<const NodeId>> operand, std::size_t cap) {
  const bool binary = op.arity == ops::Arity::Binary;
  if (binary != operand.has_value())
    throw Error(ErrorCode::ArityMismatch, std::string(op.name) + (binary ? " needs" : " takes no") + " operand cluster");
  if (head.empty() || (operand && operand->empty())) throw Error(ErrorCode::NoClusters, "empty cluster");

  std::vector<NodeId> created;
  std::vector<NodeId> heads(head.begin(), head.end());
  std::sort(heads.begin(), heads.end());
  if (!binary) {
    for (NodeId h : heads) {
      const NodeId parents[] = {h};
      const auto result = graph.add_transform(op, parents);
      if (result.status == graph::AddStatus::Created) created.push_back(result.id);
    }
    return created;
  }
  std::vector<NodeId> operands(operand->begin(), operand->end());
  std::sort(operands.begin(), operands.end());
  for (NodeId h : heads) {
    for (NodeId o : operands) {
      if (created.size() >= cap) return created;
      const NodeId parents[] = {h, o};
      const auto result = graph.add_transform(op, parents);
      if (result.status == graph::AddStatus::Created) created.push_back(result.id);
    }
  }
  return created;
}

PhaseTimings& PhaseTimings::operator+=(const PhaseTimings& other) {
  reward_estimation += other.reward_estimation;
  agent_decision += other.agent_decision;
  graph_update += other.graph_update;
  pruning += other.pruning;
  clustering += other.clustering;
  return *this;
}

json to_json(const PhaseTimings& t) {
  return json{{"reward_estimation", t.reward_estimation},
              {"agent_decision", t.agent_decision},
              {"graph_update", t.graph_update},
              {"pruning", t.pruning},
              {"clustering", t.clustering}};
}

namespace {

json optional_index(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

json to_json(const StepRecord& s) {
  json prunes = json::array();
  for (const auto& e : s.prune_events)
    prunes.push_back({{"kind", e.kind}, {"removed", e.removed}, {"node_count", e.node_count}});
  return json{{"phase", s.phase},
              {"episode", s.episode},
              {"step", s.step},
              {"action", {{"head", optional_index(s.head)}, {"operation", s.operation}, {"operand", optional_index(s.operand)}}},
              {"parents", s.parents},
              {"nodes_created", s.nodes_created},
              {"node_count", s.node_count},
              {"previous_metric", s.previous_metric},
              {"metric", s.metric},
              {"reward", {{"performance", s.reward.performance}, {"complexity", s.reward.complexity}, {"total", s.reward.total}}},
              {"agent_rewards", s.agent_rewards},
              {"prune_events", prunes},
              {"episode_best_metric", s.episode_best_metric},
              {"best_metric", s.best_metric},
              {"error", s.error ? json(*s.error) : json(nullptr)},
              {"timings", to_json(s.timings)}};
}

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double seconds = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return seconds;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::uint64_t cv_seed(const PipelineConfig& config) { return derive_seed(config.seed, 0x5eed0001); }

/// Cross-validated metric, memoised on the ordered node formulas: a node's
/// column is a function of its formula, so equal keys mean equal matrices.
class MetricCache {
 public:
  MetricCache(const PipelineConfig& config, const tabular::Dataset& train)
      : config_(config), train_(train), spec_(config.evaluator_spec()) {}

  double operator()(const FeatureGraph& graph) {
    std::string key;
    for (const auto& node : graph.nodes()) {
      key += graph.trace_formula(node.id);
      key += '\n';
    }
    const auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    eval::Columns x;
    x.reserve(graph.node_count());
    for (const auto& node : graph.nodes()) x.push_back(node.train_column);
    const double metric = eval::cross_validate(spec_, x, train_.labels, train_.task, config_.cv_folds, cv_seed(config_));
    ++evaluations_;
    memo_.emplace(std::move(key), metric);
    return metric;
  }

  std::size_t evaluations() const { return evaluations_; }

 private:
  const PipelineConfig& config_;
  const tabular::Dataset& train_;
  eval::EvaluatorSpec spec_;
  std::map<std::string, double> memo_;
  std::size_t evaluations_ = 0;
};

struct Search {
  Search(const PipelineConfig& c, const tabular::Dataset& t, const RunOptions& o, std::string method)
      : config(c), train(t), options(o), metric(c, t) {
    report.method = std::move(method);
    report.config = config::to_json(c);
    operations = c.operation_set();
    roots = FeatureGraph::from_training(train, c.safety());
    node_cap = c.resolved_node_cap(train.feature_count());
    top_k = c.resolved_top_k(train.feature_count());
    node_wise_episodes = c.node_wise_episodes();
    report.raw_cv_metric = metric(roots);
    best = roots;
    best_metric = report.raw_cv_metric;
  }

  bool node_wise_phase(const std::string& phase, std::size_t episode) const {
    return phase == "train" && episode < node_wise_episodes;
  }

  void start_episode(const std::string& phase, std::size_t episode) {
    state.graph = config.episode_start == config::EpisodeStart::GlobalBest ? best : roots;
    state.metric = metric(state.graph);
    state.episode_best = state.graph.snapshot();
    state.episode_best_metric = state.metric;
    if (!node_wise_phase(phase, episode) && best_metric > state.episode_best_metric) {
      state.episode_best = best.snapshot();
      state.episode_best_metric = best_metric;
    }
  }

  /// Evaluates the post-update graph, computes rewards, applies the pruning
  /// schedule's second half and tracks the best graphs.
  void settle(StepRecord& rec, Stopwatch& watch, bool node_wise) {
    rec.previous_metric = state.metric;
    rec.metric = metric(state.graph);
    rec.reward = compute_reward(rec.previous_metric, rec.metric, state.graph);
    rec.timings.reward_estimation += watch.lap();

    state.metric = rec.metric;
    if (node_wise) {
      if (state.metric > state.episode_best_metric) {
        state.episode_best = state.graph.snapshot();
        state.episode_best_metric = state.metric;
      }
    } else {
      const std::size_t before = state.graph.node_count();
      if (step_backtrack(state, node_cap)) {
        rec.prune_events.push_back({"backtrack", before, state.graph.node_count()});
      }
    }
    if (state.metric > best_metric) {
      best = state.graph;
      best_metric = state.metric;
    }
    rec.node_count = state.graph.node_count();
    rec.episode_best_metric = state.episode_best_metric;
    rec.best_metric = best_metric;
    rec.timings.pruning += watch.lap();
  }

  void fail(StepRecord& rec, const Error& error, const graph::GraphSnapshot& before, double before_metric,
            const graph::GraphSnapshot& before_best, double before_best_metric) {
    state.graph = FeatureGraph::restore(before);
    state.metric = before_metric;
    state.episode_best = before_best;
    state.episode_best_metric = before_best_metric;
    rec.error = error.what();
    rec.node_count = state.graph.node_count();
    rec.previous_metric = before_metric;
    rec.metric = before_metric;
    rec.reward = compute_reward(before_metric, before_metric, state.graph);
    rec.episode_best_metric = state.episode_best_metric;
    rec.best_metric = best_metric;
    if (options.log != nullptr)
      *options.log << report.method << " " << rec.phase << " episode " << rec.episode << " step " << rec.step
                   << " skipped: " << error.what() << "\n";
  }

  void record(StepRecord rec) {
    report.timings += rec.timings;
    report.steps.push_back(std::move(rec));
  }

  void finish(std::chrono::steady_clock::time_point started) {
    report.best_graph = best;
    report.best_cv_metric = best_metric;
    report.evaluations = metric.evaluations();
    report.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }

  const PipelineConfig& config;
  const tabular::Dataset& train;
  const RunOptions& options;
  MetricCache metric;
  RunReport report;
  std::vector<ops::OperationKind> operations;
  FeatureGraph roots;
  FeatureGraph best;
  double best_metric = 0.0;
  std::size_t node_cap = 0;
  std::size_t top_k = 0;
  std::size_t node_wise_episodes = 0;
  EpisodeState state;
};

std::vector<std::vector<NodeId>> cluster_ids(const FeatureGraph& graph, const cluster::Clustering& clustering) {
  std::vector<std::vector<NodeId>> out;
  for (const auto& members : clustering.clusters) {
    std::vector<NodeId> ids;
    for (std::size_t m : members) ids.push_back(graph.nodes()[m].id);
    out.push_back(std::move(ids));
  }
  return out;
}

struct Observation {
  cluster::Clustering clustering;
  agents::StateEncoding encoding;
};

struct CascadeAgents {
  nn::RgcnEncoder encoder;
  nn::Tensor op_embedding;
  agents::AgentBundle head;
  agents::AgentBundle operation;
  agents::AgentBundle operand;
  std::size_t width = 0;

  CascadeAgents(const PipelineConfig& c, std::size_t op_count, Rng& rng) : width(c.encoder_output) {
    encoder = nn::RgcnEncoder(op_count + 1, {tabular::ColumnStats::kDimension, c.encoder_hidden, c.encoder_output}, rng);
    op_embedding = agents::one_hot_embedding(op_count, c.encoder_output);
    const std::size_t d = c.encoder_output;
    head = agents::AgentBundle({2 * d, c.predictor_hidden, 1}, rng, c.replay_capacity, c.batch_size,
                               c.target_sync_interval);
    operation = agents::AgentBundle({2 * d, c.predictor_hidden, op_count}, rng, c.replay_capacity, c.batch_size,
                                    c.target_sync_interval);
    operand = agents::AgentBundle({4 * d, c.predictor_hidden, 1}, rng, c.replay_capacity, c.batch_size,
                                  c.target_sync_interval);
  }

  Eigen::VectorXd op_row(std::size_t position) const { return op_embedding.row(static_cast<Eigen::Index>(position)).transpose(); }

  json checkpoints() const {
    return json{{"encoder", nn::to_json(encoder)},
                {"op_embedding", nn::tensor_to_json(op_embedding)},
                {"head", nn::to_json(head.prediction)},
                {"operation", nn::to_json(operation.prediction)},
                {"operand", nn::to_json(operand.prediction)}};
  }

  json parameter_counts() const {
    const auto embedding = static_cast<std::size_t>(op_embedding.size());
    const std::size_t total = encoder.parameter_count() + head.prediction.parameter_count() +
                              operation.prediction.parameter_count() + operand.prediction.parameter_count() + embedding;
    return json{{"encoder", encoder.parameter_count()},
                {"head", head.prediction.parameter_count()},
                {"operation", operation.prediction.parameter_count()},
                {"operand", operand.prediction.parameter_count()},
                {"op_embedding", embedding},
                {"total", total},
                {"head_assembly", encoder.parameter_count() + head.prediction.parameter_count()},
                {"head_assembly_reference", 53993}};
  }
};

std::size_t cluster_count_for(const PipelineConfig& c, std::size_t n) {
  return c.cluster_count != 0 ? std::min(c.cluster_count, n) : cluster::default_cluster_count(n);
}

std::vector<std::size_t> operand_choices(std::size_t clusters, std::size_t head, bool exclude_head) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < clusters; ++c)
    if (!exclude_head || c != head) out.push_back(c);
  return out;
}

std::size_t greedy_index(const nn::DenseNet& net, std::span<const Eigen::VectorXd> inputs) {
  std::size_t best = 0;
  double best_q = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const double q = net.forward(inputs[i])(0);
    if (q > best_q) {
      best_q = q;
      best = i;
    }
  }
  return best;
}

}  // namespace

json to_json(const RunReport& report) {
  json steps = json::array();
  for (const auto& s : report.steps) steps.push_back(to_json(s));
  json out{{"format", "featgraph-report"},
           {"version", 1},
           {"method", report.method},
           {"config", report.config},
           {"raw_cv_metric", report.raw_cv_metric},
           {"best_cv_metric", report.best_cv_metric},
           {"evaluations", report.evaluations},
           {"best_graph", {{"node_count", report.best_graph.node_count()}, {"formulas", report.best_graph.trace_all()}}},
           {"steps", steps},
           {"parameter_counts", report.parameter_counts},
           {"artifacts", report.artifacts},
           {"timings", {{"phases", to_json(report.timings)}, {"total_seconds", report.total_seconds}}}};
  if (report.final_metrics) {
    const auto& f = *report.final_metrics;
    out["final"] = {{"metric", f.metric}, {"raw", f.raw}, {"best", f.best}, {"best_feature_count", f.best_feature_count}};
  } else {
    out["final"] = nullptr;
  }
  return out;
}

json strip_timings(const json& report) {
  if (report.is_object()) {
    json out = json::object();
    for (const auto& [key, value] : report.items())
      if (key != "timings") out[key] = strip_timings(value);
    return out;
  }
  if (report.is_array()) {
    json out = json::array();
    for (const auto& item : report) out.push_back(strip_timings(item));
    return out;
  }
  return report;
}

double graph_cv_metric(const FeatureGraph& graph, const tabular::Dataset& train, const PipelineConfig& config) {
  MetricCache cache(config, train);
  return cache(graph);
}

RunReport run_training(const PipelineConfig& config, const tabular::Dataset& train, const RunOptions& options) {
  config::validate(config);
  const auto started = std::chrono::steady_clock::now();
  Search search(config, train, options, "tcto");
  Rng rng(derive_seed(config.seed, 0x5eed0002));
  CascadeAgents cascade(config, search.operations.size(), rng);
  const nn::Optimizer optimizer{config.learning_rate};
  const std::size_t d = config.encoder_output;
  const agents::EpsilonSchedule schedule{
      config.epsilon_start, config.epsilon_end,
      config.epsilon_decay_steps != 0 ? config.epsilon_decay_steps : config.train_episodes * config.steps_per_episode};
  std::size_t train_steps = 0;

  const auto observe = [&](const FeatureGraph& g, PhaseTimings& timings, Stopwatch& watch) {
    Observation obs;
    cluster::ClusterOptions options_c;
    options_c.signal = config.cluster_mode;
    options_c.dimension_from_k = config.spectral_dimension_from_k;
    obs.clustering = cluster::cluster_graph(g, cluster_count_for(config, g.node_count()), options_c);
    timings.clustering += watch.lap();
    obs.encoding = agents::encode_state(g, obs.clustering, cascade.encoder, search.operations);
    timings.agent_decision += watch.lap();
    return obs;
  };

  const auto run_episode = [&](const std::string& phase, std::size_t episode) {
    const bool learning = phase == "train";
    const bool node_wise = search.node_wise_phase(phase, episode);
    search.start_episode(phase, episode);
    std::optional<Observation> current;

    for (std::size_t step = 0; step < config.steps_per_episode; ++step) {
      StepRecord rec;
      rec.phase = phase;
      rec.episode = episode;
      rec.step = step;
      Stopwatch watch;
      const auto before = search.state.graph.snapshot();
      const double before_metric = search.state.metric;
      const auto before_best = search.state.episode_best;
      const double before_best_metric = search.state.episode_best_metric;
      const bool last = step + 1 == config.steps_per_episode;

      try {
        if (!current) current = observe(search.state.graph, rec.timings, watch);
        const Observation obs = std::move(*current);
        current.reset();
        const auto ids = cluster_ids(search.state.graph, obs.clustering);
        const auto& reps = obs.encoding.cluster_reps;
        const auto& graph_rep = obs.encoding.graph_rep;

        const double eps = learning ? schedule.at(train_steps) : config.epsilon_end;
        const auto head = agents::select_head(cascade.head, reps, graph_rep, eps, rng);
        const auto choices = operand_choices(reps.size(), head.index, config.exclude_head_from_operands);
        // With no operand cluster available only unary operations remain.
        const std::size_t op_count = search.operations.size();
        const auto allowed = std::make_unique<bool[]>(op_count);
        for (std::size_t i = 0; i < op_count; ++i)
          allowed[i] = search.operations[i].arity == ops::Arity::Unary || !choices.empty();
        const auto op_sel = agents::select_operation(cascade.operation, reps[head.index], graph_rep, eps, rng,
                                                     std::span<const bool>(allowed.get(), op_count));
        const auto& op = search.operations[op_sel.index];
        const bool binary = op.arity == ops::Arity::Binary;
        const Eigen::VectorXd op_vec = cascade.op_row(op_sel.index);

        std::optional<std::size_t> operand_cluster;
        if (binary) {
          std::vector<Eigen::VectorXd> candidates;
          for (std::size_t c : choices) candidates.push_back(reps[c]);
          const auto pick = agents::select_operand(cascade.operand, reps[head.index], graph_rep, op_vec, candidates, eps, rng);
          operand_cluster = choices[pick.index];
        }
        rec.head = head.index;
        rec.operation = std::string(op.name);
        rec.operand = operand_cluster;
        rec.timings.agent_decision += watch.lap();

        std::optional<std::span<const NodeId>> operand_ids;
        if (operand_cluster) operand_ids = std::span<const NodeId>(ids[*operand_cluster]);
        const auto created = apply_cluster_transformation(search.state.graph, ids[head.index], op, operand_ids,
                                                          config.max_new_features_per_step);
        rec.nodes_created = created.size();
        rec.timings.graph_update += watch.lap();

        if (node_wise && search.state.graph.node_count() > search.node_cap) {
          const std::size_t removed = node_wise_prune(search.state.graph, train.labels, train.task, search.top_k);
          rec.prune_events.push_back({"node_wise", removed, search.state.graph.node_count()});
        }
        rec.timings.pruning += watch.lap();

        search.settle(rec, watch, node_wise);

        const std::size_t acting = binary ? 3 : 2;
        rec.agent_rewards = assign_rewards(rec.reward.total, acting, config.reward_split);

        if (!last) current = observe(search.state.graph, rec.timings, watch);

        if (learning) {
          const Eigen::VectorXd head_input = agents::concat({&reps[head.index], &graph_rep});
          std::vector<Eigen::VectorXd> next_heads;
          std::size_t next_head = 0;
          if (current) {
            for (const auto& rep : current->encoding.cluster_reps)
              next_heads.push_back(agents::concat({&rep, &current->encoding.graph_rep}));
            next_head = greedy_index(cascade.head.prediction, next_heads);
          }

          auto context = std::make_shared<agents::EncoderContext>();
          context->features = obs.encoding.features;
          context->graph = obs.encoding.relations;
          context->members = obs.clustering.clusters[head.index];
          agents::Transition head_t{head_input, 0, rec.agent_rewards[0], next_heads, last, std::nullopt, context};
          agents::store_transition(cascade.head, std::move(head_t));

          std::vector<Eigen::VectorXd> next_ops;
          if (current) next_ops.push_back(next_heads[next_head]);
          agents::Transition op_t{head_input, op_sel.index, rec.agent_rewards[1], next_ops, last, std::nullopt, nullptr};
          agents::store_transition(cascade.operation, std::move(op_t));

          if (binary) {
            const Eigen::VectorXd& operand_rep = reps[*operand_cluster];
            const Eigen::VectorXd operand_input = agents::concat({&reps[head.index], &graph_rep, &op_vec, &operand_rep});
            std::vector<Eigen::VectorXd> next_operands;
            if (current) {
              const auto& next_reps = current->encoding.cluster_reps;
              for (std::size_t c : operand_choices(next_reps.size(), next_head, config.exclude_head_from_operands))
                next_operands.push_back(
                    agents::concat({&next_reps[next_head], &current->encoding.graph_rep, &op_vec, &next_reps[c]}));
            }
            const bool terminal = last || next_operands.empty();
            agents::Transition operand_t{operand_input, 0, rec.agent_rewards[2], next_operands, terminal,
                                         op_sel.index, nullptr};
            agents::store_transition(cascade.operand, std::move(operand_t));
          }

          agents::train_step(cascade.head, config.gamma, optimizer, rng, {&cascade.encoder, nullptr, 0});
          agents::train_step(cascade.operation, config.gamma, optimizer, rng);
          agents::train_step(cascade.operand, config.gamma, optimizer, rng, {nullptr, &cascade.op_embedding, 2 * d});
          agents::maybe_sync_targets(cascade.head);
          agents::maybe_sync_targets(cascade.operation);
          agents::maybe_sync_targets(cascade.operand);
          ++train_steps;
          rec.timings.agent_decision += watch.lap();
        }
      } catch (const Error& error) {
        search.fail(rec, error, before, before_metric, before_best, before_best_metric);
        current.reset();
        if (learning) ++train_steps;
      }
      search.record(std::move(rec));
    }
  };

  for (std::size_t e = 0; e < config.train_episodes; ++e) run_episode("train", e);
  for (std::size_t e = 0; e < config.test_episodes; ++e) run_episode("test", e);

  search.report.agents = cascade.checkpoints();
  search.report.parameter_counts = cascade.parameter_counts();
  search.finish(started);
  return std::move(search.report);
}

namespace {

using StepAction = std::function<void(Search&, StepRecord&, Rng&)>;

RunReport run_baseline(const PipelineConfig& config, const tabular::Dataset& train, const RunOptions& options,
                       const std::string& method, const StepAction& act) {
  config::validate(config);
  const auto started = std::chrono::steady_clock::now();
  Search search(config, train, options, method);
  Rng rng(derive_seed(config.seed, method == "rdg" ? 0x5eed0003 : 0x5eed0004));

  const auto run_episode = [&](const std::string& phase, std::size_t episode) {
    search.start_episode(phase, episode);
    for (std::size_t step = 0; step < config.steps_per_episode; ++step) {
      StepRecord rec;
      rec.phase = phase;
      rec.episode = episode;
      rec.step = step;
      Stopwatch watch;
      const auto before = search.state.graph.snapshot();
      const double before_metric = search.state.metric;
      const auto before_best = search.state.episode_best;
      const double before_best_metric = search.state.episode_best_metric;
      try {
        act(search, rec, rng);
        rec.timings.graph_update += watch.lap();
        // Baselines keep the cap by pruning and always accept the step.
        rec.previous_metric = search.state.metric;
        rec.metric = search.metric(search.state.graph);
        rec.reward = compute_reward(rec.previous_metric, rec.metric, search.state.graph);
        rec.agent_rewards = {rec.reward.total};
        rec.timings.reward_estimation += watch.lap();
        search.state.metric = rec.metric;
        if (search.state.metric > search.state.episode_best_metric) {
          search.state.episode_best = search.state.graph.snapshot();
          search.state.episode_best_metric = search.state.metric;
        }
        if (search.state.metric > search.best_metric) {
          search.best = search.state.graph;
          search.best_metric = search.state.metric;
        }
        rec.node_count = search.state.graph.node_count();
        rec.episode_best_metric = search.state.episode_best_metric;
        rec.best_metric = search.best_metric;
      } catch (const Error& error) {
        search.fail(rec, error, before, before_metric, before_best, before_best_metric);
      }
      search.record(std::move(rec));
    }
  };

  for (std::size_t e = 0; e < config.train_episodes; ++e) run_episode("train", e);
  for (std::size_t e = 0; e < config.test_episodes; ++e) run_episode("test", e);
  search.report.agents = nullptr;
  search.report.parameter_counts = json::object();
  search.finish(started);
  return std::move(search.report);
}

std::vector<NodeId> node_ids(const FeatureGraph& graph) {
  std::vector<NodeId> ids;
  for (const auto& node : graph.nodes()) ids.push_back(node.id);
  return ids;
}

}  // namespace

RunReport run_baseline_rdg(const PipelineConfig& config, const tabular::Dataset& train, const RunOptions& options) {
  return run_baseline(config, train, options, "rdg", [](Search& s, StepRecord& rec, Rng& rng) {
    auto& g = s.state.graph;
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < s.operations.size(); ++i)
      if (s.operations[i].arity == ops::Arity::Unary || g.node_count() >= 2) usable.push_back(i);
    const auto& op = s.operations[usable[uniform_index(rng, usable.size())]];
    const auto ids = node_ids(g);
    std::vector<NodeId> parents;
    if (op.arity == ops::Arity::Unary) {
      parents = {ids[uniform_index(rng, ids.size())]};
    } else {
      for (std::size_t i : sample_without_replacement(ids.size(), 2, rng)) parents.push_back(ids[i]);
    }
    rec.operation = std::string(op.name);
    rec.parents = parents;
    const auto result = g.add_transform(op, parents);
    rec.nodes_created = result.status == graph::AddStatus::Created ? 1 : 0;

    if (g.node_count() > s.node_cap) {
      std::vector<NodeId> derived;
      for (const auto& node : g.nodes())
        if (!node.is_root()) derived.push_back(node.id);
      shuffle(derived, rng);
      const std::size_t keep = s.node_cap > g.root_count() ? s.node_cap - g.root_count() : 0;
      const std::set<NodeId> drop(derived.begin() + static_cast<std::ptrdiff_t>(std::min(keep, derived.size())),
                                  derived.end());
      const std::size_t removed = g.remove_nodes(drop);
      rec.prune_events.push_back({"random", removed, g.node_count()});
    }
  });
}

RunReport run_baseline_erg(const PipelineConfig& config, const tabular::Dataset& train, const RunOptions& options) {
  return run_baseline(config, train, options, "erg", [](Search& s, StepRecord& rec, Rng& rng) {
    auto& g = s.state.graph;
    const auto& op = s.operations[uniform_index(rng, s.operations.size())];
    const auto ids = node_ids(g);
    rec.operation = std::string(op.name);
    std::size_t created = 0;
    if (op.arity == ops::Arity::Unary) {
      for (NodeId id : ids) {
        const NodeId parents[] = {id};
        if (g.add_transform(op, parents).status == graph::AddStatus::Created) ++created;
      }
    } else {
      for (std::size_t i = 0; i < ids.size() && created < s.config.max_new_features_per_step; ++i) {
        for (std::size_t j = i + 1; j < ids.size() && created < s.config.max_new_features_per_step; ++j) {
          const NodeId parents[] = {ids[i], ids[j]};
          if (g.add_transform(op, parents).status == graph::AddStatus::Created) ++created;
        }
      }
    }
    rec.nodes_created = created;
    if (g.node_count() > s.node_cap) {
      const std::size_t k = s.node_cap > g.root_count() ? s.node_cap - g.root_count() : 0;
      const std::size_t removed = node_wise_prune(g, s.train.labels, s.train.task, k);
      rec.prune_events.push_back({"node_wise", removed, g.node_count()});
    }
  });
}

double evaluate_final(const FeatureGraph& best, const tabular::Dataset& train, const tabular::Dataset& test,
                      const eval::EvaluatorSpec& spec, std::uint64_t seed) {
  if (train.names != best.root_names() || test.names != best.root_names())
    throw Error(ErrorCode::SchemaMismatch, "dataset columns do not match the graph's original features");
  const auto train_x = best.materialize(train);
  const auto test_x = best.materialize(test);
  return eval::holdout_score(spec, train_x, train.labels, test_x, test.labels, train.task, seed);
}

std::uint64_t final_seed(const PipelineConfig& config) { return derive_seed(config.seed, 0x5eed0005); }

RunReport run_pipeline(const PipelineConfig& config, const tabular::Dataset& data, Method method,
                       const RunOptions& options) {
  const auto [train, test] = tabular::split(data, {config.train_fraction, config.seed});
  RunReport report;
  switch (method) {
    case Method::Tcto: report = run_training(config, train, options); break;
    case Method::Rdg: report = run_baseline_rdg(config, train, options); break;
    case Method::Erg: report = run_baseline_erg(config, train, options); break;
  }
  const auto spec = config.evaluator_spec();
  FinalMetrics final;
  final.metric = train.task == tabular::TaskKind::Classification ? "f1" : "1-rae";
  final.raw = evaluate_final(FeatureGraph::from_training(train, config.safety()), train, test, spec, final_seed(config));
  final.best = evaluate_final(report.best_graph, train, test, spec, final_seed(config));
  final.best_feature_count = report.best_graph.node_count();
  report.final_metrics = final;
  return report;
}

}  // namespace featgraph::controller
