#include "featgraph/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "featgraph/error.hpp"

namespace featgraph::agents {

double EpsilonSchedule::at(std::size_t step) const {
  if (horizon == 0) return end;
  const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(horizon));
  const double value = start - (start - end) * progress;
  return std::clamp(value, std::min(start, end), std::max(start, end));
}

void ReplayBuffer::push(Transition transition) {
  if (capacity_ == 0) return;
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(transition));
}

AgentBundle::AgentBundle(std::vector<std::size_t> dims, Rng& rng, std::size_t capacity, std::size_t batch,
                         std::size_t sync_every)
    : prediction(std::move(dims), rng), buffer(capacity), batch_size(batch), sync_interval(sync_every) {
  target = prediction;
}

Selection epsilon_greedy(std::span<const double> scores, double epsilon, Rng& rng) {
  if (scores.empty()) throw Error(ErrorCode::NoCandidates, "no candidates to select from");
  if (scores.size() > 1 && uniform_real(rng) < epsilon) {
    const std::size_t pick = uniform_index(rng, scores.size());
    return {pick, scores[pick]};
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return {best, scores[best]};
}

Eigen::VectorXd concat(std::initializer_list<const Eigen::VectorXd*> parts) {
  Eigen::Index size = 0;
  for (const auto* p : parts) size += p->size();
  Eigen::VectorXd out(size);
  Eigen::Index offset = 0;
  for (const auto* p : parts) {
    out.segment(offset, p->size()) = *p;
    offset += p->size();
  }
  return out;
}

Selection select_head(const AgentBundle& head, std::span<const Eigen::VectorXd> cluster_reps,
                      const Eigen::VectorXd& graph_rep, double epsilon, Rng& rng) {
  if (cluster_reps.empty()) throw Error(ErrorCode::NoClusters, "head agent needs at least one cluster");
  std::vector<double> scores;
  scores.reserve(cluster_reps.size());
  for (const auto& rep : cluster_reps) scores.push_back(head.prediction.forward(concat({&rep, &graph_rep}))(0));
  return epsilon_greedy(scores, epsilon, rng);
}

Selection select_operation(const AgentBundle& operation, const Eigen::VectorXd& head_rep, const Eigen::VectorXd& graph_rep,
                           double epsilon, Rng& rng, std::span<const bool> allowed) {
  const Eigen::VectorXd q = operation.prediction.forward(concat({&head_rep, &graph_rep}));
  std::vector<std::size_t> positions;
  std::vector<double> scores;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (!allowed.empty() && !allowed[static_cast<std::size_t>(i)]) continue;
    positions.push_back(static_cast<std::size_t>(i));
    scores.push_back(q(i));
  }
  if (positions.empty()) throw Error(ErrorCode::NoCandidates, "every operation is masked out");
  const auto pick = epsilon_greedy(scores, epsilon, rng);
  return {positions[pick.index], pick.q};
}

Selection select_operand(const AgentBundle& operand, const Eigen::VectorXd& head_rep, const Eigen::VectorXd& graph_rep,
                         const Eigen::VectorXd& op_embedding, std::span<const Eigen::VectorXd> candidate_reps,
                         double epsilon, Rng& rng) {
  if (candidate_reps.empty()) throw Error(ErrorCode::NoCandidates, "operand agent has no candidate cluster");
  std::vector<double> scores;
  scores.reserve(candidate_reps.size());
  for (const auto& rep : candidate_reps) {
    scores.push_back(operand.prediction.forward(concat({&head_rep, &graph_rep, &op_embedding, &rep}))(0));
  }
  return epsilon_greedy(scores, epsilon, rng);
}

void store_transition(AgentBundle& bundle, Transition transition) { bundle.buffer.push(std::move(transition)); }

double td_target(double reward, double gamma, double max_next, bool terminal) {
  return terminal ? reward : reward + gamma * max_next;
}

double max_next_q(const nn::DenseNet& target, const Transition& transition) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& input : transition.next_inputs) best = std::max(best, target.forward(input).maxCoeff());
  return transition.next_inputs.empty() ? 0.0 : best;
}

std::optional<double> train_step(AgentBundle& bundle, double gamma, const nn::Optimizer& optimizer, Rng& rng,
                                 const TrainLinks& links) {
  if (bundle.buffer.size() < bundle.batch_size || bundle.batch_size == 0) return std::nullopt;
  const auto batch = sample_without_replacement(bundle.buffer.size(), bundle.batch_size, rng);
  const double scale = 1.0 / static_cast<double>(batch.size());

  auto net_params = bundle.prediction.parameters();
  std::vector<nn::Tensor> net_grads;
  for (const auto* p : net_params) net_grads.push_back(nn::Tensor::Zero(p->rows(), p->cols()));

  std::vector<nn::Tensor*> encoder_params;
  std::vector<nn::Tensor> encoder_grads;
  if (links.encoder != nullptr) {
    encoder_params = links.encoder->parameters();
    for (const auto* p : encoder_params) encoder_grads.push_back(nn::Tensor::Zero(p->rows(), p->cols()));
  }
  nn::Tensor embedding_grad;
  if (links.op_embedding != nullptr) embedding_grad = nn::Tensor::Zero(links.op_embedding->rows(), links.op_embedding->cols());

  double loss = 0.0;
  for (std::size_t index : batch) {
    const Transition& t = bundle.buffer[index];
    Eigen::VectorXd input = t.input;

    nn::RgcnEncoder::Cache encoder_cache;
    nn::Tensor node_reps;
    if (links.encoder != nullptr && t.encoder) {
      node_reps = links.encoder->forward(t.encoder->features, t.encoder->graph, &encoder_cache);
      const auto all = static_cast<std::size_t>(node_reps.rows());
      std::vector<std::size_t> every(all);
      for (std::size_t i = 0; i < all; ++i) every[i] = i;
      const Eigen::VectorXd cluster_rep = mean_rows(node_reps, t.encoder->members);
      const Eigen::VectorXd graph_rep = mean_rows(node_reps, every);
      input = concat({&cluster_rep, &graph_rep});
    }
    if (links.op_embedding != nullptr && t.op_row) {
      input.segment(static_cast<Eigen::Index>(links.op_offset), links.op_embedding->cols()) =
          links.op_embedding->row(static_cast<Eigen::Index>(*t.op_row)).transpose();
    }

    nn::DenseNet::Cache cache;
    const Eigen::VectorXd q = bundle.prediction.forward(input, &cache);
    const double target = td_target(t.reward, gamma, t.terminal ? 0.0 : max_next_q(bundle.target, t), t.terminal);
    const double error = q(static_cast<Eigen::Index>(t.action)) - target;
    loss += error * error * scale;

    Eigen::VectorXd upstream = Eigen::VectorXd::Zero(q.size());
    upstream(static_cast<Eigen::Index>(t.action)) = 2.0 * error * scale;
    const auto grads = bundle.prediction.backward(cache, upstream);
    for (std::size_t i = 0; i < net_grads.size(); ++i) net_grads[i] += grads.parameters[i];

    if (links.encoder != nullptr && t.encoder) {
      const Eigen::Index width = node_reps.cols();
      const Eigen::Index n = node_reps.rows();
      nn::Tensor d_nodes = nn::Tensor::Zero(n, width);
      const Eigen::VectorXd d_cluster = grads.input.head(width);
      const Eigen::VectorXd d_graph = grads.input.tail(width);
      for (std::size_t m : t.encoder->members) {
        d_nodes.row(static_cast<Eigen::Index>(m)) +=
            d_cluster.transpose() / static_cast<double>(t.encoder->members.size());
      }
      for (Eigen::Index i = 0; i < n; ++i) d_nodes.row(i) += d_graph.transpose() / static_cast<double>(n);
      const auto enc_grads = links.encoder->backward(encoder_cache, t.encoder->graph, d_nodes);
      for (std::size_t i = 0; i < encoder_grads.size(); ++i) encoder_grads[i] += enc_grads.parameters[i];
    }
    if (links.op_embedding != nullptr && t.op_row) {
      embedding_grad.row(static_cast<Eigen::Index>(*t.op_row)) +=
          grads.input.segment(static_cast<Eigen::Index>(links.op_offset), links.op_embedding->cols()).transpose();
    }
  }

  nn::sgd_step(optimizer, net_params, net_grads);
  if (links.encoder != nullptr) nn::sgd_step(optimizer, encoder_params, encoder_grads);
  if (links.op_embedding != nullptr) {
    nn::Tensor* table = links.op_embedding;
    nn::sgd_step(optimizer, std::span<nn::Tensor* const>(&table, 1), std::span<const nn::Tensor>(&embedding_grad, 1));
  }
  return loss;
}

bool maybe_sync_targets(AgentBundle& bundle) {
  ++bundle.steps_since_sync;
  if (bundle.steps_since_sync < bundle.sync_interval) return false;
  nn::copy_parameters(bundle.prediction, bundle.target);
  bundle.steps_since_sync = 0;
  return true;
}

double squash(double x) { return std::copysign(std::log1p(std::abs(x)), x); }

nn::Tensor node_features(const graph::FeatureGraph& graph) {
  nn::Tensor features(static_cast<Eigen::Index>(graph.node_count()), static_cast<Eigen::Index>(tabular::ColumnStats::kDimension));
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    const auto stats = graph.nodes()[i].embedding.as_array();
    for (std::size_t j = 0; j < stats.size(); ++j) features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = squash(stats[j]);
  }
  return features;
}

nn::RelationalGraph relational_view(const graph::FeatureGraph& graph, std::span<const ops::OperationKind> operations) {
  nn::RelationalGraph view;
  view.neighbors.resize(graph.node_count());
  for (const auto& e : graph.edges()) {
    std::size_t relation = operations.size();
    for (std::size_t r = 0; r < operations.size(); ++r) {
      if (operations[r].id == e.op_id) relation = r;
    }
    if (relation == operations.size())
      throw Error(ErrorCode::UnknownRelation, "edge operation " + std::to_string(e.op_id) + " is outside the operation set");
    const std::size_t head = graph.index_of(e.head);
    const std::size_t child = graph.index_of(e.child);
    view.neighbors[child].push_back({head, relation});
    view.neighbors[head].push_back({child, relation});
  }
  return view;
}

Eigen::VectorXd mean_rows(const nn::Tensor& rows, std::span<const std::size_t> members) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(rows.cols());
  if (members.empty()) return sum;
  for (std::size_t m : members) sum += rows.row(static_cast<Eigen::Index>(m)).transpose();
  return sum / static_cast<double>(members.size());
}

StateEncoding encode_state(const graph::FeatureGraph& graph, const cluster::Clustering& clustering,
                           const nn::RgcnEncoder& encoder, std::span<const ops::OperationKind> operations) {
  StateEncoding state;
  state.features = node_features(graph);
  state.relations = relational_view(graph, operations);
  state.node_reps = encoder.forward(state.features, state.relations);
  for (const auto& members : clustering.clusters) state.cluster_reps.push_back(mean_rows(state.node_reps, members));
  std::vector<std::size_t> every(graph.node_count());
  for (std::size_t i = 0; i < every.size(); ++i) every[i] = i;
  state.graph_rep = mean_rows(state.node_reps, every);
  return state;
}

nn::Tensor one_hot_embedding(std::size_t rows, std::size_t dims) {
  if (rows > dims) throw Error(ErrorCode::DimMismatch, "one-hot rows exceed embedding width");
  return nn::Tensor::Identity(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dims));
}

}  // namespace featgraph::agents
