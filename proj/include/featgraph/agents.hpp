#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "featgraph/cluster.hpp"
#include "featgraph/graph.hpp"
#include "featgraph/nn.hpp"
#include "featgraph/ops.hpp"
#include "featgraph/random.hpp"

namespace featgraph::agents {

/// Linear decay from `start` to `end` over `horizon` steps, then flat.
struct EpsilonSchedule {
  double start = 0.9;
  double end = 0.1;
  std::size_t horizon = 1;

  double at(std::size_t step) const;
};

/// Encoder inputs captured when the head agent acted, so its loss can be
/// back-propagated into the encoder at replay time.
struct EncoderContext {
  nn::Tensor features;
  nn::RelationalGraph graph;
  std::vector<std::size_t> members;
};

struct Transition {
  /// Exact vector fed to the prediction network when acting.
  Eigen::VectorXd input;
  /// Output index for vector-valued networks; 0 for scalar scorers.
  std::size_t action = 0;
  double reward = 0.0;
  /// Every candidate input available at t+1; the TD target maximises over
  /// these (and over all outputs for vector-valued networks).
  std::vector<Eigen::VectorXd> next_inputs;
  bool terminal = false;
  /// Operand agent: operation-embedding row held in the input's op slot.
  std::optional<std::size_t> op_row;
  std::shared_ptr<const EncoderContext> encoder;
};

/// FIFO replay memory with a hard capacity.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 16) : capacity_(capacity) {}

  void push(Transition transition);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  const Transition& operator[](std::size_t i) const { return items_[i]; }

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

/// One agent: prediction and target networks plus its replay memory.
struct AgentBundle {
  nn::DenseNet prediction;
  nn::DenseNet target;
  ReplayBuffer buffer;
  std::size_t batch_size = 8;
  std::size_t sync_interval = 10;
  std::size_t steps_since_sync = 0;

  AgentBundle() = default;
  AgentBundle(std::vector<std::size_t> dims, Rng& rng, std::size_t capacity = 16, std::size_t batch = 8,
              std::size_t sync_every = 10);
};

struct Selection {
  std::size_t index = 0;
  double q = 0.0;
};

/// With probability 1-eps the argmax (lowest index on ties), otherwise a
/// uniformly random index. A single candidate is always chosen.
Selection epsilon_greedy(std::span<const double> scores, double epsilon, Rng& rng);

Eigen::VectorXd concat(std::initializer_list<const Eigen::VectorXd*> parts);

Selection select_head(const AgentBundle& head, std::span<const Eigen::VectorXd> cluster_reps,
                      const Eigen::VectorXd& graph_rep, double epsilon, Rng& rng);

/// `allowed` masks operation positions; empty means all allowed.
Selection select_operation(const AgentBundle& operation, const Eigen::VectorXd& head_rep, const Eigen::VectorXd& graph_rep,
                           double epsilon, Rng& rng, std::span<const bool> allowed = {});

/// Scores head ⊕ graph ⊕ op ⊕ candidate for every candidate cluster.
Selection select_operand(const AgentBundle& operand, const Eigen::VectorXd& head_rep, const Eigen::VectorXd& graph_rep,
                         const Eigen::VectorXd& op_embedding, std::span<const Eigen::VectorXd> candidate_reps,
                         double epsilon, Rng& rng);

void store_transition(AgentBundle& bundle, Transition transition);

/// R + gamma * max_next, or R alone for terminal transitions.
double td_target(double reward, double gamma, double max_next, bool terminal);

/// Largest target-network value over a transition's next candidates.
double max_next_q(const nn::DenseNet& target, const Transition& transition);

/// Extra parameters trained through an agent's loss.
struct TrainLinks {
  nn::RgcnEncoder* encoder = nullptr;
  nn::Tensor* op_embedding = nullptr;
  std::size_t op_offset = 0;
};

/// One optimisation step on a batch sampled without replacement. Returns
/// the mean squared TD error, or nothing while the buffer is smaller than
/// the batch.
std::optional<double> train_step(AgentBundle& bundle, double gamma, const nn::Optimizer& optimizer, Rng& rng,
                                 const TrainLinks& links = {});

/// Counts an exploration step and copies prediction into target on every
/// sync_interval-th call.
bool maybe_sync_targets(AgentBundle& bundle);

/// Encoded view of a graph under a clustering.
struct StateEncoding {
  nn::Tensor features;            // n x 7 scaled statistics
  nn::RelationalGraph relations;  // typed, undirected neighbour lists
  nn::Tensor node_reps;           // n x d encoder output
  std::vector<Eigen::VectorXd> cluster_reps;
  Eigen::VectorXd graph_rep;
};

/// sign(x) * ln(1 + |x|), applied to each statistic before encoding.
double squash(double x);

nn::Tensor node_features(const graph::FeatureGraph& graph);

/// Edges become neighbour links in both directions, typed by the
/// operation's position in `operations`.
nn::RelationalGraph relational_view(const graph::FeatureGraph& graph, std::span<const ops::OperationKind> operations);

Eigen::VectorXd mean_rows(const nn::Tensor& rows, std::span<const std::size_t> members);

StateEncoding encode_state(const graph::FeatureGraph& graph, const cluster::Clustering& clustering,
                           const nn::RgcnEncoder& encoder, std::span<const ops::OperationKind> operations);

/// Orthogonal one-hot-like rows: row i is the i-th unit vector.
nn::Tensor one_hot_embedding(std::size_t rows, std::size_t dims);

}  // namespace featgraph::agents
