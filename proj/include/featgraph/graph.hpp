#pragma once

#include <Eigen/Core>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "featgraph/ops.hpp"
#include "featgraph/tabular.hpp"

namespace featgraph::graph {

using NodeId = std::int64_t;

struct RootOrigin {
  std::string name;
  std::size_t column = 0;
};

struct Derivation {
  int op_id = 0;
  std::vector<NodeId> parents;
};

/// A feature state: an original column or one derived by an operation.
struct Node {
  NodeId id = 0;
  tabular::ColumnStats embedding;
  int depth = 0;
  std::variant<RootOrigin, Derivation> provenance;
  std::optional<ops::FitState> fit;
  std::vector<double> train_column;

  bool is_root() const { return std::holds_alternative<RootOrigin>(provenance); }
  const Derivation& derivation() const { return std::get<Derivation>(provenance); }
};

struct Edge {
  NodeId head = 0;
  NodeId child = 0;
  int op_id = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Canonical identity of a derivation: parents are sorted for commutative
/// operations and kept in order otherwise.
struct DerivationKey {
  int op_id = 0;
  std::vector<NodeId> parents;

  friend auto operator<=>(const DerivationKey&, const DerivationKey&) = default;
};

DerivationKey canonical_key(const ops::OperationKind& op, std::span<const NodeId> parents);

enum class AddStatus { Created, Duplicate, Rejected };

struct AddResult {
  AddStatus status = AddStatus::Rejected;
  /// New node for Created, existing node for Duplicate, -1 for Rejected.
  NodeId id = -1;
};

class FeatureGraph;

/// Immutable checkpoint of a graph; cheap to copy and safe to share.
class GraphSnapshot {
 public:
  GraphSnapshot() = default;
  const FeatureGraph& graph() const { return *state_; }
  bool empty() const { return state_ == nullptr; }

 private:
  friend class FeatureGraph;
  std::shared_ptr<const FeatureGraph> state_;
};

/// Evolving DAG of feature states. Nodes are kept in ascending id order,
/// which is also a topological order since parents always predate children.
class FeatureGraph {
 public:
  FeatureGraph() = default;

  static FeatureGraph from_training(const tabular::Dataset& train, const ops::SafetyConfig& safety = {});

  /// Derives a child of `parents` under `op`, fitting stateful operations on
  /// the parent's training column.
  AddResult add_transform(const ops::OperationKind& op, std::span<const NodeId> parents);

  /// Replays the program on a dataset with the root schema. One column per
  /// node, in node order.
  std::vector<std::vector<double>> materialize(const tabular::Dataset& data) const;

  /// Fully parenthesised formula over original feature names.
  std::string trace_formula(NodeId id) const;
  std::vector<std::string> trace_all() const;

  GraphSnapshot snapshot() const;
  static FeatureGraph restore(const GraphSnapshot& snapshot);

  /// Unweighted, symmetrised adjacency over node positions, zero diagonal.
  Eigen::MatrixXd symmetric_adjacency() const;

  /// Removes the given derived nodes and every node descending from them.
  /// Roots in `ids` are ignored. Returns the number of nodes removed.
  std::size_t remove_nodes(const std::set<NodeId>& ids);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::string>& root_names() const { return root_names_; }
  const std::map<DerivationKey, NodeId>& dedup_index() const { return dedup_; }
  const ops::SafetyConfig& safety() const { return safety_; }
  NodeId next_id() const { return next_id_; }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t root_count() const { return root_names_.size(); }
  std::size_t derived_count() const { return nodes_.size() - root_names_.size(); }
  std::size_t training_rows() const { return nodes_.empty() ? 0 : nodes_.front().train_column.size(); }

  bool contains(NodeId id) const;
  std::size_t index_of(NodeId id) const;
  const Node& node(NodeId id) const { return nodes_[index_of(id)]; }

  /// Throws if any structural invariant is violated.
  void check_invariants() const;

 private:
  friend class GraphBuilder;

  void rebuild_dedup();

  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::string> root_names_;
  std::map<DerivationKey, NodeId> dedup_;
  ops::SafetyConfig safety_;
  NodeId next_id_ = 0;
};

/// Bit-level equality of two graphs: ids, provenance, fit states, columns,
/// embeddings, edges and dedup index.
bool identical(const FeatureGraph& a, const FeatureGraph& b);

/// Internal assembly hook used by the program loader.
class GraphBuilder {
 public:
  explicit GraphBuilder(FeatureGraph& graph) : graph_(graph) {}
  void set_roots(std::vector<std::string> names) { graph_.root_names_ = std::move(names); }
  void set_safety(const ops::SafetyConfig& safety) { graph_.safety_ = safety; }
  void append(Node node);
  void finish(NodeId next_id);

 private:
  FeatureGraph& graph_;
};

}  // namespace featgraph::graph
