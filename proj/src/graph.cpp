#include "featgraph/graph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>

#include "featgraph/error.hpp"

namespace featgraph::graph {

DerivationKey canonical_key(const ops::OperationKind& op, std::span<const NodeId> parents) {
  DerivationKey key{op.id, {parents.begin(), parents.end()}};
  if (op.commutative) std::sort(key.parents.begin(), key.parents.end());
  return key;
}

FeatureGraph FeatureGraph::from_training(const tabular::Dataset& train, const ops::SafetyConfig& safety) {
  if (train.row_count() == 0) throw Error(ErrorCode::EmptyDataset, "training split is empty");
  FeatureGraph g;
  g.safety_ = safety;
  g.root_names_ = train.names;
  for (std::size_t c = 0; c < train.feature_count(); ++c) {
    Node node;
    node.id = g.next_id_++;
    node.depth = 0;
    node.provenance = RootOrigin{train.names[c], c};
    node.train_column = train.columns[c];
    node.embedding = tabular::compute_stats(node.train_column);
    g.nodes_.push_back(std::move(node));
  }
  return g;
}

namespace {

std::vector<Node>::const_iterator find_node(const std::vector<Node>& nodes, NodeId id) {
  return std::lower_bound(nodes.begin(), nodes.end(), id, [](const Node& node, NodeId value) { return node.id < value; });
}

}  // namespace

bool FeatureGraph::contains(NodeId id) const {
  const auto it = find_node(nodes_, id);
  return it != nodes_.end() && it->id == id;
}

std::size_t FeatureGraph::index_of(NodeId id) const {
  const auto it = find_node(nodes_, id);
  if (it == nodes_.end() || it->id != id) throw Error(ErrorCode::UnknownNode, "node " + std::to_string(id));
  return static_cast<std::size_t>(it - nodes_.begin());
}

AddResult FeatureGraph::add_transform(const ops::OperationKind& op, std::span<const NodeId> parents) {
  const std::size_t arity = op.arity == ops::Arity::Unary ? 1 : 2;
  if (parents.size() != arity) {
    throw Error(ErrorCode::ArityMismatch, std::string(op.name) + " takes " + std::to_string(arity) + " parent(s)");
  }
  for (NodeId p : parents) {
    if (!contains(p)) throw Error(ErrorCode::UnknownParent, "parent node " + std::to_string(p));
  }

  auto key = canonical_key(op, parents);
  if (const auto it = dedup_.find(key); it != dedup_.end()) return {AddStatus::Duplicate, it->second};

  Node child;
  try {
    if (op.arity == ops::Arity::Unary) {
      auto result = ops::apply_unary(op, node(parents[0]).train_column, nullptr, safety_);
      child.train_column = std::move(result.values);
      child.fit = std::move(result.fit);
    } else {
      child.train_column = ops::apply_binary(op, node(parents[0]).train_column, node(parents[1]).train_column, safety_);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NonFiniteOutput) return {AddStatus::Rejected, -1};
    throw;
  }

  const auto [lo, hi] = std::minmax_element(child.train_column.begin(), child.train_column.end());
  if (child.train_column.empty() || *lo == *hi) return {AddStatus::Rejected, -1};

  int depth = 0;
  for (NodeId p : parents) depth = std::max(depth, node(p).depth);
  child.id = next_id_++;
  child.depth = depth + 1;
  child.provenance = Derivation{op.id, {parents.begin(), parents.end()}};
  child.embedding = tabular::compute_stats(child.train_column);

  for (NodeId p : parents) edges_.push_back({p, child.id, op.id});
  dedup_.emplace(std::move(key), child.id);
  const NodeId id = child.id;
  nodes_.push_back(std::move(child));
  return {AddStatus::Created, id};
}

std::vector<std::vector<double>> FeatureGraph::materialize(const tabular::Dataset& data) const {
  if (data.names != root_names_) throw Error(ErrorCode::SchemaMismatch, "dataset columns differ from graph roots");
  std::vector<std::vector<double>> out;
  out.reserve(nodes_.size());
  for (const auto& n : nodes_) {
    if (const auto* root = std::get_if<RootOrigin>(&n.provenance)) {
      out.push_back(data.columns[root->column]);
      continue;
    }
    const auto& d = n.derivation();
    const auto& op = ops::operation_by_id(d.op_id);
    if (op.arity == ops::Arity::Unary) {
      const auto& parent = out[index_of(d.parents[0])];
      const ops::FitState* fit = n.fit ? &*n.fit : nullptr;
      out.push_back(ops::apply_unary(op, parent, fit, safety_).values);
    } else {
      out.push_back(ops::apply_binary(op, out[index_of(d.parents[0])], out[index_of(d.parents[1])], safety_));
    }
  }
  return out;
}

std::string FeatureGraph::trace_formula(NodeId id) const {
  const Node& n = node(id);
  if (const auto* root = std::get_if<RootOrigin>(&n.provenance)) return root->name;
  const auto& d = n.derivation();
  std::string text(ops::operation_by_id(d.op_id).name);
  text += '(';
  for (std::size_t i = 0; i < d.parents.size(); ++i) {
    if (i > 0) text += ", ";
    text += trace_formula(d.parents[i]);
  }
  text += ')';
  return text;
}

std::vector<std::string> FeatureGraph::trace_all() const {
  std::vector<std::string> out;
  out.reserve(nodes_.size());
  for (const auto& n : nodes_) out.push_back(trace_formula(n.id));
  return out;
}

GraphSnapshot FeatureGraph::snapshot() const {
  GraphSnapshot s;
  s.state_ = std::make_shared<const FeatureGraph>(*this);
  return s;
}

FeatureGraph FeatureGraph::restore(const GraphSnapshot& snapshot) {
  if (snapshot.empty()) throw Error(ErrorCode::MalformedProgram, "restoring an empty snapshot");
  return *snapshot.state_;
}

Eigen::MatrixXd FeatureGraph::symmetric_adjacency() const {
  const auto n = static_cast<Eigen::Index>(nodes_.size());
  Eigen::MatrixXd adjacency = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : edges_) {
    const auto i = static_cast<Eigen::Index>(index_of(e.head));
    const auto j = static_cast<Eigen::Index>(index_of(e.child));
    if (i == j) continue;
    adjacency(i, j) = 1.0;
    adjacency(j, i) = 1.0;
  }
  return adjacency;
}

std::size_t FeatureGraph::remove_nodes(const std::set<NodeId>& ids) {
  std::set<NodeId> doomed;
  for (const auto& n : nodes_) {
    if (n.is_root()) continue;
    bool remove = ids.count(n.id) > 0;
    for (NodeId p : n.derivation().parents) remove = remove || doomed.count(p) > 0;
    if (remove) doomed.insert(n.id);
  }
  if (doomed.empty()) return 0;
  std::erase_if(nodes_, [&](const Node& n) { return doomed.count(n.id) > 0; });
  std::erase_if(edges_, [&](const Edge& e) { return doomed.count(e.child) > 0 || doomed.count(e.head) > 0; });
  rebuild_dedup();
  return doomed.size();
}

void FeatureGraph::rebuild_dedup() {
  dedup_.clear();
  for (const auto& n : nodes_) {
    if (n.is_root()) continue;
    const auto& d = n.derivation();
    dedup_.emplace(canonical_key(ops::operation_by_id(d.op_id), d.parents), n.id);
  }
}

void FeatureGraph::check_invariants() const {
  const auto fail = [](const std::string& what) { throw Error(ErrorCode::MalformedProgram, what); };
  std::size_t roots = 0;
  std::map<NodeId, std::size_t> incoming;
  for (const auto& e : edges_) ++incoming[e.child];
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (i > 0 && nodes_[i - 1].id >= n.id) fail("node ids not strictly increasing");
    if (n.train_column.size() != training_rows()) fail("column length differs at node " + std::to_string(n.id));
    for (double v : n.train_column) {
      if (!std::isfinite(v)) fail("non-finite training value at node " + std::to_string(n.id));
    }
    if (n.is_root()) {
      ++roots;
      if (n.depth != 0) fail("root with nonzero depth");
      if (incoming.count(n.id)) fail("root with incoming edge");
      continue;
    }
    const auto& d = n.derivation();
    const auto& op = ops::operation_by_id(d.op_id);
    const std::size_t arity = op.arity == ops::Arity::Unary ? 1 : 2;
    if (d.parents.size() != arity || incoming[n.id] != arity) fail("arity mismatch at node " + std::to_string(n.id));
    int depth = 0;
    for (NodeId p : d.parents) {
      if (p >= n.id) fail("parent does not precede child");
      depth = std::max(depth, node(p).depth);
    }
    if (n.depth != depth + 1) fail("depth rule broken at node " + std::to_string(n.id));
    const auto it = dedup_.find(canonical_key(op, d.parents));
    if (it == dedup_.end() || it->second != n.id) fail("dedup index misses node " + std::to_string(n.id));
  }
  if (roots != root_names_.size()) fail("root count differs from feature count");
  if (dedup_.size() != derived_count()) fail("dedup index size differs from derived count");
}

namespace {

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

bool same_bits(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_bits(a[i], b[i])) return false;
  }
  return true;
}

bool same_fit(const std::optional<ops::FitState>& a, const std::optional<ops::FitState>& b) {
  if (a.has_value() != b.has_value()) return false;
  if (!a) return true;
  if (a->index() != b->index()) return false;
  if (const auto* s = std::get_if<ops::StandardizeFit>(&*a)) {
    const auto& t = std::get<ops::StandardizeFit>(*b);
    return same_bits(s->mean, t.mean) && same_bits(s->std, t.std);
  }
  if (const auto* m = std::get_if<ops::MinMaxFit>(&*a)) {
    const auto& t = std::get<ops::MinMaxFit>(*b);
    return same_bits(m->min, t.min) && same_bits(m->max, t.max);
  }
  return same_bits(std::get<ops::QuantileFit>(*a).sorted, std::get<ops::QuantileFit>(*b).sorted);
}

}  // namespace

bool identical(const FeatureGraph& a, const FeatureGraph& b) {
  if (a.root_names() != b.root_names() || a.edges() != b.edges() || a.dedup_index() != b.dedup_index() ||
      a.next_id() != b.next_id() || a.node_count() != b.node_count())
    return false;
  for (std::size_t i = 0; i < a.node_count(); ++i) {
    const Node& x = a.nodes()[i];
    const Node& y = b.nodes()[i];
    if (x.id != y.id || x.depth != y.depth || x.provenance.index() != y.provenance.index()) return false;
    if (x.is_root()) {
      const auto& rx = std::get<RootOrigin>(x.provenance);
      const auto& ry = std::get<RootOrigin>(y.provenance);
      if (rx.name != ry.name || rx.column != ry.column) return false;
    } else if (x.derivation().op_id != y.derivation().op_id || x.derivation().parents != y.derivation().parents) {
      return false;
    }
    if (!same_fit(x.fit, y.fit)) return false;
    if (!same_bits(x.train_column, y.train_column)) return false;
    if (!same_bits(x.embedding.as_array(), y.embedding.as_array())) return false;
  }
  return true;
}

void GraphBuilder::append(Node node) {
  if (!node.is_root()) {
    for (NodeId p : node.derivation().parents) graph_.edges_.push_back({p, node.id, node.derivation().op_id});
  }
  graph_.nodes_.push_back(std::move(node));
}

void GraphBuilder::finish(NodeId next_id) {
  graph_.next_id_ = next_id;
  graph_.rebuild_dedup();
  graph_.check_invariants();
}

}  // namespace featgraph::graph
