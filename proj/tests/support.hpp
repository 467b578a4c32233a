#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "featgraph/graph.hpp"
#include "featgraph/ops.hpp"
#include "featgraph/random.hpp"
#include "featgraph/tabular.hpp"

namespace support {

using featgraph::Rng;
using featgraph::tabular::Dataset;
using featgraph::tabular::TaskKind;

inline Dataset parse(const std::string& text, const std::string& label = "y",
                     TaskKind task = TaskKind::Classification) {
  std::istringstream in(text);
  return featgraph::tabular::parse_csv(in, label, task);
}

/// Gaussian-ish features; labels depend on the first two columns.
inline Dataset random_dataset(std::size_t rows, std::size_t features, std::uint64_t seed,
                              TaskKind task = TaskKind::Classification) {
  Rng rng(seed);
  Dataset d;
  d.task = task;
  for (std::size_t j = 0; j < features; ++j) {
    d.names.push_back("f" + std::to_string(j));
    std::vector<double> column(rows);
    for (auto& v : column) v = featgraph::uniform_real(rng, -3.0, 3.0);
    d.columns.push_back(std::move(column));
  }
  d.labels.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const double a = d.columns[0][i];
    const double b = features > 1 ? d.columns[1][i] : 0.0;
    const double noise = featgraph::uniform_real(rng, -0.3, 0.3);
    if (task == TaskKind::Classification) {
      d.labels[i] = a * b + noise > 0.0 ? 1.0 : 0.0;
    } else {
      d.labels[i] = a * b + std::sin(a) + noise;
    }
  }
  if (task == TaskKind::Classification) d.class_names = {"0", "1"};
  return d;
}

/// Grows a graph by `steps` random add_transform calls.
inline featgraph::graph::FeatureGraph random_graph(const Dataset& train, std::size_t steps, std::uint64_t seed,
                                                   const featgraph::ops::SafetyConfig& safety = {}) {
  using namespace featgraph;
  Rng rng(seed);
  auto g = graph::FeatureGraph::from_training(train, safety);
  const auto catalog = ops::operation_catalog();
  for (std::size_t s = 0; s < steps; ++s) {
    const auto& op = catalog[uniform_index(rng, catalog.size())];
    std::vector<graph::NodeId> parents;
    const std::size_t arity = op.arity == ops::Arity::Unary ? 1 : 2;
    for (std::size_t a = 0; a < arity; ++a)
      parents.push_back(g.nodes()[uniform_index(rng, g.node_count())].id);
    g.add_transform(op, parents);
  }
  return g;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace support
