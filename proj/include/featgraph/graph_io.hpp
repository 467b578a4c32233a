#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "featgraph/graph.hpp"
#include "featgraph/tabular.hpp"

namespace featgraph::graph {

/// Program document: roots, derivations with operation ids and fit-state
/// payloads, plus the operation table. Enough to re-materialize any
/// dataset with the root schema without the training rows.
nlohmann::json to_program_json(const FeatureGraph& graph);

/// Rebuilds a graph from a program document by replaying it on `train`.
/// Stored fit states are reused as-is.
FeatureGraph from_program_json(const nlohmann::json& program, const tabular::Dataset& train);

/// Materializes a program document directly, without building a graph.
std::vector<std::vector<double>> materialize_program(const nlohmann::json& program, const tabular::Dataset& data);

std::string to_dot(const FeatureGraph& graph);

/// Parsed trace formula: a root name or op(args...).
struct Formula {
  std::string symbol;
  std::vector<Formula> args;
  bool is_call = false;
};

Formula parse_formula(const std::string& text);

/// Evaluates a formula against dataset columns. Stateful operations are
/// fitted on the values they receive.
std::vector<double> evaluate_formula(const Formula& formula, const tabular::Dataset& data,
                                     const ops::SafetyConfig& safety = {});

}  // namespace featgraph::graph
