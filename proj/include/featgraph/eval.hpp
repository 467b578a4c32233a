#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "featgraph/random.hpp"
#include "featgraph/tabular.hpp"

namespace featgraph::eval {

using tabular::TaskKind;

/// Column-major feature matrix: one vector per feature.
using Columns = std::vector<std::vector<double>>;

enum class MetricKind { F1, OneMinusRAE };
enum class F1Averaging { Weighted, Macro };
enum class EvaluatorKind { RandomForest, DecisionTree, Ridge };

std::string_view to_string(F1Averaging averaging);
std::string_view to_string(EvaluatorKind kind);
F1Averaging parse_averaging(std::string_view text);
EvaluatorKind parse_evaluator(std::string_view text);

MetricKind metric_for(TaskKind task);

struct TreeParams {
  std::size_t max_depth = 10;
  std::size_t min_samples_leaf = 2;
  /// Features tried per split; 0 means all of them.
  std::size_t max_features = 0;
};

struct TreeNode {
  // Internal nodes: feature >= 0 and both children set. Leaves: feature < 0.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  /// Leaf value: class index for classification, mean for regression.
  double value = 0.0;
};

struct DecisionTree {
  TaskKind task = TaskKind::Classification;
  std::size_t feature_count = 0;
  std::vector<TreeNode> nodes;

  double predict_row(const Columns& x, std::size_t row) const;
};

/// CART fit on `rows` of `x` (repeats allowed, as in bootstrap samples).
/// Rows with x <= threshold go left. Equal gains keep the lower feature
/// index and then the lower threshold.
DecisionTree fit_tree(const Columns& x, std::span<const double> y, std::span<const std::size_t> rows, TaskKind task,
                      std::size_t class_count, const TreeParams& params, Rng& rng);

double gini_impurity(std::span<const double> counts);
double variance_impurity(std::span<const double> values);

struct ForestParams {
  std::size_t tree_count = 100;
  std::size_t max_depth = 10;
  std::size_t min_samples_leaf = 2;
  /// 0 picks sqrt(p) for classification and p/3 for regression.
  std::size_t max_features = 0;
  bool bootstrap = true;
};

struct RandomForest {
  TaskKind task = TaskKind::Classification;
  std::size_t class_count = 0;
  std::size_t feature_count = 0;
  std::vector<DecisionTree> trees;
};

std::size_t default_max_features(TaskKind task, std::size_t feature_count);

/// Tree i is grown from seed derive_seed(seed, i), so results do not depend
/// on the order in which trees are built.
RandomForest fit_forest(const Columns& x, std::span<const double> y, TaskKind task, const ForestParams& params,
                        std::uint64_t seed);

/// Majority vote (ties to the lower class) or mean of tree outputs.
std::vector<double> predict(const RandomForest& forest, const Columns& x);
std::vector<double> predict(const DecisionTree& tree, const Columns& x);

double f1_score(std::span<const double> truth, std::span<const double> predicted, F1Averaging averaging);
double one_minus_rae(std::span<const double> truth, std::span<const double> predicted);
double score(TaskKind task, std::span<const double> truth, std::span<const double> predicted, F1Averaging averaging);

struct RidgeModel {
  TaskKind task = TaskKind::Classification;
  std::vector<double> mean;
  std::vector<double> scale;
  /// (p + 1) x outputs, intercept in the last row. Classification keeps one
  /// one-vs-rest output per class.
  std::vector<std::vector<double>> coefficients;
};

RidgeModel fit_ridge(const Columns& x, std::span<const double> y, TaskKind task, std::size_t class_count,
                     double lambda);
std::vector<double> predict(const RidgeModel& model, const Columns& x);

struct EvaluatorSpec {
  EvaluatorKind kind = EvaluatorKind::RandomForest;
  ForestParams forest;
  double ridge_lambda = 1.0;
  F1Averaging averaging = F1Averaging::Weighted;
};

/// Fits the chosen evaluator on the training matrix and predicts the test
/// matrix.
std::vector<double> fit_predict(const EvaluatorSpec& spec, const Columns& train_x, std::span<const double> train_y,
                                TaskKind task, const Columns& test_x, std::uint64_t seed);

/// Metric of a model fitted on train and scored on test.
double holdout_score(const EvaluatorSpec& spec, const Columns& train_x, std::span<const double> train_y,
                     const Columns& test_x, std::span<const double> test_y, TaskKind task, std::uint64_t seed);

/// Fold of each row. Classification rows are dealt round-robin class by
/// class after a seeded shuffle within each class.
std::vector<std::size_t> fold_assignment(std::span<const double> y, TaskKind task, std::size_t folds,
                                         std::uint64_t seed);

/// Mean held-out metric over `folds` folds.
double cross_validate(const EvaluatorSpec& spec, const Columns& x, std::span<const double> y, TaskKind task,
                      std::size_t folds, std::uint64_t seed);

Columns select_rows(const Columns& x, std::span<const std::size_t> rows);

}  // namespace featgraph::eval
