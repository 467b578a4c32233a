#include "featgraph/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "featgraph/error.hpp"

namespace featgraph::eval {

std::string_view to_string(F1Averaging averaging) {
  return averaging == F1Averaging::Weighted ? "weighted" : "macro";
}

std::string_view to_string(EvaluatorKind kind) {
  switch (kind) {
    case EvaluatorKind::RandomForest: return "random_forest";
    case EvaluatorKind::DecisionTree: return "decision_tree";
    case EvaluatorKind::Ridge: return "ridge";
  }
  return "unknown";
}

F1Averaging parse_averaging(std::string_view text) {
  if (text == "weighted") return F1Averaging::Weighted;
  if (text == "macro") return F1Averaging::Macro;
  throw Error(ErrorCode::OutOfRange, "unknown F1 averaging '" + std::string(text) + "'");
}

EvaluatorKind parse_evaluator(std::string_view text) {
  if (text == "random_forest" || text == "rf") return EvaluatorKind::RandomForest;
  if (text == "decision_tree" || text == "dt") return EvaluatorKind::DecisionTree;
  if (text == "ridge") return EvaluatorKind::Ridge;
  throw Error(ErrorCode::OutOfRange, "unknown evaluator '" + std::string(text) + "'");
}

MetricKind metric_for(TaskKind task) {
  return task == TaskKind::Classification ? MetricKind::F1 : MetricKind::OneMinusRAE;
}

namespace {

std::size_t checked_rows(const Columns& x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw Error(ErrorCode::EmptyInput, "feature matrix or labels are empty");
  for (const auto& column : x) {
    if (column.size() != y.size())
      throw Error(ErrorCode::LengthMismatch, "column length " + std::to_string(column.size()) + " vs " +
                                                 std::to_string(y.size()) + " labels");
    for (double v : column)
      if (!std::isfinite(v)) throw Error(ErrorCode::EmptyInput, "feature matrix holds a non-finite value");
  }
  return y.size();
}

std::size_t infer_class_count(std::span<const double> y) {
  double top = 0.0;
  for (double v : y) {
    if (v < 0.0 || v != std::floor(v)) throw Error(ErrorCode::OutOfRange, "class labels must be non-negative integers");
    top = std::max(top, v);
  }
  return static_cast<std::size_t>(top) + 1;
}

std::size_t argmax_lowest(std::span<const double> counts) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c)
    if (counts[c] > counts[best]) best = c;
  return best;
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Columns& x, std::span<const double> y, TaskKind task, std::size_t class_count,
              const TreeParams& params, Rng& rng)
      : x_(x), y_(y), task_(task), classes_(class_count), params_(params), rng_(rng) {}

  DecisionTree build(std::span<const std::size_t> rows) {
    DecisionTree tree;
    tree.task = task_;
    tree.feature_count = x_.size();
    nodes_.clear();
    std::vector<std::size_t> all(rows.begin(), rows.end());
    grow(all, 0);
    tree.nodes = std::move(nodes_);
    return tree;
  }

 private:
  int grow(std::vector<std::size_t>& rows, std::size_t depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const double n = static_cast<double>(rows.size());

    // Parent score uses the same quantity maximised by a split: sum of
    // squared class counts over n, or squared label sum over n.
    double parent_score = 0.0;
    bool pure = true;
    if (task_ == TaskKind::Classification) {
      std::vector<double> counts(classes_, 0.0);
      for (std::size_t r : rows) counts[static_cast<std::size_t>(y_[r])] += 1.0;
      nodes_[static_cast<std::size_t>(id)].value = static_cast<double>(argmax_lowest(counts));
      for (double c : counts) {
        parent_score += c * c;
        if (c != 0.0 && c != n) pure = false;
      }
      parent_score /= n;
    } else {
      double sum = 0.0;
      for (std::size_t r : rows) sum += y_[r];
      nodes_[static_cast<std::size_t>(id)].value = sum / n;
      for (std::size_t r : rows)
        if (y_[r] != y_[rows.front()]) pure = false;
      parent_score = sum * sum / n;
    }

    if (pure || depth >= params_.max_depth || rows.size() < 2 * params_.min_samples_leaf) return id;

    const Split split = best_split(rows, parent_score);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    const auto& column = x_[static_cast<std::size_t>(split.feature)];
    for (std::size_t r : rows) (column[r] <= split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    nodes_[static_cast<std::size_t>(id)].feature = split.feature;
    nodes_[static_cast<std::size_t>(id)].threshold = split.threshold;
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  Split best_split(const std::vector<std::size_t>& rows, double parent_score) {
    const std::size_t p = x_.size();
    std::vector<std::size_t> features;
    if (params_.max_features == 0 || params_.max_features >= p) {
      features.resize(p);
      std::iota(features.begin(), features.end(), 0);
    } else {
      features = sample_without_replacement(p, params_.max_features, rng_);
      std::sort(features.begin(), features.end());
    }

    Split best;
    best.score = parent_score + 1e-12 * std::max(1.0, std::abs(parent_score));
    const std::size_t n = rows.size();
    const std::size_t min_leaf = std::max<std::size_t>(1, params_.min_samples_leaf);
    order_.resize(n);

    for (std::size_t f : features) {
      const auto& column = x_[f];
      for (std::size_t i = 0; i < n; ++i) order_[i] = {column[rows[i]], y_[rows[i]]};
      std::sort(order_.begin(), order_.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      if (order_.front().first == order_.back().first) continue;

      if (task_ == TaskKind::Classification) {
        left_counts_.assign(classes_, 0.0);
        right_counts_.assign(classes_, 0.0);
        for (const auto& [v, label] : order_) right_counts_[static_cast<std::size_t>(label)] += 1.0;
        double left_sq = 0.0;
        double right_sq = 0.0;
        for (double c : right_counts_) right_sq += c * c;
        for (std::size_t i = 1; i < n; ++i) {
          const auto c = static_cast<std::size_t>(order_[i - 1].second);
          left_sq += 2.0 * left_counts_[c] + 1.0;
          right_sq -= 2.0 * right_counts_[c] - 1.0;
          left_counts_[c] += 1.0;
          right_counts_[c] -= 1.0;
          if (i < min_leaf || n - i < min_leaf || order_[i - 1].first == order_[i].first) continue;
          const double score = left_sq / static_cast<double>(i) + right_sq / static_cast<double>(n - i);
          consider(best, score, static_cast<int>(f), i);
        }
      } else {
        double total = 0.0;
        for (const auto& entry : order_) total += entry.second;
        double left_sum = 0.0;
        for (std::size_t i = 1; i < n; ++i) {
          left_sum += order_[i - 1].second;
          if (i < min_leaf || n - i < min_leaf || order_[i - 1].first == order_[i].first) continue;
          const double right_sum = total - left_sum;
          const double score = left_sum * left_sum / static_cast<double>(i) +
                               right_sum * right_sum / static_cast<double>(n - i);
          consider(best, score, static_cast<int>(f), i);
        }
      }
    }
    return best;
  }

  void consider(Split& best, double score, int feature, std::size_t i) {
    if (!(score > best.score)) return;
    const double lo = order_[i - 1].first;
    const double hi = order_[i].first;
    double mid = lo + (hi - lo) / 2.0;
    if (!(mid < hi)) mid = lo;
    best = {feature, mid, score};
  }

  const Columns& x_;
  std::span<const double> y_;
  TaskKind task_;
  std::size_t classes_;
  TreeParams params_;
  Rng& rng_;
  std::vector<TreeNode> nodes_;
  std::vector<std::pair<double, double>> order_;
  std::vector<double> left_counts_;
  std::vector<double> right_counts_;
};

void check_schema(std::size_t expected, const Columns& x) {
  if (x.size() != expected)
    throw Error(ErrorCode::SchemaMismatch, "model expects " + std::to_string(expected) + " columns, got " +
                                               std::to_string(x.size()));
}

std::size_t row_count(const Columns& x) { return x.empty() ? 0 : x.front().size(); }

}  // namespace

double DecisionTree::predict_row(const Columns& x, std::size_t row) const {
  std::size_t at = 0;
  while (nodes[at].feature >= 0) {
    const auto& node = nodes[at];
    at = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)][row] <= node.threshold ? node.left
                                                                                                  : node.right);
  }
  return nodes[at].value;
}

DecisionTree fit_tree(const Columns& x, std::span<const double> y, std::span<const std::size_t> rows, TaskKind task,
                      std::size_t class_count, const TreeParams& params, Rng& rng) {
  checked_rows(x, y);
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "tree needs at least one row");
  if (task == TaskKind::Classification && class_count == 0) class_count = infer_class_count(y);
  TreeBuilder builder(x, y, task, class_count, params, rng);
  return builder.build(rows);
}

double gini_impurity(std::span<const double> counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  if (total == 0.0) return 0.0;
  double sq = 0.0;
  for (double c : counts) sq += (c / total) * (c / total);
  return std::max(0.0, 1.0 - sq);
}

double variance_impurity(std::span<const double> values) {
  if (values.empty()) return 0.0;
  // Shifting by the first value makes a constant node exactly zero.
  const double origin = values.front();
  double shifted_sum = 0.0;
  for (double v : values) shifted_sum += v - origin;
  const double mean = shifted_sum / static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += (v - origin - mean) * (v - origin - mean);
  return sum / static_cast<double>(values.size());
}

std::size_t default_max_features(TaskKind task, std::size_t feature_count) {
  const double p = static_cast<double>(feature_count);
  const double m = task == TaskKind::Classification ? std::floor(std::sqrt(p)) : std::floor(p / 3.0);
  return std::clamp<std::size_t>(static_cast<std::size_t>(m), 1, std::max<std::size_t>(1, feature_count));
}

RandomForest fit_forest(const Columns& x, std::span<const double> y, TaskKind task, const ForestParams& params,
                        std::uint64_t seed) {
  const std::size_t n = checked_rows(x, y);
  RandomForest forest;
  forest.task = task;
  forest.feature_count = x.size();
  if (task == TaskKind::Classification) {
    forest.class_count = infer_class_count(y);
    if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); }))
      throw Error(ErrorCode::SingleClass, "classification data holds a single class");
  }
  TreeParams tree_params{params.max_depth, params.min_samples_leaf,
                         params.max_features == 0 ? default_max_features(task, x.size()) : params.max_features};

  forest.trees.reserve(params.tree_count);
  std::vector<std::size_t> rows(n);
  for (std::size_t t = 0; t < params.tree_count; ++t) {
    Rng rng(derive_seed(seed, t));
    if (params.bootstrap) {
      for (auto& r : rows) r = uniform_index(rng, n);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    TreeBuilder builder(x, y, task, forest.class_count, tree_params, rng);
    forest.trees.push_back(builder.build(rows));
  }
  return forest;
}

std::vector<double> predict(const DecisionTree& tree, const Columns& x) {
  check_schema(tree.feature_count, x);
  std::vector<double> out(row_count(x));
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = tree.predict_row(x, r);
  return out;
}

std::vector<double> predict(const RandomForest& forest, const Columns& x) {
  check_schema(forest.feature_count, x);
  const std::size_t n = row_count(x);
  std::vector<double> out(n, 0.0);
  if (forest.trees.empty()) return out;
  if (forest.task == TaskKind::Classification) {
    std::vector<double> votes(forest.class_count);
    for (std::size_t r = 0; r < n; ++r) {
      std::fill(votes.begin(), votes.end(), 0.0);
      for (const auto& tree : forest.trees) votes[static_cast<std::size_t>(tree.predict_row(x, r))] += 1.0;
      out[r] = static_cast<double>(argmax_lowest(votes));
    }
  } else {
    for (std::size_t r = 0; r < n; ++r) {
      double sum = 0.0;
      for (const auto& tree : forest.trees) sum += tree.predict_row(x, r);
      out[r] = sum / static_cast<double>(forest.trees.size());
    }
  }
  return out;
}

double f1_score(std::span<const double> truth, std::span<const double> predicted, F1Averaging averaging) {
  if (truth.size() != predicted.size())
    throw Error(ErrorCode::LengthMismatch, "f1 needs equal-length truth and predictions");
  if (truth.empty()) throw Error(ErrorCode::EmptyInput, "f1 of zero samples");
  const std::size_t classes = std::max(infer_class_count(truth), infer_class_count(predicted));
  std::vector<double> tp(classes, 0.0), fp(classes, 0.0), fn(classes, 0.0), support(classes, 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(truth[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    support[t] += 1.0;
    if (t == p) {
      tp[t] += 1.0;
    } else {
      fp[p] += 1.0;
      fn[t] += 1.0;
    }
  }
  double total = 0.0;
  double weight_sum = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    const bool seen = support[c] > 0.0 || tp[c] + fp[c] > 0.0;
    if (!seen) continue;
    const double precision = tp[c] + fp[c] > 0.0 ? tp[c] / (tp[c] + fp[c]) : 0.0;
    const double recall = tp[c] + fn[c] > 0.0 ? tp[c] / (tp[c] + fn[c]) : 0.0;
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    const double w = averaging == F1Averaging::Weighted ? support[c] : 1.0;
    total += w * f1;
    weight_sum += w;
  }
  return weight_sum > 0.0 ? total / weight_sum : 0.0;
}

double one_minus_rae(std::span<const double> truth, std::span<const double> predicted) {
  if (truth.size() != predicted.size())
    throw Error(ErrorCode::LengthMismatch, "1-RAE needs equal-length truth and predictions");
  if (truth.empty()) throw Error(ErrorCode::EmptyInput, "1-RAE of zero samples");
  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
  double err = 0.0;
  double base = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    err += std::abs(truth[i] - predicted[i]);
    base += std::abs(truth[i] - mean);
  }
  if (base == 0.0) throw Error(ErrorCode::ConstantTruth, "1-RAE is undefined for a constant target");
  return 1.0 - err / base;
}

double score(TaskKind task, std::span<const double> truth, std::span<const double> predicted, F1Averaging averaging) {
  return task == TaskKind::Classification ? f1_score(truth, predicted, averaging) : one_minus_rae(truth, predicted);
}

RidgeModel fit_ridge(const Columns& x, std::span<const double> y, TaskKind task, std::size_t class_count,
                     double lambda) {
  const std::size_t n = checked_rows(x, y);
  const std::size_t p = x.size();
  RidgeModel model;
  model.task = task;
  model.mean.resize(p);
  model.scale.resize(p);
  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) {
    const double mean = std::accumulate(x[j].begin(), x[j].end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double v : x[j]) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    model.mean[j] = mean;
    model.scale[j] = sd > 0.0 ? sd : 1.0;
    for (std::size_t i = 0; i < n; ++i)
      design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (x[j][i] - mean) / model.scale[j];
  }

  const std::size_t outputs = task == TaskKind::Classification
                                  ? (class_count == 0 ? infer_class_count(y) : class_count)
                                  : 1;
  Eigen::MatrixXd targets(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(outputs));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < outputs; ++k) {
      const double value = task == TaskKind::Classification ? (static_cast<std::size_t>(y[i]) == k ? 1.0 : 0.0) : y[i];
      targets(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = value;
    }
  }
  const Eigen::RowVectorXd intercept = targets.colwise().mean();
  const Eigen::MatrixXd centered = targets.rowwise() - intercept;
  Eigen::MatrixXd gram = design.transpose() * design;
  gram.diagonal().array() += lambda;
  const Eigen::MatrixXd beta = gram.ldlt().solve(design.transpose() * centered);

  model.coefficients.assign(p + 1, std::vector<double>(outputs));
  for (std::size_t k = 0; k < outputs; ++k) {
    for (std::size_t j = 0; j < p; ++j)
      model.coefficients[j][k] = beta(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
    model.coefficients[p][k] = intercept(static_cast<Eigen::Index>(k));
  }
  return model;
}

std::vector<double> predict(const RidgeModel& model, const Columns& x) {
  check_schema(model.mean.size(), x);
  const std::size_t p = model.mean.size();
  const std::size_t outputs = model.coefficients.empty() ? 0 : model.coefficients.front().size();
  std::vector<double> out(row_count(x));
  std::vector<double> raw(outputs);
  for (std::size_t r = 0; r < out.size(); ++r) {
    for (std::size_t k = 0; k < outputs; ++k) {
      double s = model.coefficients[p][k];
      for (std::size_t j = 0; j < p; ++j) s += model.coefficients[j][k] * (x[j][r] - model.mean[j]) / model.scale[j];
      raw[k] = s;
    }
    out[r] = model.task == TaskKind::Classification ? static_cast<double>(argmax_lowest(raw)) : raw[0];
  }
  return out;
}

std::vector<double> fit_predict(const EvaluatorSpec& spec, const Columns& train_x, std::span<const double> train_y,
                                TaskKind task, const Columns& test_x, std::uint64_t seed) {
  switch (spec.kind) {
    case EvaluatorKind::RandomForest:
      return predict(fit_forest(train_x, train_y, task, spec.forest, seed), test_x);
    case EvaluatorKind::DecisionTree: {
      const std::size_t n = checked_rows(train_x, train_y);
      if (task == TaskKind::Classification &&
          std::all_of(train_y.begin(), train_y.end(), [&](double v) { return v == train_y.front(); }))
        throw Error(ErrorCode::SingleClass, "classification data holds a single class");
      std::vector<std::size_t> rows(n);
      std::iota(rows.begin(), rows.end(), 0);
      Rng rng(seed);
      const TreeParams params{spec.forest.max_depth, spec.forest.min_samples_leaf, 0};
      return predict(fit_tree(train_x, train_y, rows, task, 0, params, rng), test_x);
    }
    case EvaluatorKind::Ridge:
      return predict(fit_ridge(train_x, train_y, task, 0, spec.ridge_lambda), test_x);
  }
  throw Error(ErrorCode::OutOfRange, "unknown evaluator");
}

double holdout_score(const EvaluatorSpec& spec, const Columns& train_x, std::span<const double> train_y,
                     const Columns& test_x, std::span<const double> test_y, TaskKind task, std::uint64_t seed) {
  const auto predicted = fit_predict(spec, train_x, train_y, task, test_x, seed);
  return score(task, test_y, predicted, spec.averaging);
}

std::vector<std::size_t> fold_assignment(std::span<const double> y, TaskKind task, std::size_t folds,
                                         std::uint64_t seed) {
  const std::size_t n = y.size();
  if (folds < 2 || n < folds)
    throw Error(ErrorCode::TooFewRows, std::to_string(n) + " rows cannot fill " + std::to_string(folds) + " folds");
  Rng rng(seed);
  std::vector<std::size_t> fold(n, 0);
  if (task == TaskKind::Classification) {
    const std::size_t classes = infer_class_count(y);
    std::size_t dealt = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < n; ++i)
        if (static_cast<std::size_t>(y[i]) == c) members.push_back(i);
      shuffle(members, rng);
      for (std::size_t m : members) fold[m] = dealt++ % folds;
    }
  } else {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    for (std::size_t i = 0; i < n; ++i) fold[order[i]] = i % folds;
  }
  return fold;
}

Columns select_rows(const Columns& x, std::span<const std::size_t> rows) {
  Columns out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    out[j].reserve(rows.size());
    for (std::size_t r : rows) out[j].push_back(x[j][r]);
  }
  return out;
}

double cross_validate(const EvaluatorSpec& spec, const Columns& x, std::span<const double> y, TaskKind task,
                      std::size_t folds, std::uint64_t seed) {
  checked_rows(x, y);
  const auto fold = fold_assignment(y, task, folds, seed);
  double total = 0.0;
  for (std::size_t k = 0; k < folds; ++k) {
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    for (std::size_t i = 0; i < y.size(); ++i) (fold[i] == k ? test_rows : train_rows).push_back(i);
    std::vector<double> train_y;
    std::vector<double> test_y;
    for (std::size_t r : train_rows) train_y.push_back(y[r]);
    for (std::size_t r : test_rows) test_y.push_back(y[r]);
    total += holdout_score(spec, select_rows(x, train_rows), train_y, select_rows(x, test_rows), test_y, task,
                           derive_seed(seed, k));
  }
  return total / static_cast<double>(folds);
}

}  // namespace featgraph::eval
