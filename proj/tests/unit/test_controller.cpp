#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "featgraph/controller.hpp"
#include "featgraph/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace featgraph;
using namespace featgraph::controller;
using graph::AddStatus;

namespace {

config::PipelineConfig quick_config() {
  config::PipelineConfig c;
  c.train_episodes = 2;
  c.steps_per_episode = 3;
  c.test_episodes = 1;
  c.forest_trees = 5;
  c.cv_folds = 3;
  c.encoder_hidden = 8;
  c.encoder_output = 16;
  c.predictor_hidden = 12;
  c.batch_size = 2;
  c.replay_capacity = 4;
  return c;
}

}  // namespace

TEST_CASE("complexity reward") {
  const auto d = support::random_dataset(20, 2, 1);
  auto g = graph::FeatureGraph::from_training(d);
  const auto roots_only = compute_reward(0.5, 0.5, g);
  CHECK(roots_only.complexity == 1.0);
  CHECK(roots_only.performance == 0.0);
  CHECK(roots_only.total == 1.0);

  auto single = graph::FeatureGraph::from_training(support::random_dataset(20, 1, 2));
  REQUIRE(single.add_transform(ops::operation_by_name("sin"), std::vector<NodeId>{0}).status == AddStatus::Created);
  const auto r = compute_reward(0.5, 0.75, single);
  CHECK(std::abs(r.complexity - (1.0 + std::exp(-1.0)) / 2.0) <= 1e-15);
  CHECK(r.performance == 0.25);
  CHECK(r.total == r.performance + r.complexity);
}

TEST_CASE("reward assignment") {
  CHECK(assign_rewards(0.4, 2, config::RewardSplit::Same) == std::vector<double>{0.4, 0.4});
  CHECK(assign_rewards(0.4, 3, config::RewardSplit::Same) == std::vector<double>{0.4, 0.4, 0.4});
  CHECK(assign_rewards(0.0, 3, config::RewardSplit::Same) == std::vector<double>{0.0, 0.0, 0.0});
  CHECK(assign_rewards(0.6, 3, config::RewardSplit::Divided)[0] == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("mutual information examples") {
  const std::vector<double> label{0, 0, 1, 1};
  CHECK(std::abs(mutual_information(label, label, tabular::TaskKind::Classification) - std::log(2.0)) <= 1e-12);
  const std::vector<double> f{0, 1, 0, 1};
  CHECK(std::abs(mutual_information(f, label, tabular::TaskKind::Classification)) <= 1e-12);
}

TEST_CASE("equal-frequency bins give ties one bin") {
  const std::vector<double> v{5, 1, 1, 3, 9, 9, 9, 2};
  CHECK(equal_frequency_bins(v, 4) == oracle::equal_frequency_bins(v, 4));
  const std::vector<double> c(10, 1.0);
  for (auto b : equal_frequency_bins(c, 20)) CHECK(b == 0);
}

TEST_CASE("mutual information matches the joint-histogram oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 5 + uniform_index(rng, 60);
    std::vector<double> feature(n), cls(n), target(n);
    for (std::size_t i = 0; i < n; ++i) {
      feature[i] = std::round(uniform_real(rng, -5, 5) * 2) / 2;  // ties on purpose
      cls[i] = static_cast<double>(uniform_index(rng, 3));
      target[i] = feature[i] * 0.5 + uniform_real(rng, -1, 1);
    }
    const auto fb = oracle::equal_frequency_bins(feature, 20);
    std::vector<std::size_t> cb(n);
    for (std::size_t i = 0; i < n; ++i) cb[i] = static_cast<std::size_t>(cls[i]);
    CHECK(std::abs(mutual_information(feature, cls, tabular::TaskKind::Classification) - oracle::mutual_information(fb, cb)) <= 1e-12);
    CHECK(std::abs(mutual_information(feature, target, tabular::TaskKind::Regression) -
                   oracle::mutual_information(fb, oracle::equal_frequency_bins(target, 20))) <= 1e-12);
    CHECK(std::abs(discrete_mutual_information(fb, cb) - oracle::mutual_information(fb, cb)) <= 1e-12);
  }
}

TEST_CASE("node-wise pruning keeps roots and at most K derived nodes") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = support::random_dataset(60, 3, seed);
    auto g = support::random_graph(d, 30, seed + 1);
    const std::size_t derived = g.derived_count();
    const std::size_t k = 4;
    const auto removed = node_wise_prune(g, d.labels, d.task, k);
    g.check_invariants();
    for (std::size_t r = 0; r < 3; ++r) CHECK(g.contains(static_cast<NodeId>(r)));
    CHECK(g.node_count() <= 3 + k);
    CHECK(removed == 3 + derived - g.node_count());
  }
  const auto d = support::random_dataset(60, 2, 99);
  auto g = support::random_graph(d, 5, 100);
  const auto before = g.node_count();
  CHECK(node_wise_prune(g, d.labels, d.task, 1000) == 0);
  CHECK(g.node_count() == before);
}

TEST_CASE("pruning keeps the most informative derived node") {
  const auto d = support::random_dataset(200, 2, 5);
  auto g = graph::FeatureGraph::from_training(d);
  const auto product = g.add_transform(ops::operation_by_name("multiply"), std::vector<NodeId>{0, 1});
  g.add_transform(ops::operation_by_name("sin"), std::vector<NodeId>{0});
  g.add_transform(ops::operation_by_name("cos"), std::vector<NodeId>{1});
  node_wise_prune(g, d.labels, d.task, 1);
  CHECK(g.node_count() == 3);
  CHECK(g.contains(product.id));
}

TEST_CASE("step backtracking") {
  const auto d = support::random_dataset(20, 2, 6);
  EpisodeState s;
  s.graph = graph::FeatureGraph::from_training(d);
  s.episode_best = s.graph.snapshot();
  s.metric = 0.5;
  s.episode_best_metric = 0.5;

  s.graph.add_transform(ops::operation_by_name("square"), std::vector<NodeId>{0});
  s.metric = 0.6;
  CHECK_FALSE(step_backtrack(s, 100));
  CHECK(s.episode_best_metric == 0.6);
  CHECK(s.episode_best.graph().node_count() == 3);

  const auto saved = s.episode_best;
  s.graph.add_transform(ops::operation_by_name("tanh"), std::vector<NodeId>{1});
  s.metric = 0.55;
  CHECK(step_backtrack(s, 100));
  CHECK(graph::identical(s.graph, saved.graph()));
  CHECK(s.metric == 0.6);

  s.graph.add_transform(ops::operation_by_name("cos"), std::vector<NodeId>{1});
  s.metric = 0.6;
  CHECK(step_backtrack(s, 3));
  CHECK(s.graph.node_count() == 3);
}

TEST_CASE("cluster transformation arity and caps") {
  const auto d = support::random_dataset(30, 5, 7);
  auto g = graph::FeatureGraph::from_training(d);
  const std::vector<NodeId> head{0, 1, 2};
  const std::vector<NodeId> pair{0, 1};
  const std::vector<NodeId> operand{2, 3, 4};

  const auto unary = apply_cluster_transformation(g, head, ops::operation_by_name("sin"), std::nullopt, 64);
  CHECK(unary.size() == 3);
  const auto again = apply_cluster_transformation(g, head, ops::operation_by_name("sin"), std::nullopt, 64);
  CHECK(again.empty());

  auto g2 = graph::FeatureGraph::from_training(d);
  const auto all = apply_cluster_transformation(g2, pair, ops::operation_by_name("add"), operand, 64);
  CHECK(all.size() == 6);

  auto g3 = graph::FeatureGraph::from_training(d);
  const auto capped = apply_cluster_transformation(g3, pair, ops::operation_by_name("multiply"), operand, 2);
  REQUIRE(capped.size() == 2);
  CHECK(g3.node(capped[0]).derivation().parents == std::vector<NodeId>{0, 2});
  CHECK(g3.node(capped[1]).derivation().parents == std::vector<NodeId>{0, 3});

  CHECK_THROWS_AS(apply_cluster_transformation(g3, pair, ops::operation_by_name("add"), std::nullopt, 64), Error);
  CHECK_THROWS_AS(apply_cluster_transformation(g3, pair, ops::operation_by_name("sin"), operand, 64), Error);
}

TEST_CASE("one step smoke run") {
  const auto d = support::random_dataset(60, 2, 8);
  auto c = quick_config();
  c.train_episodes = 1;
  c.steps_per_episode = 1;
  c.test_episodes = 0;
  const auto report = run_training(c, d);
  REQUIRE(report.steps.size() == 1);
  CHECK(report.evaluations <= 2);
  CHECK(report.best_cv_metric >= report.raw_cv_metric);
  const auto& step = report.steps[0];
  CHECK(step.reward.total == step.reward.performance + step.reward.complexity);
}

TEST_CASE("training run invariants") {
  const auto d = support::random_dataset(80, 3, 9);
  const auto report = run_training(quick_config(), d);
  CHECK(report.steps.size() == 3 * 3);
  double previous_best = report.raw_cv_metric;
  std::string last_phase;
  std::size_t last_episode = 0;
  double episode_best = 0.0;
  for (const auto& s : report.steps) {
    CHECK(s.reward.total == s.reward.performance + s.reward.complexity);
    CHECK(s.reward.performance == s.metric - s.previous_metric);
    CHECK(s.best_metric >= previous_best);
    previous_best = s.best_metric;
    if (s.phase != last_phase || s.episode != last_episode) episode_best = s.episode_best_metric;
    CHECK(s.episode_best_metric >= episode_best);
    episode_best = s.episode_best_metric;
    last_phase = s.phase;
    last_episode = s.episode;
  }
  CHECK(report.best_cv_metric == previous_best);
  CHECK(report.best_cv_metric >= report.raw_cv_metric);
  CHECK(report.agents.contains("head"));
  CHECK(report.parameter_counts.contains("head_assembly"));
  report.best_graph.check_invariants();
}

TEST_CASE("baselines share the report schema") {
  const auto d = support::random_dataset(80, 3, 10);
  const auto c = quick_config();
  const auto tcto = to_json(run_training(c, d));
  for (const auto& report : {run_baseline_rdg(c, d), run_baseline_erg(c, d)}) {
    CHECK(report.best_cv_metric >= report.raw_cv_metric);
    const auto j = to_json(report);
    for (const auto& [key, value] : tcto.items()) CHECK(j.contains(key));
    for (const auto& [key, value] : j.items()) CHECK(tcto.contains(key));
  }
}

TEST_CASE("runs are reproducible apart from timings") {
  const auto d = support::random_dataset(80, 3, 11);
  const auto c = quick_config();
  CHECK(strip_timings(to_json(run_pipeline(c, d, Method::Tcto))) ==
        strip_timings(to_json(run_pipeline(c, d, Method::Tcto))));
  CHECK(strip_timings(to_json(run_pipeline(c, d, Method::Rdg))) ==
        strip_timings(to_json(run_pipeline(c, d, Method::Rdg))));
  CHECK(strip_timings(to_json(run_pipeline(c, d, Method::Erg))) ==
        strip_timings(to_json(run_pipeline(c, d, Method::Erg))));
}

TEST_CASE("final evaluation of the roots equals the raw baseline") {
  const auto d = support::random_dataset(100, 3, 12);
  const auto [train, test] = tabular::split(d, {0.8, 0});
  const auto roots = graph::FeatureGraph::from_training(train);
  eval::EvaluatorSpec spec;
  spec.forest.tree_count = 10;
  const double raw = eval::holdout_score(spec, train.columns, train.labels, test.columns, test.labels, train.task, 5);
  CHECK(evaluate_final(roots, train, test, spec, 5) == raw);
  CHECK(evaluate_final(roots, train, test, spec, 5) == evaluate_final(roots, train, test, spec, 5));

  const auto reg = support::random_dataset(100, 2, 13, tabular::TaskKind::Regression);
  const auto [rtrain, rtest] = tabular::split(reg, {0.8, 0});
  const auto g = support::random_graph(rtrain, 6, 14);
  const double m = evaluate_final(g, rtrain, rtest, spec, 5);
  CHECK(std::isfinite(m));
  CHECK(m <= 1.0);

  auto renamed = test;
  renamed.names[0] = "other";
  CHECK_THROWS_AS(evaluate_final(roots, train, renamed, spec, 5), Error);
}

TEST_CASE("report json carries every phase timing") {
  const auto d = support::random_dataset(60, 2, 15);
  const auto j = to_json(run_pipeline(quick_config(), d, Method::Tcto));
  const auto& phases = j["timings"]["phases"];
  for (const char* key : {"reward_estimation", "agent_decision", "graph_update", "pruning", "clustering"}) {
    REQUIRE(phases.contains(key));
    CHECK(phases[key].get<double>() >= 0.0);
  }
  CHECK(j["timings"]["total_seconds"].get<double>() >= 0.0);
  CHECK(j["final"]["metric"] == "f1");
  const auto stripped = strip_timings(j);
  CHECK_FALSE(stripped.contains("timings"));
  for (const auto& step : stripped["steps"]) CHECK_FALSE(step.contains("timings"));
}
