#include <array>
#include <cmath>

#include "doctest.h"
#include "featgraph/agents.hpp"
#include "featgraph/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace featgraph;
using namespace featgraph::agents;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

// A scalar scorer that returns its first input.
AgentBundle passthrough(std::size_t width) {
  AgentBundle b;
  b.prediction = nn::DenseNet::zeros({width, 1});
  b.prediction.layers()[0].weight(0, 0) = 1.0;
  b.target = b.prediction;
  return b;
}

}  // namespace

TEST_CASE("epsilon schedule decays linearly then stays flat") {
  const EpsilonSchedule e{0.9, 0.1, 100};
  CHECK(e.at(0) == 0.9);
  CHECK(e.at(50) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(e.at(100) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(e.at(1000) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("greedy selection examples") {
  Rng rng(0);
  const std::vector<double> two{0.2, 0.9};
  CHECK(epsilon_greedy(two, 0.0, rng).index == 1);
  CHECK(epsilon_greedy(two, 0.0, rng).q == 0.9);
  const std::vector<double> tied{0.5, 0.5, 0.5};
  CHECK(epsilon_greedy(tied, 0.0, rng).index == 0);
  const std::vector<double> single{-3.0};
  for (int i = 0; i < 20; ++i) CHECK(epsilon_greedy(single, 1.0, rng).index == 0);
  CHECK_THROWS_AS(epsilon_greedy(std::vector<double>{}, 0.0, rng), Error);
}

TEST_CASE("greedy choice is invariant to positive scaling") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> scores(1 + uniform_index(rng, 10));
    for (auto& s : scores) s = std::round(uniform_real(rng, -5, 5));  // rounding forces ties
    const double factor = uniform_real(rng, 0.01, 100.0);
    std::vector<double> scaled(scores);
    for (auto& s : scaled) s *= factor;
    CHECK(epsilon_greedy(scores, 0.0, rng).index == epsilon_greedy(scaled, 0.0, rng).index);
  }
}

TEST_CASE("full exploration is uniform") {
  Rng rng(2);
  const std::vector<double> four(4, 0.0);
  std::array<int, 4> counts{};
  for (int i = 0; i < 10000; ++i) ++counts[epsilon_greedy(four, 1.0, rng).index];
  for (int c : counts) {
    CHECK(c >= 2300);
    CHECK(c <= 2700);
  }

  // Operation agent over the fifteen kinds.
  AgentBundle op;
  op.prediction = nn::DenseNet::zeros({4, 15});
  const auto rep = vec({0, 0});
  std::array<int, 15> ops{};
  for (int i = 0; i < 15000; ++i) ++ops[select_operation(op, rep, rep, 1.0, rng).index];
  for (int c : ops) {
    CHECK(c >= 800);
    CHECK(c <= 1200);
  }
  CHECK(select_operation(op, rep, rep, 0.0, rng).index == 0);
}

TEST_CASE("select_head, select_operation and select_operand") {
  Rng rng(3);
  const auto head = passthrough(2);
  const std::vector<Eigen::VectorXd> clusters{vec({0.2}), vec({0.9})};
  const auto graph_rep = vec({0.0});
  CHECK(select_head(head, clusters, graph_rep, 0.0, rng).index == 1);
  CHECK_THROWS_AS(select_head(head, std::vector<Eigen::VectorXd>{}, graph_rep, 0.0, rng), Error);

  AgentBundle op;
  op.prediction = nn::DenseNet::zeros({2, 5});
  op.prediction.layers()[0].bias(3, 0) = 1.0;
  CHECK(select_operation(op, graph_rep, graph_rep, 0.0, rng).index == 3);
  const bool mask[] = {true, true, true, false, true};
  CHECK(select_operation(op, graph_rep, graph_rep, 0.0, rng, mask).index == 0);
  const bool none[] = {false, false, false, false, false};
  CHECK_THROWS_AS(select_operation(op, graph_rep, graph_rep, 0.0, rng, none), Error);

  // Input order is head, graph, op, candidate; score the candidate slot.
  AgentBundle operand;
  operand.prediction = nn::DenseNet::zeros({4, 1});
  operand.prediction.layers()[0].weight(0, 3) = 1.0;
  const std::vector<Eigen::VectorXd> candidates{vec({0.1}), vec({0.5})};
  CHECK(select_operand(operand, graph_rep, graph_rep, graph_rep, candidates, 0.0, rng).index == 1);
  const std::vector<Eigen::VectorXd> one{vec({-1.0})};
  CHECK(select_operand(operand, graph_rep, graph_rep, graph_rep, one, 1.0, rng).index == 0);
  CHECK_THROWS_AS(select_operand(operand, graph_rep, graph_rep, graph_rep, std::vector<Eigen::VectorXd>{}, 0.0, rng),
                  Error);
}

TEST_CASE("replay buffer is FIFO with a hard capacity") {
  ReplayBuffer buffer(16);
  CHECK(buffer.empty());
  for (int i = 0; i < 17; ++i) {
    Transition t;
    t.reward = i;
    buffer.push(t);
  }
  CHECK(buffer.size() == 16);
  CHECK(buffer[0].reward == 1.0);
  for (std::size_t i = 0; i < 16; ++i) CHECK(buffer[i].reward == static_cast<double>(i + 1));
}

TEST_CASE("td target and loss arithmetic") {
  CHECK(td_target(0.5, 0.95, 1.0, false) == doctest::Approx(1.45).epsilon(1e-15));
  CHECK(td_target(0.5, 0.95, 1.0, true) == 0.5);

  // Q_p = 1 everywhere, max target Q = 1: loss (1 - 1.45)^2.
  AgentBundle b;
  b.prediction = nn::DenseNet::zeros({1, 1});
  b.prediction.layers()[0].bias(0, 0) = 1.0;
  b.target = b.prediction;
  for (int i = 0; i < 8; ++i) {
    Transition t;
    t.input = vec({0.0});
    t.reward = 0.5;
    t.next_inputs = {vec({0.0})};
    store_transition(b, t);
  }
  Rng rng(4);
  const auto loss = train_step(b, 0.95, nn::Optimizer{0.01}, rng);
  REQUIRE(loss.has_value());
  CHECK(*loss == doctest::Approx(0.2025).epsilon(1e-12));

  AgentBundle terminal;
  terminal.prediction = nn::DenseNet::zeros({1, 1});
  terminal.prediction.layers()[0].bias(0, 0) = 0.5;
  terminal.target = terminal.prediction;
  for (int i = 0; i < 8; ++i) {
    Transition t;
    t.input = vec({0.0});
    t.reward = 0.5;
    t.terminal = true;
    store_transition(terminal, t);
  }
  CHECK(*train_step(terminal, 0.95, nn::Optimizer{0.01}, rng) == 0.0);
}

TEST_CASE("training waits for a full batch and never touches the target") {
  Rng rng(5);
  AgentBundle b({3, 4, 1}, rng);
  const auto before = b.target.layers()[0].weight;
  for (int i = 0; i < 7; ++i) {
    Transition t;
    t.input = vec({1, 2, 3});
    t.reward = 1.0;
    t.next_inputs = {vec({0, 1, 0})};
    store_transition(b, t);
    CHECK_FALSE(train_step(b, 0.95, nn::Optimizer{0.01}, rng).has_value());
  }
  Transition t;
  t.input = vec({1, 0, 0});
  t.reward = 1.0;
  t.next_inputs = {};
  store_transition(b, t);
  CHECK(train_step(b, 0.95, nn::Optimizer{0.01}, rng).has_value());
  CHECK(b.target.layers()[0].weight == before);
  CHECK(b.prediction.layers()[0].weight != before);
}

TEST_CASE("targets sync on every tenth step") {
  Rng rng(6);
  AgentBundle b({2, 3, 1}, rng);
  sgd_step(nn::Optimizer{0.1}, b.prediction.parameters(),
           std::vector<nn::Tensor>{nn::Tensor::Ones(3, 2), nn::Tensor::Ones(3, 1), nn::Tensor::Ones(1, 3),
                                   nn::Tensor::Ones(1, 1)});
  const auto x = vec({0.3, -0.7});
  for (int step = 1; step <= 9; ++step) CHECK_FALSE(maybe_sync_targets(b));
  CHECK(b.target.forward(x) != b.prediction.forward(x));
  CHECK(maybe_sync_targets(b));
  CHECK(b.target.forward(x) == b.prediction.forward(x));
  CHECK(b.steps_since_sync == 0);
  for (int step = 1; step <= 9; ++step) CHECK_FALSE(maybe_sync_targets(b));
  CHECK(maybe_sync_targets(b));
}

TEST_CASE("DQN learns the value-iteration policy of a two-state MDP") {
  const oracle::ToyMdp mdp;
  const double gamma = 0.9;
  const auto best = oracle::value_iteration_policy(mdp, gamma);
  CHECK(best == std::array<int, 2>{1, 0});
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CAPTURE(seed);
    CHECK(oracle::train_toy_dqn(mdp, gamma, 500, seed) == best);
  }
}

TEST_CASE("state encoding shapes and relation typing") {
  const auto d = support::random_dataset(30, 3, 7);
  const auto g = support::random_graph(d, 10, 8);
  const auto operations = ops::default_operation_set();
  const auto rel = relational_view(g, operations);
  REQUIRE(rel.node_count() == g.node_count());
  std::size_t links = 0;
  for (const auto& list : rel.neighbors) {
    links += list.size();
    for (const auto& n : list) CHECK(n.relation < operations.size());
  }
  CHECK(links == 2 * g.edges().size());

  const std::vector<ops::OperationKind> only_add{ops::operation_by_name("add")};
  if (!g.edges().empty()) CHECK_THROWS_AS(relational_view(g, only_add), Error);

  const auto clustering = cluster::cluster_graph(g, cluster::default_cluster_count(g.node_count()));
  Rng rng(9);
  const nn::RgcnEncoder enc(operations.size() + 1, {7, 32, 64}, rng);
  const auto state = encode_state(g, clustering, enc, operations);
  CHECK(state.features.rows() == static_cast<Eigen::Index>(g.node_count()));
  CHECK(state.features.cols() == 7);
  CHECK(state.node_reps.cols() == 64);
  CHECK(state.cluster_reps.size() == clustering.k());
  CHECK(state.graph_rep.size() == 64);
  std::vector<std::size_t> all(g.node_count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  CHECK((state.graph_rep - mean_rows(state.node_reps, all)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("squash and one-hot embedding") {
  CHECK(squash(0.0) == 0.0);
  CHECK(squash(std::exp(1.0) - 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(squash(-(std::exp(2.0) - 1.0)) == doctest::Approx(-2.0).epsilon(1e-15));
  const auto e = one_hot_embedding(15, 64);
  CHECK(e.rows() == 15);
  CHECK(e.cols() == 64);
  CHECK((e * e.transpose() - nn::Tensor::Identity(15, 15)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(one_hot_embedding(65, 64), Error);
}
