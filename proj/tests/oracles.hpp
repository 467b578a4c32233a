#pragma once

// Independent reference implementations the library is checked against.
// None of these call into the code they verify.

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "featgraph/agents.hpp"
#include "featgraph/nn.hpp"
#include "featgraph/random.hpp"

namespace oracle {

using featgraph::Rng;
using featgraph::nn::Tensor;

inline Eigen::MatrixXd random_symmetric(std::size_t n, Rng& rng) {
  const auto size = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd m(size, size);
  for (Eigen::Index i = 0; i < size; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) m(i, j) = m(j, i) = featgraph::uniform_real(rng, -1.0, 1.0);
  return m;
}

/// Naive average linkage: every inter-cluster mean is recomputed from
/// scratch and pairs are scanned in (min member, min member) order.
inline std::vector<std::vector<std::size_t>> average_linkage(const Eigen::MatrixXd& coords, std::size_t k) {
  const auto n = static_cast<std::size_t>(coords.rows());
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters.push_back({i});
  const auto dist = [&](std::size_t a, std::size_t b) {
    return (coords.row(static_cast<Eigen::Index>(a)) - coords.row(static_cast<Eigen::Index>(b))).norm();
  };
  while (clusters.size() > k) {
    std::sort(clusters.begin(), clusters.end());
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        double total = 0.0;
        for (std::size_t i : clusters[a])
          for (std::size_t j : clusters[b]) total += dist(i, j);
        const double avg = total / static_cast<double>(clusters[a].size() * clusters[b].size());
        if (avg < best) {
          best = avg;
          ba = a;
          bb = b;
        }
      }
    }
    clusters[ba].insert(clusters[ba].end(), clusters[bb].begin(), clusters[bb].end());
    std::sort(clusters[ba].begin(), clusters[ba].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
  }
  std::sort(clusters.begin(), clusters.end());
  return clusters;
}

/// Bin of each value: (count strictly below) * bins / n.
inline std::vector<std::size_t> equal_frequency_bins(const std::vector<double>& v, std::size_t bins) {
  std::vector<std::size_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::size_t below = 0;
    for (double w : v) below += w < v[i] ? 1 : 0;
    out[i] = below * bins / v.size();
  }
  return out;
}

/// Plug-in mutual information from the joint histogram, in nats.
inline double mutual_information(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  std::map<std::size_t, double> pa, pb;
  const double n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0 / n;
    pa[a[i]] += 1.0 / n;
    pb[b[i]] += 1.0 / n;
  }
  double mi = 0.0;
  for (const auto& [ab, p] : joint) mi += p * std::log(p / (pa[ab.first] * pb[ab.second]));
  return mi;
}

inline constexpr double kFiniteStep = 1e-5;

// Below 1e-6 a central difference at this step is dominated by round-off,
// so the denominator is floored there.
inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

inline Eigen::VectorXd random_vector(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = featgraph::uniform_real(rng, -1.0, 1.0);
  return v;
}

inline Tensor random_tensor(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Tensor t(r, c);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = featgraph::uniform_real(rng, -1.0, 1.0);
  return t;
}

/// Worst relative error of backward() against central differences of the
/// scalar u . f(x), over every parameter and input.
inline double dense_gradient_error(featgraph::nn::DenseNet& net, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  featgraph::nn::DenseNet::Cache cache;
  net.forward(x, &cache);
  const auto grads = net.backward(cache, u);
  const auto objective = [&](const Eigen::VectorXd& in) { return u.dot(net.forward(in)); };
  double worst = 0.0;
  auto params = net.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p];
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double saved = t.data()[i];
      t.data()[i] = saved + kFiniteStep;
      const double up = objective(x);
      t.data()[i] = saved - kFiniteStep;
      const double down = objective(x);
      t.data()[i] = saved;
      worst = std::max(worst, relative_error(grads.parameters[p].data()[i], (up - down) / (2 * kFiniteStep)));
    }
  }
  Eigen::VectorXd xi = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xi[i] = x[i] + kFiniteStep;
    const double up = objective(xi);
    xi[i] = x[i] - kFiniteStep;
    const double down = objective(xi);
    xi[i] = x[i];
    worst = std::max(worst, relative_error(grads.input[i], (up - down) / (2 * kFiniteStep)));
  }
  return worst;
}

inline featgraph::nn::RelationalGraph random_relational(std::size_t n, std::size_t relations, Rng& rng) {
  featgraph::nn::RelationalGraph g;
  g.neighbors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (featgraph::uniform_real(rng) < 0.5) continue;
      const std::size_t r = featgraph::uniform_index(rng, relations - 1);
      g.neighbors[i].push_back({j, r});
      g.neighbors[j].push_back({i, r});
    }
  }
  return g;
}

/// Same check for the encoder. `samples` == 0 perturbs every weight;
/// otherwise that many seeded weight entries. Inputs are always checked
/// in full.
inline double rgcn_gradient_error(featgraph::nn::RgcnEncoder& enc, const featgraph::nn::RelationalGraph& g,
                                  const Tensor& features, const Tensor& upstream, std::size_t samples, Rng& rng) {
  featgraph::nn::RgcnEncoder::Cache cache;
  enc.forward(features, g, &cache);
  const auto grads = enc.backward(cache, g, upstream);
  const auto objective = [&](const Tensor& f) { return (upstream.array() * enc.forward(f, g).array()).sum(); };
  double worst = 0.0;
  auto params = enc.parameters();
  const auto probe = [&](std::size_t p, Eigen::Index i) {
    Tensor& t = *params[p];
    const double saved = t.data()[i];
    t.data()[i] = saved + kFiniteStep;
    const double up = objective(features);
    t.data()[i] = saved - kFiniteStep;
    const double down = objective(features);
    t.data()[i] = saved;
    worst = std::max(worst, relative_error(grads.parameters[p].data()[i], (up - down) / (2 * kFiniteStep)));
  };
  if (samples == 0) {
    for (std::size_t p = 0; p < params.size(); ++p)
      for (Eigen::Index i = 0; i < params[p]->size(); ++i) probe(p, i);
  } else {
    for (std::size_t s = 0; s < samples; ++s) {
      const std::size_t p = featgraph::uniform_index(rng, params.size());
      probe(p, static_cast<Eigen::Index>(featgraph::uniform_index(rng, static_cast<std::size_t>(params[p]->size()))));
    }
  }
  Tensor f = features;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const double saved = f.data()[i];
    f.data()[i] = saved + kFiniteStep;
    const double up = objective(f);
    f.data()[i] = saved - kFiniteStep;
    const double down = objective(f);
    f.data()[i] = saved;
    worst = std::max(worst, relative_error(grads.input.data()[i], (up - down) / (2 * kFiniteStep)));
  }
  return worst;
}

/// Two states, two actions, deterministic transitions. The optimal policy
/// alternates between the states to collect both rewards.
struct ToyMdp {
  std::array<std::array<int, 2>, 2> next{{{0, 1}, {0, 1}}};
  std::array<std::array<double, 2>, 2> reward{{{0.0, 1.0}, {2.0, 0.0}}};
};

inline std::array<int, 2> value_iteration_policy(const ToyMdp& mdp, double gamma) {
  std::array<double, 2> v{0.0, 0.0};
  for (int it = 0; it < 2000; ++it) {
    std::array<double, 2> nv{};
    for (int s = 0; s < 2; ++s)
      nv[s] = std::max(mdp.reward[s][0] + gamma * v[mdp.next[s][0]], mdp.reward[s][1] + gamma * v[mdp.next[s][1]]);
    v = nv;
  }
  std::array<int, 2> policy{};
  for (int s = 0; s < 2; ++s)
    policy[s] = mdp.reward[s][1] + gamma * v[mdp.next[s][1]] > mdp.reward[s][0] + gamma * v[mdp.next[s][0]] ? 1 : 0;
  return policy;
}

inline Eigen::VectorXd one_hot_state(int s) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(2);
  v[s] = 1.0;
  return v;
}

/// Trains a fresh agent for `steps` environment steps with the library's
/// replay, TD update and target sync, then reads off its greedy policy.
inline std::array<int, 2> train_toy_dqn(const ToyMdp& mdp, double gamma, std::size_t steps, std::uint64_t seed) {
  using namespace featgraph;
  Rng rng(seed);
  agents::AgentBundle agent({2, 16, 2}, rng);
  const agents::EpsilonSchedule eps{1.0, 0.1, steps * 4 / 5};
  int state = 0;
  for (std::size_t step = 0; step < steps; ++step) {
    const Eigen::VectorXd q = agent.prediction.forward(one_hot_state(state));
    const std::vector<double> scores(q.data(), q.data() + q.size());
    const int action = static_cast<int>(agents::epsilon_greedy(scores, eps.at(step), rng).index);
    agents::Transition t;
    t.input = one_hot_state(state);
    t.action = static_cast<std::size_t>(action);
    t.reward = mdp.reward[state][action];
    state = mdp.next[state][action];
    t.next_inputs = {one_hot_state(state)};
    agents::store_transition(agent, t);
    agents::train_step(agent, gamma, nn::Optimizer{0.01}, rng);
    agents::maybe_sync_targets(agent);
  }
  std::array<int, 2> learned{};
  for (int s = 0; s < 2; ++s) {
    const Eigen::VectorXd q = agent.prediction.forward(one_hot_state(s));
    learned[s] = q[1] > q[0] ? 1 : 0;
  }
  return learned;
}

}  // namespace oracle
