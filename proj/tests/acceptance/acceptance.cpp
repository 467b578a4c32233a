// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails. Pass criterion numbers as arguments to run a subset.

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "featgraph/cli.hpp"
#include "featgraph/cluster.hpp"
#include "featgraph/config.hpp"
#include "featgraph/controller.hpp"
#include "featgraph/graph_io.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace featgraph;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

std::string sci(double v) {
  std::ostringstream out;
  out << std::scientific << std::setprecision(2) << v;
  return out.str();
}

const std::string kDataDir = FEATGRAPH_DATA_DIR;

Outcome clustering_oracle() {
  const auto started = std::chrono::steady_clock::now();
  int instances = 0;
  int matched = 0;
  for (std::uint64_t seed = 0; instances < 50; ++seed) {
    const auto d = support::random_dataset(30, 2 + seed % 3, seed + 1000);
    const auto g = support::random_graph(d, 1 + seed % 7, seed * 13 + 5);
    if (g.node_count() > 8 || g.node_count() < 2) continue;
    Rng rng(seed);
    const std::size_t k = 1 + uniform_index(rng, g.node_count());
    const auto got = cluster::cluster_graph(g, k);
    const auto sim = cluster::cosine_similarity_matrix(cluster::embedding_matrix(g),
                                                       cluster::ZeroVectorPolicy::TreatAsOrthogonal);
    const auto eig = cluster::symmetric_eigen(cluster::enhanced_laplacian(g.symmetric_adjacency(), sim));
    const auto dim = static_cast<Eigen::Index>(std::min<std::size_t>(8, k));
    if (got.clusters == oracle::average_linkage(eig.vectors.leftCols(dim), k)) ++matched;
    ++instances;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {matched == instances && seconds < 10.0,
          std::to_string(matched) + "/" + std::to_string(instances) + " instances match, " + fmt(seconds, 2) + " s"};
}

Outcome eigensolver_oracle() {
  Rng rng(7);
  double recon = 0.0;
  double ortho = 0.0;
  double spectrum = 0.0;
  for (std::size_t n = 1; n <= 50; ++n) {
    const auto s = oracle::random_symmetric(n, rng);
    const auto eig = cluster::symmetric_eigen(s);
    const auto& q = eig.vectors;
    const auto size = static_cast<Eigen::Index>(n);
    recon = std::max(recon, (q * eig.values.asDiagonal() * q.transpose() - s).cwiseAbs().maxCoeff());
    ortho = std::max(ortho, (q.transpose() * q - Eigen::MatrixXd::Identity(size, size)).cwiseAbs().maxCoeff());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> reference(s);
    spectrum = std::max(spectrum, (reference.eigenvalues() - eig.values).cwiseAbs().maxCoeff());
  }
  Eigen::MatrixXd two(2, 2);
  two << 2, -2, -2, 2;
  const auto small = cluster::symmetric_eigen(two);
  const double example = std::max(std::abs(small.values[0]), std::abs(small.values[1] - 4.0));
  return {recon <= 1e-8 && ortho <= 1e-8 && example <= 1e-10,
          "n=1..50 recon " + sci(recon) + ", orthogonality " + sci(ortho) + ", vs reference " + sci(spectrum) +
              ", 2x2 " + sci(example)};
}

Outcome gradient_checks() {
  const std::vector<std::vector<std::size_t>> shapes{{7, 100, 1}, {128, 100, 1}, {128, 100, 15}, {256, 100, 1}};
  double dense = 0.0;
  for (const auto& dims : shapes) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      nn::DenseNet net(dims, rng);
      const auto x = oracle::random_vector(static_cast<Eigen::Index>(dims.front()), rng);
      const auto u = oracle::random_vector(static_cast<Eigen::Index>(dims.back()), rng);
      dense = std::max(dense, oracle::dense_gradient_error(net, x, u));
    }
  }
  double rgcn = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 50);
    nn::RgcnEncoder enc(16, {7, 32, 64}, rng);
    const auto g = oracle::random_relational(5, 16, rng);
    const auto feats = oracle::random_tensor(5, 7, rng);
    const auto u = oracle::random_tensor(5, 64, rng);
    rgcn = std::max(rgcn, oracle::rgcn_gradient_error(enc, g, feats, u, 0, rng));
  }
  return {dense <= 1e-4 && rgcn <= 1e-4, "dense max rel " + sci(dense) + ", rgcn max rel " + sci(rgcn) + " (20 seeds)"};
}

Outcome mutual_information() {
  const std::vector<double> label{0, 0, 1, 1};
  const double perfect = controller::mutual_information(label, label, tabular::TaskKind::Classification);
  const double independent =
      controller::mutual_information(std::vector<double>{0, 1, 0, 1}, label, tabular::TaskKind::Classification);
  double worst = std::max(std::abs(perfect - std::log(2.0)), std::abs(independent));
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 4 + uniform_index(rng, 100);
    std::vector<double> feature(n), cls(n), target(n);
    for (std::size_t i = 0; i < n; ++i) {
      feature[i] = std::round(uniform_real(rng, -4, 4) * 3) / 3;
      cls[i] = static_cast<double>(uniform_index(rng, 4));
      target[i] = feature[i] + uniform_real(rng, -1, 1);
    }
    const auto fb = oracle::equal_frequency_bins(feature, 20);
    std::vector<std::size_t> cb(cls.begin(), cls.end());
    worst = std::max(worst, std::abs(controller::mutual_information(feature, cls, tabular::TaskKind::Classification) -
                                     oracle::mutual_information(fb, cb)));
    worst = std::max(worst, std::abs(controller::mutual_information(feature, target, tabular::TaskKind::Regression) -
                                     oracle::mutual_information(fb, oracle::equal_frequency_bins(target, 20))));
  }
  return {worst <= 1e-12, "max |MI - oracle| " + sci(worst) + " over 200 cases, ln2 case " + fmt(perfect, 12)};
}

Outcome graph_round_trips() {
  bool materialize_exact = true;
  double trace_error = 0.0;
  bool snapshot_exact = true;
  bool roots_kept = true;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto d = support::random_dataset(50, 3, seed);
    auto g = support::random_graph(d, 30, seed + 77);
    const auto columns = g.materialize(d);
    for (std::size_t i = 0; i < columns.size(); ++i) materialize_exact &= columns[i] == g.nodes()[i].train_column;
    for (const auto& node : g.nodes()) {
      const auto values = graph::evaluate_formula(graph::parse_formula(g.trace_formula(node.id)), d);
      for (std::size_t r = 0; r < values.size(); ++r)
        trace_error = std::max(trace_error, std::abs(values[r] - node.train_column[r]) /
                                                std::max(1.0, std::abs(node.train_column[r])));
    }
    const auto snap = g.snapshot();
    const auto copy = g;
    g.add_transform(ops::operation_by_name("tanh"), std::vector<graph::NodeId>{0});
    snapshot_exact &= graph::identical(graph::FeatureGraph::restore(snap), copy);

    controller::node_wise_prune(g, d.labels, d.task, 1 + seed % 5);
    for (std::size_t r = 0; r < 3; ++r) roots_kept &= g.contains(static_cast<graph::NodeId>(r));
    std::set<graph::NodeId> all;
    for (const auto& n : g.nodes()) all.insert(n.id);
    g.remove_nodes(all);
    roots_kept &= g.node_count() == 3;
  }
  return {materialize_exact && trace_error <= 1e-12 && snapshot_exact && roots_kept,
          std::string("materialize ") + (materialize_exact ? "bit-exact" : "DIFFERS") + ", trace max rel err " +
              sci(trace_error) + ", snapshot " + (snapshot_exact ? "bit-exact" : "DIFFERS") + ", roots " +
              (roots_kept ? "kept" : "LOST")};
}

config::PipelineConfig small_config() {
  config::PipelineConfig c;
  c.train_episodes = 3;
  c.steps_per_episode = 4;
  c.test_episodes = 1;
  c.forest_trees = 10;
  c.cv_folds = 3;
  return c;
}

Outcome reward_arithmetic() {
  const auto d = support::random_dataset(20, 1, 1);
  auto g = graph::FeatureGraph::from_training(d);
  const double roots = controller::compute_reward(0.3, 0.3, g).complexity;
  g.add_transform(ops::operation_by_name("sin"), std::vector<graph::NodeId>{0});
  const double mixed = controller::compute_reward(0.3, 0.3, g).complexity;

  const auto toy = tabular::load_csv(kDataDir + "/toy_two_feature.csv", "label", tabular::TaskKind::Classification);
  const auto report = controller::run_training(small_config(), toy);
  std::size_t bad = 0;
  for (const auto& s : report.steps) {
    if (s.reward.total != s.reward.performance + s.reward.complexity) ++bad;
    if (s.reward.performance != s.metric - s.previous_metric) ++bad;
  }
  const bool pass = roots == 1.0 && std::abs(mixed - (1.0 + std::exp(-1.0)) / 2.0) <= 1e-15 && bad == 0 &&
                    !report.steps.empty();
  return {pass, "R_c roots " + fmt(roots, 6) + ", depths {0,1} " + fmt(mixed, 6) + ", " +
                    std::to_string(report.steps.size() - bad) + "/" + std::to_string(report.steps.size()) +
                    " logged steps with R = R_p + R_c"};
}

Outcome dqn_sanity() {
  const oracle::ToyMdp mdp;
  const double gamma = 0.9;
  const auto best = oracle::value_iteration_policy(mdp, gamma);
  int solved = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) solved += oracle::train_toy_dqn(mdp, gamma, 500, seed) == best ? 1 : 0;
  return {solved == 5, std::to_string(solved) + "/5 seeds reach the value-iteration policy in 500 steps"};
}

Outcome hyperparameter_fidelity() {
  const auto c = config::parse_config_text("{}");
  const bool pass = c.train_episodes == 50 && c.steps_per_episode == 100 && c.test_episodes == 10 &&
                    c.encoder_hidden == 32 && c.encoder_output == 64 && c.predictor_hidden == 100 &&
                    c.target_sync_interval == 10 && c.replay_capacity == 16 && c.batch_size == 8 &&
                    c.learning_rate == 0.01 && c.prune_fraction == 0.30;
  return {pass, "empty config: episodes " +
                    std::to_string(c.train_episodes) + "x" + std::to_string(c.steps_per_episode) + ", test " +
                    std::to_string(c.test_episodes) + ", encoder " + std::to_string(c.encoder_hidden) + "/" +
                    std::to_string(c.encoder_output) + ", predictor " + std::to_string(c.predictor_hidden) +
                    ", sync " + std::to_string(c.target_sync_interval) + ", buffer " +
                    std::to_string(c.replay_capacity) + ", batch " + std::to_string(c.batch_size) + ", lr " +
                    fmt(c.learning_rate, 2) + ", prune " + fmt(c.prune_fraction, 2)};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

Outcome desk_scale() {
  const auto data = tabular::load_csv(kDataDir + "/pima_indians.csv", "outcome", tabular::TaskKind::Classification);
  std::vector<double> tcto, rdg;
  int improved = 0;
  std::ostringstream per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    config::PipelineConfig c;
    c.train_episodes = 10;
    c.steps_per_episode = 30;
    c.test_episodes = 1;
    c.seed = seed;
    const auto started = std::chrono::steady_clock::now();
    const auto t = controller::run_pipeline(c, data, controller::Method::Tcto);
    const auto r = controller::run_pipeline(c, data, controller::Method::Rdg);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const auto& tf = *t.final_metrics;
    tcto.push_back(tf.best);
    rdg.push_back(r.final_metrics->best);
    if (tf.best >= tf.raw + 0.01) ++improved;
    per_seed << "\n    seed " << seed << ": raw " << fmt(tf.raw) << ", tcto " << fmt(tf.best) << " ("
             << tf.best_feature_count << " features), rdg " << fmt(r.final_metrics->best) << ", " << fmt(seconds, 1)
             << " s";
    std::cout << "    [9] seed " << seed << " done" << std::endl;
  }
  const double mt = median(tcto);
  const double mr = median(rdg);
  return {improved >= 3 && mt >= mr, std::to_string(improved) + "/5 seeds with tcto >= raw + 0.01, median tcto " +
                                         fmt(mt) + " vs median rdg " + fmt(mr) + per_seed.str()};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

int cli(const std::vector<std::string>& args, std::string& out) {
  std::vector<const char*> argv{"featgraph"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::main_entry(static_cast<int>(argv.size()), argv.data(), o, e);
  out = o.str();
  return code;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "featgraph-acceptance-determinism";
  fs::remove_all(root);
  const std::string data = kDataDir + "/toy_two_feature.csv";
  bool same = true;
  for (const std::string kind : {"tcto", "rdg", "erg"}) {
    std::array<std::string, 5> outputs[2];
    for (int rep = 0; rep < 2; ++rep) {
      const auto dir = root / (kind + std::to_string(rep));
      std::vector<std::string> args{kind == "tcto" ? "run" : "baseline", "--data", data, "--label", "label",
                                    "--out", dir.string(), "--set", "train_episodes=3", "steps_per_episode=5",
                                    "test_episodes=1", "forest_trees=10", "seed=3"};
      if (kind != "tcto") args.insert(args.begin() + 1, {"--kind", kind});
      std::string out;
      if (cli(args, out) != 0) return {false, kind + " run failed"};
      std::ifstream in(dir / "report.json");
      outputs[rep][0] = controller::strip_timings(nlohmann::json::parse(in)).dump();
      cli({"trace", "--run", dir.string()}, outputs[rep][1]);
      cli({"export", "--run", dir.string(), "--format", "json"}, outputs[rep][2]);
      cli({"export", "--run", dir.string(), "--format", "csv", "--split", "test"}, outputs[rep][3]);
      cli({"evaluate", "--run", dir.string()}, outputs[rep][4]);
    }
    same &= outputs[0] == outputs[1];
  }
  fs::remove_all(root);
  return {same, std::string("run/baseline rdg/baseline erg twice each; report (timings stripped), trace, export, "
                            "evaluate ") +
                    (same ? "identical" : "DIFFER")};
}

Outcome phase_timings() {
  const auto toy = tabular::load_csv(kDataDir + "/toy_two_feature.csv", "label", tabular::TaskKind::Classification);
  const std::vector<std::string> phases{"reward_estimation", "agent_decision", "graph_update", "pruning", "clustering"};
  std::size_t steps = 0;
  bool ok = true;
  for (auto method : {controller::Method::Tcto, controller::Method::Rdg, controller::Method::Erg}) {
    const auto j = controller::to_json(controller::run_pipeline(small_config(), toy, method));
    const auto check = [&](const nlohmann::json& t) {
      for (const auto& p : phases) ok &= t.contains(p) && t[p].is_number() && t[p].get<double>() >= 0.0;
    };
    ok &= j.contains("timings") && j["timings"].contains("phases");
    if (!ok) break;
    check(j["timings"]["phases"]);
    ok &= j["timings"]["total_seconds"].get<double>() >= 0.0;
    for (const auto& s : j["steps"]) {
      ok &= s.contains("timings");
      if (ok) check(s["timings"]);
      ++steps;
    }
  }
  return {ok, "five phases present and non-negative in 3 run reports and " + std::to_string(steps) + " step records"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"clustering oracle", clustering_oracle},
      {"eigensolver oracle", eigensolver_oracle},
      {"gradient checks", gradient_checks},
      {"mutual information", mutual_information},
      {"graph round-trips", graph_round_trips},
      {"reward arithmetic", reward_arithmetic},
      {"DQN sanity", dqn_sanity},
      {"hyperparameter defaults", hyperparameter_fidelity},
      {"desk-scale end-to-end", desk_scale},
      {"determinism", determinism},
      {"phase timing report", phase_timings},
  };
  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.insert(static_cast<std::size_t>(std::stoul(argv[i])));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const std::size_t number = i + 1;
    if (!selected.empty() && selected.count(number) == 0) continue;
    const auto started = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (!outcome.pass) ++failures;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << " criterion " << number << " " << criteria[i].first << ": "
              << outcome.detail << " [" << fmt(seconds, 1) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
