#include "featgraph/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "featgraph/error.hpp"

namespace featgraph::cluster {

Eigen::MatrixXd cosine_similarity_matrix(const Eigen::MatrixXd& embeddings, ZeroVectorPolicy policy) {
  const Eigen::Index n = embeddings.rows();
  Eigen::VectorXd norms(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    norms(i) = embeddings.row(i).norm();
    if (norms(i) == 0.0 && policy == ZeroVectorPolicy::Throw)
      throw Error(ErrorCode::ZeroVector, "embedding " + std::to_string(i) + " is the zero vector");
  }
  Eigen::MatrixXd similarity = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (norms(i) == 0.0 || norms(j) == 0.0) continue;
      const double value = std::clamp(embeddings.row(i).dot(embeddings.row(j)) / (norms(i) * norms(j)), -1.0, 1.0);
      similarity(i, j) = value;
      similarity(j, i) = value;
    }
  }
  return similarity;
}

Eigen::MatrixXd enhanced_laplacian(const Eigen::MatrixXd& adjacency, const Eigen::MatrixXd& similarity) {
  if (adjacency.rows() != adjacency.cols() || adjacency.rows() != similarity.rows() ||
      adjacency.cols() != similarity.cols())
    throw Error(ErrorCode::ShapeMismatch, "adjacency and similarity must be equal square matrices");
  const Eigen::MatrixXd combined = adjacency + similarity;
  Eigen::MatrixXd laplacian = -combined;
  for (Eigen::Index i = 0; i < combined.rows(); ++i) laplacian(i, i) += combined.row(i).sum();
  return laplacian;
}

EigenDecomposition symmetric_eigen(const Eigen::MatrixXd& symmetric, double tol, int max_sweeps) {
  if (symmetric.rows() != symmetric.cols()) throw Error(ErrorCode::ShapeMismatch, "eigen solver needs a square matrix");
  const Eigen::Index n = symmetric.rows();
  Eigen::MatrixXd a = symmetric;
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = a.norm();

  const auto off_norm = [&]() {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) sum += a(i, j) * a(i, j);
    return std::sqrt(sum);
  };

  int sweep = 0;
  while (true) {
    const double off = off_norm();
    if (off == 0.0 || off <= tol * scale) break;
    if (sweep == max_sweeps)
      throw Error(ErrorCode::NoConvergence, "Jacobi did not converge in " + std::to_string(max_sweeps) + " sweeps");
    ++sweep;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // A <- J^T A J with J the (p, q) plane rotation [c s; -s c].
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return a(x, x) < a(y, y); });

  EigenDecomposition out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  out.sweeps = sweep;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

Eigen::MatrixXd spectral_embed(const Eigen::MatrixXd& laplacian, std::size_t dimension) {
  const auto n = static_cast<std::size_t>(laplacian.rows());
  if (dimension == 0 || dimension > n)
    throw Error(ErrorCode::DimensionTooLarge, "spectral dimension " + std::to_string(dimension) + " for " +
                                                  std::to_string(n) + " nodes");
  const auto eig = symmetric_eigen(laplacian);
  return eig.vectors.leftCols(static_cast<Eigen::Index>(dimension));
}

Clustering agglomerate(const Eigen::MatrixXd& coords, std::size_t k) {
  const auto n = static_cast<std::size_t>(coords.rows());
  if (k < 1 || k > n) throw Error(ErrorCode::InvalidK, "k=" + std::to_string(k) + " for " + std::to_string(n) + " points");

  // Pairwise distance sums between clusters; average linkage divides by the
  // product of sizes.
  std::vector<std::vector<double>> sums(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = (coords.row(static_cast<Eigen::Index>(i)) - coords.row(static_cast<Eigen::Index>(j))).norm();
      sums[i][j] = d;
      sums[j][i] = d;
    }
  }
  // Cluster slot i starts as {i}; its min member is i, and slots stay
  // keyed by min member after merges, so ascending slot order is the
  // tie-break order.
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};
  std::vector<bool> active(n, true);
  std::size_t remaining = n;

  while (remaining > k) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_a = 0;
    std::size_t best_b = 0;
    for (std::size_t a = 0; a < n; ++a) {
      if (!active[a]) continue;
      for (std::size_t b = a + 1; b < n; ++b) {
        if (!active[b]) continue;
        const double avg = sums[a][b] / static_cast<double>(members[a].size() * members[b].size());
        if (avg < best) {
          best = avg;
          best_a = a;
          best_b = b;
        }
      }
    }
    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c] || c == best_a || c == best_b) continue;
      sums[best_a][c] += sums[best_b][c];
      sums[c][best_a] = sums[best_a][c];
    }
    members[best_a].insert(members[best_a].end(), members[best_b].begin(), members[best_b].end());
    std::sort(members[best_a].begin(), members[best_a].end());
    members[best_b].clear();
    active[best_b] = false;
    --remaining;
  }

  Clustering out;
  out.assignment.assign(n, 0);
  for (std::size_t a = 0; a < n; ++a) {
    if (!active[a]) continue;
    for (std::size_t m : members[a]) out.assignment[m] = out.clusters.size();
    out.clusters.push_back(members[a]);
  }
  return out;
}

std::size_t default_cluster_count(std::size_t node_count) {
  const auto root = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(node_count))));
  return std::min(node_count, std::max<std::size_t>(2, root));
}

Eigen::MatrixXd embedding_matrix(const graph::FeatureGraph& graph) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(graph.node_count()), static_cast<Eigen::Index>(tabular::ColumnStats::kDimension));
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    const auto values = graph.nodes()[i].embedding.as_array();
    for (std::size_t j = 0; j < values.size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[j];
  }
  return out;
}

Clustering cluster_graph(const graph::FeatureGraph& graph, std::size_t k, const ClusterOptions& options) {
  const std::size_t n = graph.node_count();
  if (k < 1 || k > n) throw Error(ErrorCode::InvalidK, "k=" + std::to_string(k) + " for " + std::to_string(n) + " nodes");
  const auto size = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd adjacency = options.signal == ClusterSignal::FeatureOnly ? Eigen::MatrixXd::Zero(size, size)
                                                                          : graph.symmetric_adjacency();
  Eigen::MatrixXd similarity = options.signal == ClusterSignal::StructureOnly
                                   ? Eigen::MatrixXd::Zero(size, size)
                                   : cosine_similarity_matrix(embedding_matrix(graph), ZeroVectorPolicy::TreatAsOrthogonal);
  const auto laplacian = enhanced_laplacian(adjacency, similarity);
  const std::size_t dimension = std::max<std::size_t>(1, std::min(options.max_dimension, options.dimension_from_k ? k : n));
  const auto eig = symmetric_eigen(laplacian, options.tol, options.max_sweeps);
  return agglomerate(eig.vectors.leftCols(static_cast<Eigen::Index>(dimension)), k);
}

}  // namespace featgraph::cluster
