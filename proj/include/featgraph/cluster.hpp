#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

#include "featgraph/graph.hpp"

namespace featgraph::cluster {

/// Partition of node positions into k nonempty clusters. Clusters are
/// ordered by their smallest member; members ascend within a cluster.
struct Clustering {
  std::vector<std::size_t> assignment;
  std::vector<std::vector<std::size_t>> clusters;

  std::size_t k() const { return clusters.size(); }
};

enum class ZeroVectorPolicy {
  Throw,
  /// A zero embedding is treated as dissimilar (similarity 0) to everything.
  TreatAsOrthogonal,
};

/// Rows of `embeddings` are node vectors. Diagonal is forced to zero.
Eigen::MatrixXd cosine_similarity_matrix(const Eigen::MatrixXd& embeddings,
                                         ZeroVectorPolicy policy = ZeroVectorPolicy::Throw);

/// S = D - (A + A~), D the diagonal of row sums of A + A~.
Eigen::MatrixXd enhanced_laplacian(const Eigen::MatrixXd& adjacency, const Eigen::MatrixXd& similarity);

struct EigenDecomposition {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // column i pairs with values[i]
  int sweeps = 0;
};

/// Cyclic Jacobi rotations. Converges when the off-diagonal Frobenius norm
/// falls below tol times the matrix norm.
EigenDecomposition symmetric_eigen(const Eigen::MatrixXd& symmetric, double tol = 1e-10, int max_sweeps = 100);

/// Node coordinates: row i holds component i of the eigenvectors of the
/// `dimension` smallest eigenvalues.
Eigen::MatrixXd spectral_embed(const Eigen::MatrixXd& laplacian, std::size_t dimension);

/// Average-linkage agglomeration under Euclidean distance. Ties go to the
/// pair whose (min member, min member) is lexicographically smallest.
Clustering agglomerate(const Eigen::MatrixXd& coords, std::size_t k);

enum class ClusterSignal { Combined, StructureOnly, FeatureOnly };

struct ClusterOptions {
  ClusterSignal signal = ClusterSignal::Combined;
  std::size_t max_dimension = 8;
  /// Spectral dimension min(max_dimension, k). When false it is
  /// min(max_dimension, n), which for n <= max_dimension yields a full
  /// orthonormal basis whose rows are all sqrt(2) apart.
  bool dimension_from_k = true;
  double tol = 1e-10;
  int max_sweeps = 100;
};

/// max(2, floor(sqrt(n))), never more than n.
std::size_t default_cluster_count(std::size_t node_count);

/// Embeddings of every node as rows, in node order.
Eigen::MatrixXd embedding_matrix(const graph::FeatureGraph& graph);

Clustering cluster_graph(const graph::FeatureGraph& graph, std::size_t k, const ClusterOptions& options = {});

}  // namespace featgraph::cluster
