#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <vector>

#include "json.hpp"

#include "featgraph/random.hpp"

namespace featgraph::nn {

using Tensor = Eigen::MatrixXd;

/// Plain gradient descent: theta <- theta - lr * grad.
struct Optimizer {
  double learning_rate = 0.01;
};

/// Applies one step to every (parameter, gradient) pair. Shapes must match.
void sgd_step(const Optimizer& optimizer, std::span<Tensor* const> parameters, std::span<const Tensor> gradients);

struct DenseLayer {
  Tensor weight;  // out x in
  Tensor bias;    // out x 1
};

/// Feed-forward network: ReLU on hidden layers, linear output.
class DenseNet {
 public:
  struct Cache {
    std::vector<Eigen::VectorXd> inputs;  // input to each layer
    std::vector<Eigen::VectorXd> pre;     // pre-activation of each layer
  };

  struct Gradients {
    std::vector<Tensor> parameters;  // same order as parameters()
    Eigen::VectorXd input;
  };

  DenseNet() = default;
  /// Weights and biases drawn uniformly from +-1/sqrt(fan_in).
  DenseNet(std::vector<std::size_t> dims, Rng& rng);
  static DenseNet zeros(std::vector<std::size_t> dims);

  Eigen::VectorXd forward(const Eigen::VectorXd& input, Cache* cache = nullptr) const;
  Gradients backward(const Cache& cache, const Eigen::VectorXd& upstream) const;

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::size_t parameter_count() const;

 private:
  std::vector<std::size_t> dims_;
  std::vector<DenseLayer> layers_;
};

void copy_parameters(const DenseNet& source, DenseNet& destination);

struct Neighbor {
  std::size_t node = 0;
  std::size_t relation = 0;
};

/// Typed neighbour lists, one per node.
struct RelationalGraph {
  std::vector<std::vector<Neighbor>> neighbors;
  std::size_t node_count() const { return neighbors.size(); }
};

/// Relational graph convolution. Each layer sums, per relation, the
/// neighbour mean transformed by that relation's weight, adds a self-loop
/// term, and applies ReLU. The self-loop relation is the last one.
class RgcnEncoder {
 public:
  struct Cache {
    std::vector<Tensor> inputs;                    // n x in, per layer
    std::vector<std::vector<Tensor>> aggregates;   // per layer, per relation: n x in neighbour means
    std::vector<Tensor> pre;                       // n x out, per layer
  };

  struct Gradients {
    std::vector<Tensor> parameters;  // same order as parameters()
    Tensor input;
  };

  RgcnEncoder() = default;
  RgcnEncoder(std::size_t relation_count, std::vector<std::size_t> dims, Rng& rng);
  static RgcnEncoder zeros(std::size_t relation_count, std::vector<std::size_t> dims);

  /// `features` has one row per node. Returns one output row per node.
  Tensor forward(const Tensor& features, const RelationalGraph& graph, Cache* cache = nullptr) const;
  Gradients backward(const Cache& cache, const RelationalGraph& graph, const Tensor& upstream) const;

  std::size_t relation_count() const { return relations_; }
  std::size_t self_relation() const { return relations_ - 1; }
  const std::vector<std::size_t>& dims() const { return dims_; }
  /// weights()[layer][relation], out x in.
  std::vector<std::vector<Tensor>>& weights() { return weights_; }
  const std::vector<std::vector<Tensor>>& weights() const { return weights_; }

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::size_t parameter_count() const;

 private:
  std::size_t relations_ = 0;
  std::vector<std::size_t> dims_;
  std::vector<std::vector<Tensor>> weights_;
};

void copy_parameters(const RgcnEncoder& source, RgcnEncoder& destination);

nlohmann::json tensor_to_json(const Tensor& tensor);
Tensor tensor_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DenseNet& net);
DenseNet dense_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RgcnEncoder& encoder);
RgcnEncoder rgcn_from_json(const nlohmann::json& j);

}  // namespace featgraph::nn
