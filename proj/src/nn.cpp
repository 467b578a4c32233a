#include "featgraph/nn.hpp"

#include <cmath>

#include "featgraph/error.hpp"

namespace featgraph::nn {

namespace {

Tensor uniform_tensor(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  Tensor t(rows, cols);
  // Column-major fill order is part of the reproducibility contract.
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) t(r, c) = uniform_real(rng, -bound, bound);
  return t;
}

void check_dims(const std::vector<std::size_t>& dims) {
  if (dims.size() < 2) throw Error(ErrorCode::DimMismatch, "a network needs at least input and output dims");
  for (std::size_t d : dims) {
    if (d == 0) throw Error(ErrorCode::DimMismatch, "zero-width layer");
  }
}

}  // namespace

void sgd_step(const Optimizer& optimizer, std::span<Tensor* const> parameters, std::span<const Tensor> gradients) {
  if (parameters.size() != gradients.size())
    throw Error(ErrorCode::ShapeMismatch, "parameter and gradient counts differ");
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    if (parameters[i]->rows() != gradients[i].rows() || parameters[i]->cols() != gradients[i].cols())
      throw Error(ErrorCode::ShapeMismatch, "gradient " + std::to_string(i) + " shape differs from its parameter");
  }
  for (std::size_t i = 0; i < parameters.size(); ++i) *parameters[i] -= optimizer.learning_rate * gradients[i];
}

DenseNet::DenseNet(std::vector<std::size_t> dims, Rng& rng) : dims_(std::move(dims)) {
  check_dims(dims_);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims_[l]));
    const auto out = static_cast<Eigen::Index>(dims_[l + 1]);
    const auto in = static_cast<Eigen::Index>(dims_[l]);
    DenseLayer layer;
    layer.weight = uniform_tensor(out, in, bound, rng);
    layer.bias = uniform_tensor(out, 1, bound, rng);
    layers_.push_back(std::move(layer));
  }
}

DenseNet DenseNet::zeros(std::vector<std::size_t> dims) {
  check_dims(dims);
  DenseNet net;
  net.dims_ = std::move(dims);
  for (std::size_t l = 0; l + 1 < net.dims_.size(); ++l) {
    const auto out = static_cast<Eigen::Index>(net.dims_[l + 1]);
    const auto in = static_cast<Eigen::Index>(net.dims_[l]);
    net.layers_.push_back({Tensor::Zero(out, in), Tensor::Zero(out, 1)});
  }
  return net;
}

Eigen::VectorXd DenseNet::forward(const Eigen::VectorXd& input, Cache* cache) const {
  if (static_cast<std::size_t>(input.size()) != input_dim())
    throw Error(ErrorCode::DimMismatch, "input has " + std::to_string(input.size()) + " values, network expects " +
                                            std::to_string(input_dim()));
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Eigen::VectorXd x = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::VectorXd pre = layers_[l].weight * x + layers_[l].bias.col(0);
    if (cache != nullptr) {
      cache->inputs.push_back(x);
      cache->pre.push_back(pre);
    }
    x = l + 1 < layers_.size() ? Eigen::VectorXd(pre.cwiseMax(0.0)) : pre;
  }
  return x;
}

DenseNet::Gradients DenseNet::backward(const Cache& cache, const Eigen::VectorXd& upstream) const {
  if (cache.inputs.size() != layers_.size()) throw Error(ErrorCode::DimMismatch, "cache does not match network");
  if (static_cast<std::size_t>(upstream.size()) != output_dim())
    throw Error(ErrorCode::DimMismatch, "upstream gradient has wrong size");
  Gradients grads;
  grads.parameters.resize(2 * layers_.size());
  Eigen::VectorXd delta = upstream;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    if (l + 1 < layers_.size()) {
      // ReLU subgradient at 0 is 0.
      for (Eigen::Index i = 0; i < delta.size(); ++i) {
        if (cache.pre[l](i) <= 0.0) delta(i) = 0.0;
      }
    }
    grads.parameters[2 * l] = delta * cache.inputs[l].transpose();
    grads.parameters[2 * l + 1] = delta;
    delta = layers_[l].weight.transpose() * delta;
  }
  grads.input = delta;
  return grads;
}

std::vector<Tensor*> DenseNet::parameters() {
  std::vector<Tensor*> out;
  for (auto& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

std::vector<const Tensor*> DenseNet::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

std::size_t DenseNet::parameter_count() const {
  std::size_t count = 0;
  for (const auto* p : parameters()) count += static_cast<std::size_t>(p->size());
  return count;
}

void copy_parameters(const DenseNet& source, DenseNet& destination) {
  if (source.dims() != destination.dims()) throw Error(ErrorCode::ArchitectureMismatch, "dense networks differ in shape");
  destination.layers() = source.layers();
}

RgcnEncoder::RgcnEncoder(std::size_t relation_count, std::vector<std::size_t> dims, Rng& rng)
    : relations_(relation_count), dims_(std::move(dims)) {
  check_dims(dims_);
  if (relations_ == 0) throw Error(ErrorCode::UnknownRelation, "encoder needs at least the self-loop relation");
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims_[l]));
    std::vector<Tensor> layer;
    for (std::size_t r = 0; r < relations_; ++r) {
      layer.push_back(uniform_tensor(static_cast<Eigen::Index>(dims_[l + 1]), static_cast<Eigen::Index>(dims_[l]), bound, rng));
    }
    weights_.push_back(std::move(layer));
  }
}

RgcnEncoder RgcnEncoder::zeros(std::size_t relation_count, std::vector<std::size_t> dims) {
  check_dims(dims);
  RgcnEncoder enc;
  enc.relations_ = relation_count;
  enc.dims_ = std::move(dims);
  for (std::size_t l = 0; l + 1 < enc.dims_.size(); ++l) {
    enc.weights_.emplace_back(relation_count, Tensor::Zero(static_cast<Eigen::Index>(enc.dims_[l + 1]),
                                                           static_cast<Eigen::Index>(enc.dims_[l])));
  }
  return enc;
}

Tensor RgcnEncoder::forward(const Tensor& features, const RelationalGraph& graph, Cache* cache) const {
  const auto n = static_cast<Eigen::Index>(graph.node_count());
  if (features.rows() != n || static_cast<std::size_t>(features.cols()) != dims_.front())
    throw Error(ErrorCode::DimMismatch, "node feature matrix does not match graph or encoder input");
  for (const auto& list : graph.neighbors) {
    for (const auto& nb : list) {
      if (nb.relation >= relations_) throw Error(ErrorCode::UnknownRelation, "relation " + std::to_string(nb.relation));
      if (nb.node >= graph.node_count()) throw Error(ErrorCode::UnknownNode, "neighbour " + std::to_string(nb.node));
    }
  }
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->aggregates.clear();
    cache->pre.clear();
  }

  Tensor h = features;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(dims_[l]);
    std::vector<Tensor> aggregates(relations_, Tensor::Zero(n, in));
    std::vector<std::vector<double>> counts(graph.node_count(), std::vector<double>(relations_, 0.0));
    for (std::size_t i = 0; i < graph.node_count(); ++i) {
      for (const auto& nb : graph.neighbors[i]) {
        aggregates[nb.relation].row(static_cast<Eigen::Index>(i)) += h.row(static_cast<Eigen::Index>(nb.node));
        counts[i][nb.relation] += 1.0;
      }
    }
    for (std::size_t i = 0; i < graph.node_count(); ++i) {
      for (std::size_t r = 0; r < relations_; ++r) {
        if (counts[i][r] > 0.0) aggregates[r].row(static_cast<Eigen::Index>(i)) /= counts[i][r];
      }
    }
    Tensor pre = h * weights_[l][self_relation()].transpose();
    for (std::size_t r = 0; r < relations_; ++r) pre += aggregates[r] * weights_[l][r].transpose();
    if (cache != nullptr) {
      cache->inputs.push_back(h);
      cache->aggregates.push_back(aggregates);
      cache->pre.push_back(pre);
    }
    h = pre.cwiseMax(0.0);
  }
  return h;
}

RgcnEncoder::Gradients RgcnEncoder::backward(const Cache& cache, const RelationalGraph& graph, const Tensor& upstream) const {
  if (cache.inputs.size() != weights_.size()) throw Error(ErrorCode::DimMismatch, "cache does not match encoder");
  const auto n = static_cast<Eigen::Index>(graph.node_count());
  if (upstream.rows() != n || static_cast<std::size_t>(upstream.cols()) != dims_.back())
    throw Error(ErrorCode::DimMismatch, "upstream gradient has wrong shape");

  Gradients grads;
  grads.parameters.resize(weights_.size() * relations_);
  Tensor delta = upstream;
  for (std::size_t l = weights_.size(); l-- > 0;) {
    delta = delta.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
    Tensor d_input = delta * weights_[l][self_relation()];
    for (std::size_t r = 0; r < relations_; ++r) {
      grads.parameters[l * relations_ + r] = delta.transpose() * cache.aggregates[l][r];
    }
    grads.parameters[l * relations_ + self_relation()] += delta.transpose() * cache.inputs[l];

    // Scatter each relation's mean-message gradient back to the neighbours.
    std::vector<std::vector<double>> counts(graph.node_count(), std::vector<double>(relations_, 0.0));
    for (std::size_t i = 0; i < graph.node_count(); ++i)
      for (const auto& nb : graph.neighbors[i]) counts[i][nb.relation] += 1.0;
    std::vector<Tensor> d_aggregate(relations_);
    for (std::size_t r = 0; r < relations_; ++r) d_aggregate[r] = delta * weights_[l][r];
    for (std::size_t i = 0; i < graph.node_count(); ++i) {
      for (const auto& nb : graph.neighbors[i]) {
        d_input.row(static_cast<Eigen::Index>(nb.node)) +=
            d_aggregate[nb.relation].row(static_cast<Eigen::Index>(i)) / counts[i][nb.relation];
      }
    }
    delta = d_input;
  }
  grads.input = delta;
  return grads;
}

std::vector<Tensor*> RgcnEncoder::parameters() {
  std::vector<Tensor*> out;
  for (auto& layer : weights_)
    for (auto& w : layer) out.push_back(&w);
  return out;
}

std::vector<const Tensor*> RgcnEncoder::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& layer : weights_)
    for (const auto& w : layer) out.push_back(&w);
  return out;
}

std::size_t RgcnEncoder::parameter_count() const {
  std::size_t count = 0;
  for (const auto* p : parameters()) count += static_cast<std::size_t>(p->size());
  return count;
}

void copy_parameters(const RgcnEncoder& source, RgcnEncoder& destination) {
  if (source.dims() != destination.dims() || source.relation_count() != destination.relation_count())
    throw Error(ErrorCode::ArchitectureMismatch, "encoders differ in shape");
  destination.weights() = source.weights();
}

nlohmann::json tensor_to_json(const Tensor& tensor) {
  std::vector<double> data(tensor.data(), tensor.data() + tensor.size());
  return {{"rows", tensor.rows()}, {"cols", tensor.cols()}, {"data", data}};
}

Tensor tensor_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw Error(ErrorCode::ShapeMismatch, "tensor payload size");
  return Eigen::Map<const Tensor>(data.data(), rows, cols);
}

nlohmann::json to_json(const DenseNet& net) {
  nlohmann::json j = {{"kind", "dense"}, {"version", 1}, {"dims", net.dims()}, {"layers", nlohmann::json::array()}};
  for (const auto& layer : net.layers()) {
    j["layers"].push_back({{"weight", tensor_to_json(layer.weight)}, {"bias", tensor_to_json(layer.bias)}});
  }
  return j;
}

DenseNet dense_from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "dense") throw Error(ErrorCode::ArchitectureMismatch, "not a dense network checkpoint");
  auto net = DenseNet::zeros(j.at("dims").get<std::vector<std::size_t>>());
  const auto& layers = j.at("layers");
  if (layers.size() != net.layers().size()) throw Error(ErrorCode::ArchitectureMismatch, "layer count");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Tensor w = tensor_from_json(layers[l].at("weight"));
    Tensor b = tensor_from_json(layers[l].at("bias"));
    if (w.rows() != net.layers()[l].weight.rows() || w.cols() != net.layers()[l].weight.cols() ||
        b.rows() != net.layers()[l].bias.rows() || b.cols() != 1)
      throw Error(ErrorCode::ArchitectureMismatch, "layer " + std::to_string(l) + " shape");
    net.layers()[l] = {std::move(w), std::move(b)};
  }
  return net;
}

nlohmann::json to_json(const RgcnEncoder& encoder) {
  nlohmann::json j = {{"kind", "rgcn"},
                      {"version", 1},
                      {"relations", encoder.relation_count()},
                      {"dims", encoder.dims()},
                      {"layers", nlohmann::json::array()}};
  for (const auto& layer : encoder.weights()) {
    nlohmann::json weights = nlohmann::json::array();
    for (const auto& w : layer) weights.push_back(tensor_to_json(w));
    j["layers"].push_back(weights);
  }
  return j;
}

RgcnEncoder rgcn_from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "rgcn") throw Error(ErrorCode::ArchitectureMismatch, "not an encoder checkpoint");
  auto enc = RgcnEncoder::zeros(j.at("relations").get<std::size_t>(), j.at("dims").get<std::vector<std::size_t>>());
  const auto& layers = j.at("layers");
  if (layers.size() != enc.weights().size()) throw Error(ErrorCode::ArchitectureMismatch, "layer count");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].size() != enc.relation_count()) throw Error(ErrorCode::ArchitectureMismatch, "relation count");
    for (std::size_t r = 0; r < enc.relation_count(); ++r) {
      Tensor w = tensor_from_json(layers[l][r]);
      if (w.rows() != enc.weights()[l][r].rows() || w.cols() != enc.weights()[l][r].cols())
        throw Error(ErrorCode::ArchitectureMismatch, "weight shape");
      enc.weights()[l][r] = std::move(w);
    }
  }
  return enc;
}

}  // namespace featgraph::nn
