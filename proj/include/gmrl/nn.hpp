#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gmrl/errors.hpp"
#include "gmrl/random.hpp"
#include "gmrl/tensor.hpp"

namespace gmrl {

enum class Activation { relu, sigmoid, tanh, linear, softmax };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::linear: return "linear";
    case Activation::softmax: return "softmax";
  }
  return "?";
}

inline Activation activation_from_string(std::string_view name) {
  for (auto a : {Activation::relu, Activation::sigmoid, Activation::tanh, Activation::linear,
                 Activation::softmax}) {
    if (to_string(a) == name) return a;
  }
  throw LookupError("unknown activation '" + std::string(name) + "'");
}

struct LayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::linear;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Fully connected layer. Weights are stored in_dim x out_dim so that a
/// batch (one sample per row) maps as `batch * weights + bias`.
struct DenseLayer {
  std::string name;
  LayerSpec spec;
  Matrix weights;
  Matrix bias;  // 1 x out_dim
};

struct LayerGradient {
  Matrix weights;
  Matrix bias;
};

/// Per-layer gradients, indexed like Network::layers().
struct GradientSet {
  std::vector<LayerGradient> layers;

  void zero() {
    for (auto& g : layers) {
      g.weights.fill(0.0);
      g.bias.fill(0.0);
    }
  }
};

enum class ParamKind { weight, bias, free };

/// Non-owning view of one trainable tensor and its gradient accumulator.
struct ParamRef {
  std::string name;
  Matrix* value = nullptr;
  Matrix* grad = nullptr;
  ParamKind kind = ParamKind::weight;
};

namespace detail {

inline void apply_activation(Activation act, Matrix& z) {
  switch (act) {
    case Activation::relu:
      for (double& v : z.values()) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::sigmoid:
      for (double& v : z.values()) v = 1.0 / (1.0 + std::exp(-v));
      break;
    case Activation::tanh:
      for (double& v : z.values()) v = std::tanh(v);
      break;
    case Activation::linear:
      break;
    case Activation::softmax:
      for (std::size_t r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        double peak = row[0];
        for (double v : row) peak = std::max(peak, v);
        double total = 0.0;
        for (double& v : row) {
          v = std::exp(v - peak);
          total += v;
        }
        for (double& v : row) v /= total;
      }
      break;
  }
}

// Converts dL/da into dL/dz in place, given pre-activation z and output a.
inline void activation_backward(Activation act, const Matrix& z, const Matrix& a, Matrix& g) {
  switch (act) {
    case Activation::relu:
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!(z[i] > 0.0)) g[i] = 0.0;
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= a[i] * (1.0 - a[i]);
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - a[i] * a[i];
      break;
    case Activation::linear:
      break;
    case Activation::softmax:
      for (std::size_t r = 0; r < g.rows(); ++r) {
        auto gr = g.row(r);
        auto ar = a.row(r);
        double dot = 0.0;
        for (std::size_t j = 0; j < gr.size(); ++j) dot += gr[j] * ar[j];
        for (std::size_t j = 0; j < gr.size(); ++j) gr[j] = ar[j] * (gr[j] - dot);
      }
      break;
  }
}

inline Matrix affine(const Matrix& x, const DenseLayer& layer) {
  Matrix z = matmul(x, layer.weights);
  const auto b = layer.bias.values();
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
  }
  return z;
}

}  // namespace detail

/// Multi-headed feed-forward network: a shared trunk followed by named heads
/// (e.g. "actor" and "critic"). The trunk may be empty, in which case every
/// head reads the input directly.
class Network {
 public:
  using HeadSpec = std::pair<std::string, std::vector<LayerSpec>>;

  Network() = default;

  Network(std::vector<LayerSpec> trunk, std::vector<HeadSpec> heads) {
    if (heads.empty()) throw DimensionError("Network: at least one head is required");
    validate_chain(trunk, "trunk", /*allow_softmax_last=*/false);
    trunk_size_ = trunk.size();
    for (std::size_t i = 0; i < trunk.size(); ++i) add_layer("trunk." + std::to_string(i), trunk[i]);

    std::size_t head_input = trunk.empty() ? heads.front().second.front().in_dim
                                           : trunk.back().out_dim;
    if (!trunk.empty()) input_dim_ = trunk.front().in_dim;
    for (auto& [name, specs] : heads) {
      if (specs.empty()) throw DimensionError("Network: head '" + name + "' has no layers");
      if (heads_.contains(name)) throw DimensionError("Network: duplicate head '" + name + "'");
      validate_chain(specs, name, /*allow_softmax_last=*/true);
      if (specs.front().in_dim != head_input) {
        throw DimensionError("Network: head '" + name + "' expects " +
                             std::to_string(specs.front().in_dim) + " inputs, trunk yields " +
                             std::to_string(head_input));
      }
      HeadRange range{layers_.size(), layers_.size() + specs.size()};
      for (std::size_t i = 0; i < specs.size(); ++i) add_layer(name + "." + std::to_string(i), specs[i]);
      heads_.emplace(name, range);
      head_order_.push_back(name);
    }
    if (trunk.empty()) input_dim_ = head_input;
  }

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t output_dim(std::string_view head) const {
    return layers_[range(head).end - 1].spec.out_dim;
  }
  const std::vector<std::string>& head_names() const noexcept { return head_order_; }
  bool has_head(std::string_view head) const { return heads_.find(std::string(head)) != heads_.end(); }

  // Mutable access may change weights, so the trunk cache can no longer be reused.
  std::vector<DenseLayer>& layers() noexcept {
    invalidate_cache();
    return layers_;
  }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::size_t trunk_size() const noexcept { return trunk_size_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
  }

  /// Forward pass through the trunk and one head. Caches everything needed by
  /// backward(). If the trunk already holds activations for a bit-identical
  /// batch they are reused, so several heads can share one trunk pass.
  Matrix forward(const Matrix& batch, std::string_view head) {
    const HeadRange r = range(head);
    check_input(batch);
    if (!trunk_cache_.valid || !(trunk_cache_.input == batch)) {
      trunk_cache_.input = batch;
      trunk_cache_.pre.clear();
      trunk_cache_.post.clear();
      const Matrix* x = &trunk_cache_.input;
      for (std::size_t i = 0; i < trunk_size_; ++i) {
        trunk_cache_.pre.push_back(detail::affine(*x, layers_[i]));
        trunk_cache_.post.push_back(trunk_cache_.pre.back());
        detail::apply_activation(layers_[i].spec.activation, trunk_cache_.post.back());
        x = &trunk_cache_.post.back();
      }
      trunk_cache_.valid = true;
      ++generation_;
    }
    auto& cache = head_caches_[std::string(head)];
    cache.generation = generation_;
    cache.pre.clear();
    cache.post.clear();
    const Matrix* x = trunk_output();
    for (std::size_t i = r.begin; i < r.end; ++i) {
      cache.pre.push_back(detail::affine(*x, layers_[i]));
      cache.post.push_back(cache.pre.back());
      detail::apply_activation(layers_[i].spec.activation, cache.post.back());
      x = &cache.post.back();
    }
    return cache.post.back();
  }

  /// Stateless forward pass; leaves caches untouched.
  Matrix predict(const Matrix& batch, std::string_view head) const {
    const HeadRange r = range(head);
    check_input(batch);
    Matrix x = batch;
    auto run = [&](std::size_t i) {
      Matrix z = detail::affine(x, layers_[i]);
      detail::apply_activation(layers_[i].spec.activation, z);
      x = std::move(z);
    };
    for (std::size_t i = 0; i < trunk_size_; ++i) run(i);
    for (std::size_t i = r.begin; i < r.end; ++i) run(i);
    return x;
  }

  /// Backpropagates dLoss/dOutput of `head` and accumulates into gradients().
  /// Trunk gradients from several heads add up until zero_grad().
  const GradientSet& backward(const Matrix& loss_grad_at_output, std::string_view head) {
    const HeadRange r = range(head);
    auto it = head_caches_.find(std::string(head));
    if (it == head_caches_.end() || it->second.post.empty()) {
      throw StateError("backward: no cached forward pass for head '" + std::string(head) + "'");
    }
    const HeadCache& cache = it->second;
    if (cache.generation != generation_) {
      throw StateError("backward: trunk cache was overwritten since forward of head '" +
                       std::string(head) + "'");
    }
    require_same_shape(loss_grad_at_output, cache.post.back(), "backward");

    Matrix g = loss_grad_at_output;
    for (std::size_t i = r.end; i-- > r.begin;) {
      const std::size_t local = i - r.begin;
      const Matrix& input = local == 0 ? *trunk_output() : cache.post[local - 1];
      g = layer_backward(i, input, cache.pre[local], cache.post[local], std::move(g),
                         /*need_input_grad=*/trunk_size_ > 0 || local > 0);
    }
    for (std::size_t i = trunk_size_; i-- > 0;) {
      const Matrix& input = i == 0 ? trunk_cache_.input : trunk_cache_.post[i - 1];
      g = layer_backward(i, input, trunk_cache_.pre[i], trunk_cache_.post[i], std::move(g),
                         /*need_input_grad=*/i > 0);
    }
    return grads_;
  }

  void zero_grad() { grads_.zero(); }
  const GradientSet& gradients() const noexcept { return grads_; }
  GradientSet& gradients() noexcept { return grads_; }

  /// Weights and biases of every layer paired with their accumulators.
  std::vector<ParamRef> parameters() {
    invalidate_cache();
    std::vector<ParamRef> refs;
    refs.reserve(layers_.size() * 2);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      refs.push_back({layers_[i].name + ".weights", &layers_[i].weights, &grads_.layers[i].weights,
                      ParamKind::weight});
      refs.push_back({layers_[i].name + ".bias", &layers_[i].bias, &grads_.layers[i].bias,
                      ParamKind::bias});
    }
    return refs;
  }

  void invalidate_cache() {
    trunk_cache_.valid = false;
    head_caches_.clear();
  }

 private:
  struct HeadRange {
    std::size_t begin = 0;
    std::size_t end = 0;
  };
  struct TrunkCache {
    bool valid = false;
    Matrix input;
    std::vector<Matrix> pre;
    std::vector<Matrix> post;
  };
  struct HeadCache {
    std::uint64_t generation = 0;
    std::vector<Matrix> pre;
    std::vector<Matrix> post;
  };

  static void validate_chain(const std::vector<LayerSpec>& specs, const std::string& where,
                             bool allow_softmax_last) {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto& s = specs[i];
      if (s.in_dim == 0 || s.out_dim == 0) {
        throw DimensionError("Network: " + where + " layer " + std::to_string(i) + " has a zero dimension");
      }
      if (i > 0 && specs[i - 1].out_dim != s.in_dim) {
        throw DimensionError("Network: " + where + " layer " + std::to_string(i) + " expects " +
                             std::to_string(s.in_dim) + " inputs, previous layer yields " +
                             std::to_string(specs[i - 1].out_dim));
      }
      const bool last = i + 1 == specs.size();
      if (s.activation == Activation::softmax && !(last && allow_softmax_last)) {
        throw DimensionError("Network: softmax is only allowed as the final layer of a head (" + where + ")");
      }
    }
  }

  void add_layer(std::string name, const LayerSpec& spec) {
    DenseLayer layer{std::move(name), spec, Matrix(spec.in_dim, spec.out_dim), Matrix(1, spec.out_dim)};
    layers_.push_back(std::move(layer));
    grads_.layers.push_back({Matrix(spec.in_dim, spec.out_dim), Matrix(1, spec.out_dim)});
  }

  HeadRange range(std::string_view head) const {
    auto it = heads_.find(std::string(head));
    if (it == heads_.end()) throw LookupError("Network: unknown head '" + std::string(head) + "'");
    return it->second;
  }

  void check_input(const Matrix& batch) const {
    if (batch.cols() != input_dim_) {
      throw DimensionError("Network: batch has " + std::to_string(batch.cols()) +
                           " columns, network expects " + std::to_string(input_dim_));
    }
  }

  const Matrix* trunk_output() const {
    return trunk_size_ == 0 ? &trunk_cache_.input : &trunk_cache_.post.back();
  }

  Matrix layer_backward(std::size_t index, const Matrix& input, const Matrix& pre, const Matrix& post,
                        Matrix g, bool need_input_grad) {
    const DenseLayer& layer = layers_[index];
    detail::activation_backward(layer.spec.activation, pre, post, g);
    LayerGradient& lg = grads_.layers[index];
    add_in_place(lg.weights, matmul_tn(input, g));
    auto db = lg.bias.values();
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto row = g.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) db[j] += row[j];
    }
    if (!need_input_grad) return {};
    return matmul_nt(g, layer.weights);
  }

  std::vector<DenseLayer> layers_;
  GradientSet grads_;
  std::map<std::string, HeadRange, std::less<>> heads_;
  std::vector<std::string> head_order_;
  std::size_t trunk_size_ = 0;
  std::size_t input_dim_ = 0;

  TrunkCache trunk_cache_;
  std::map<std::string, HeadCache, std::less<>> head_caches_;
  std::uint64_t generation_ = 0;
};

/// Glorot-uniform weights, zero biases. Deterministic in `seed`.
inline void init_parameters(Network& net, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, "init");
  for (auto& layer : net.layers()) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(layer.spec.in_dim + layer.spec.out_dim));
    for (double& w : layer.weights.values()) w = rng.uniform(-bound, bound);
    layer.bias.fill(0.0);
  }
  net.invalidate_cache();
}

/// Central-difference estimate of dLoss/dParam for every entry of `params`.
/// The loss callback must evaluate the loss from the current parameter values.
inline std::vector<Matrix> fd_gradient(std::span<const ParamRef> params,
                                       const std::function<double()>& loss, double h) {
  if (!(h > 0.0)) throw DomainError("fd_gradient: step must be positive");
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (const auto& p : params) {
    Matrix g(p.value->rows(), p.value->cols());
    for (std::size_t i = 0; i < p.value->size(); ++i) {
      const double saved = (*p.value)[i];
      (*p.value)[i] = saved + h;
      const double up = loss();
      (*p.value)[i] = saved - h;
      const double down = loss();
      (*p.value)[i] = saved;
      g[i] = (up - down) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

/// Finite-difference oracle over all network parameters, shaped like backward().
inline GradientSet fd_gradient_oracle(Network& net, const std::function<double(Network&)>& loss_fn,
                                      double h) {
  auto params = net.parameters();
  auto grads = fd_gradient(params, [&] {
    net.invalidate_cache();
    return loss_fn(net);
  }, h);
  net.invalidate_cache();
  GradientSet out;
  for (std::size_t i = 0; i < grads.size(); i += 2) {
    out.layers.push_back({std::move(grads[i]), std::move(grads[i + 1])});
  }
  return out;
}

/// FNV-1a over the raw bytes of every parameter; used to prove read-only passes.
inline std::uint64_t parameter_fingerprint(const Network& net) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto mix = [&](const Matrix& m) {
    for (double v : m.values()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xFF;
        h *= 0x100000001B3ULL;
      }
    }
  };
  for (const auto& l : net.layers()) {
    mix(l.weights);
    mix(l.bias);
  }
  return h;
}

}  // namespace gmrl
