#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dense.hpp"
#include "error.hpp"
#include "graph.hpp"
#include "propagation.hpp"
#include "rng.hpp"

namespace flowgn {

enum class Activation : std::uint8_t { relu, identity };

inline std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity" || s == "linear") return Activation::identity;
  throw ArgumentError("unknown activation '" + std::string(s) + "'");
}

/// One propagation layer. `weight` is (2·d_in) × d_out: the first d_in rows
/// act on the node's own state, the last d_in rows on the propagated state.
struct Layer {
  Matrix weight;
  RowVector bias;

  Eigen::Index in_dim() const { return weight.rows() / 2; }
  auto self_block() const { return weight.topRows(in_dim()); }
  auto prop_block() const { return weight.bottomRows(in_dim()); }
};

struct ModelParams {
  std::vector<Layer> layers;
  Matrix out_weight;   ///< d_K × C
  RowVector out_bias;  ///< 1 × C

  std::size_t depth() const noexcept { return layers.size(); }
  Eigen::Index input_dim() const { return layers.empty() ? out_weight.rows() : layers.front().in_dim(); }
  Eigen::Index num_classes() const { return out_weight.cols(); }

  /// Visits every tensor in a fixed order: W^1, b^1, ..., W^K, b^K, W_out, b_out.
  /// `is_weight` is false for biases.
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    for (auto& l : layers) {
      fn(l.weight, true);
      fn(l.bias, false);
    }
    fn(out_weight, true);
    fn(out_bias, false);
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    for (const auto& l : layers) {
      fn(l.weight, true);
      fn(l.bias, false);
    }
    fn(out_weight, true);
    fn(out_bias, false);
  }

  /// Same shapes, all zeros.
  ModelParams zeros_like() const {
    ModelParams z = *this;
    z.for_each_tensor([](auto& t, bool) { t.setZero(); });
    return z;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_tensor([&](const auto& t, bool) { n += static_cast<std::size_t>(t.size()); });
    return n;
  }

  double weight_sq_norm() const {
    double s = 0.0;
    for_each_tensor([&](const auto& t, bool is_weight) {
      if (is_weight) s += t.squaredNorm();
    });
    return s;
  }

  bool all_finite() const {
    bool ok = true;
    for_each_tensor([&](const auto& t, bool) { ok = ok && t.allFinite(); });
    return ok;
  }
};

/// Glorot-uniform weights, zero biases. d_0 = input_dim, d_k = hidden.
inline ModelParams init_params(std::size_t input_dim, std::size_t hidden, std::size_t num_classes, std::size_t depth,
                               std::uint64_t seed) {
  if (depth < 1) throw ArgumentError("model needs at least one layer");
  if (input_dim == 0 || hidden == 0 || num_classes == 0) throw ArgumentError("model dimensions must be positive");
  CounterRng rng(derive_seed(seed, 0x494e4954ULL));
  auto glorot = [&](Eigen::Index rows, Eigen::Index cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * rng.uniform() - 1.0) * limit;
    return m;
  };
  ModelParams p;
  auto in = static_cast<Eigen::Index>(input_dim);
  const auto h = static_cast<Eigen::Index>(hidden);
  for (std::size_t k = 0; k < depth; ++k) {
    p.layers.push_back({glorot(2 * in, h), RowVector::Zero(h)});
    in = h;
  }
  p.out_weight = glorot(h, static_cast<Eigen::Index>(num_classes));
  p.out_bias = RowVector::Zero(static_cast<Eigen::Index>(num_classes));
  return p;
}

/// Everything backward needs from a forward pass.
struct ForwardState {
  Features input;                    ///< h^0, not owned
  std::vector<Matrix> hidden;        ///< h^1 .. h^K
  std::vector<Matrix> preact;        ///< z^1 .. z^K
  Matrix logits;
  Activation activation = Activation::relu;

  const Matrix& top() const { return hidden.back(); }
  std::size_t depth() const noexcept { return hidden.size(); }

  /// h^k · w
  template <typename Derived>
  Matrix times(std::size_t k, const Eigen::MatrixBase<Derived>& w) const {
    return k == 0 ? input.times(w) : Matrix(hidden[k - 1] * w);
  }
  /// (h^k)ᵀ · g
  Matrix transpose_times(std::size_t k, const Matrix& g) const {
    return k == 0 ? input.transpose_times(g) : Matrix(hidden[k - 1].transpose() * g);
  }
};

inline void check_shapes(Features features, std::span<const PropagationMatrix> props, const ModelParams& params) {
  if (props.size() != params.depth())
    throw ShapeError("expected " + std::to_string(params.depth()) + " propagation matrices, got " +
                     std::to_string(props.size()));
  if (features.cols() != params.input_dim())
    throw ShapeError("feature dimension " + std::to_string(features.cols()) + " does not match model input " +
                     std::to_string(params.input_dim()));
  for (const auto& p : props)
    if (p.num_nodes() != static_cast<std::size_t>(features.rows()))
      throw ShapeError("propagation matrix size " + std::to_string(p.num_nodes()) + " vs " +
                       std::to_string(features.rows()) + " feature rows");
}

/// h^k = σ(h^{k-1}·W_self + P_k·(h^{k-1}·W_prop) + b^k), logits = h^K·W_out + b_out.
/// Equal to σ(concat(h^{k-1}, P_k·h^{k-1})·W^k + b^k) by associativity.
inline ForwardState forward(Features features, std::span<const PropagationMatrix> props,
                            const ModelParams& params, Activation activation = Activation::relu) {
  check_shapes(features, props, params);
  ForwardState st;
  st.input = features;
  st.activation = activation;
  for (std::size_t k = 0; k < params.depth(); ++k) {
    const auto& layer = params.layers[k];
    Matrix z = st.times(k, layer.self_block());
    z.noalias() += props[k].apply(st.times(k, layer.prop_block()));
    z.rowwise() += layer.bias;
    Matrix out = activation == Activation::relu ? Matrix(z.cwiseMax(0.0)) : z;
    if (!out.allFinite()) throw NumericsError("non-finite activation in layer " + std::to_string(k + 1));
    st.preact.push_back(std::move(z));
    st.hidden.push_back(std::move(out));
  }
  st.logits = st.top() * params.out_weight;
  st.logits.rowwise() += params.out_bias;
  if (!st.logits.allFinite()) throw NumericsError("non-finite logits");
  return st;
}

/// Mean softmax cross-entropy over `mask` plus (weight_decay/2)·Σ‖W‖²
/// over weight matrices (biases excluded).
inline double loss(const Matrix& logits, std::span<const int> labels, std::span<const NodeId> mask,
                   const ModelParams& params, double weight_decay) {
  if (mask.empty()) throw ArgumentError("loss needs at least one labeled node");
  double ce = 0.0;
  for (NodeId v : mask) {
    const auto row = logits.row(v);
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    const int y = labels[v];
    if (y < 0 || y >= logits.cols()) throw ArgumentError("masked node " + std::to_string(v) + " has no valid label");
    ce += lse - row(y);
  }
  return ce / static_cast<double>(mask.size()) + 0.5 * weight_decay * params.weight_sq_norm();
}

namespace detail {

/// Reverse pass through the propagation layers given ∂L/∂h^K. Accumulates
/// layer gradients into `grads` when non-null; returns ∂L/∂h^0 when
/// `want_input` is set (otherwise an empty matrix).
inline Matrix backprop_layers(const ForwardState& st, std::span<const PropagationMatrix> props,
                              const ModelParams& params, Matrix d_hidden, ModelParams* grads, bool want_input) {
  for (std::size_t k = params.depth(); k-- > 0;) {
    const auto& layer = params.layers[k];
    Matrix dz = std::move(d_hidden);
    if (st.activation == Activation::relu) dz = (st.preact[k].array() > 0.0).select(dz, 0.0);
    const Matrix dq = props[k].apply_transpose(dz);  // ∂L/∂(h·W_prop)
    if (grads) {
      auto& g = grads->layers[k];
      const auto in = layer.in_dim();
      g.weight.topRows(in) += st.transpose_times(k, dz);
      g.weight.bottomRows(in) += st.transpose_times(k, dq);
      g.bias += dz.colwise().sum();
    }
    if (k > 0 || want_input) {
      d_hidden = dz * layer.self_block().transpose();
      d_hidden.noalias() += dq * layer.prop_block().transpose();
    } else {
      d_hidden = Matrix();
    }
  }
  return d_hidden;
}

} // namespace detail

/// Exact gradient of `loss` w.r.t. every parameter. Propagation matrices are
/// treated as constants.
inline ModelParams backward(const ForwardState& st, std::span<const PropagationMatrix> props,
                            const ModelParams& params, std::span<const int> labels, std::span<const NodeId> mask,
                            double weight_decay) {
  if (mask.empty()) throw ArgumentError("backward needs at least one labeled node");
  ModelParams grads = params.zeros_like();
  Matrix d_logits = Matrix::Zero(st.logits.rows(), st.logits.cols());
  const double scale = 1.0 / static_cast<double>(mask.size());
  for (NodeId v : mask) {
    const auto row = st.logits.row(v);
    const double mx = row.maxCoeff();
    RowVector e = (row.array() - mx).exp();
    e /= e.sum();
    e(labels[v]) -= 1.0;
    d_logits.row(v) += scale * e;
  }
  grads.out_weight.noalias() = st.top().transpose() * d_logits;
  grads.out_bias = d_logits.colwise().sum();
  Matrix d_top = d_logits * params.out_weight.transpose();
  detail::backprop_layers(st, props, params, std::move(d_top), &grads, false);

  if (weight_decay != 0.0) {
    for (std::size_t k = 0; k < params.depth(); ++k) grads.layers[k].weight += weight_decay * params.layers[k].weight;
    grads.out_weight += weight_decay * params.out_weight;
  }
  return grads;
}

/// Adam with bias correction.
class Adam {
public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ModelParams& params, const ModelParams& grads) {
    if (m_.layers.empty() && m_.out_weight.size() == 0) {
      m_ = params.zeros_like();
      v_ = params.zeros_like();
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
      m = beta1_ * m + (1.0 - beta1_) * g;
      v = beta2_ * v + (1.0 - beta2_) * g.cwiseAbs2();
      p.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    };
    for (std::size_t k = 0; k < params.depth(); ++k) {
      update(params.layers[k].weight, grads.layers[k].weight, m_.layers[k].weight, v_.layers[k].weight);
      update(params.layers[k].bias, grads.layers[k].bias, m_.layers[k].bias, v_.layers[k].bias);
    }
    update(params.out_weight, grads.out_weight, m_.out_weight, v_.out_weight);
    update(params.out_bias, grads.out_bias, m_.out_bias, v_.out_bias);
  }

  std::uint64_t steps() const noexcept { return t_; }

private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  ModelParams m_, v_;
};

/// Argmax per row; ties resolve to the lowest class id.
inline std::vector<int> predict(const Matrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

inline double accuracy(const Matrix& logits, std::span<const int> labels, std::span<const NodeId> nodes) {
  if (nodes.empty()) return 0.0;
  const auto pred = predict(logits);
  std::size_t hit = 0;
  for (NodeId v : nodes) hit += pred[v] == labels[v];
  return static_cast<double>(hit) / static_cast<double>(nodes.size());
}

} // namespace flowgn
