//
// Copyright 2026 The mia-bench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Dense feed-forward networks with explicit forward traces and analytic
// backpropagation. Each layer stores an (in + 1) x out matrix whose last row
// is the bias, so a batch X (rows = records) maps to [X 1] * W.

#ifndef MIA_NN_HPP
#define MIA_NN_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "mia/core.hpp"

namespace mia {

enum class Activation
{
  Tanh,
  Relu
};

// Softmax for classifiers. Hidden applies the hidden activation to the last
// layer too, which is what the attack encoders use.
enum class OutputKind
{
  Softmax,
  Hidden
};

struct MlpSpec
{
  std::vector<Index> layer_widths; // input, hidden..., output
  Activation hidden_activation = Activation::Tanh;
  OutputKind output = OutputKind::Softmax;

  Index input_width() const { return layer_widths.front(); }
  Index output_width() const { return layer_widths.back(); }
  // Number of weight matrices.
  Index depth() const { return static_cast<Index>(layer_widths.size()) - 1; }

  void validate() const
  {
    require(layer_widths.size() >= 2, "MlpSpec needs at least an input and an output layer");
    for (auto w : layer_widths) { require(w >= 1, "MlpSpec layer widths must be positive"); }
  }

  // Sum over layers of (in + 1) * out.
  std::int64_t param_count() const
  {
    validate();
    std::int64_t n = 0;
    for (std::size_t i = 0; i + 1 < layer_widths.size(); ++i) {
      n += static_cast<std::int64_t>(layer_widths[i] + 1) * static_cast<std::int64_t>(layer_widths[i + 1]);
    }
    return n;
  }

  bool operator==(MlpSpec const &) const = default;
};

template <typename Scalar = double> class Mlp
{
public:
  using Mat = MatrixX<Scalar>;

  Mlp() = default;

  // All-zero weights.
  explicit Mlp(MlpSpec spec)
    : spec_(std::move(spec))
  {
    spec_.validate();
    for (Index i = 0; i < spec_.depth(); ++i) {
      layers_.push_back(Mat::Zero(spec_.layer_widths[i] + 1, spec_.layer_widths[i + 1]));
    }
  }

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases included.
  static Mlp random(MlpSpec spec, Rng &rng)
  {
    Mlp m(std::move(spec));
    for (auto &W : m.layers_) {
      double const bound = 1.0 / std::sqrt(static_cast<double>(W.rows() - 1));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Index c = 0; c < W.cols(); ++c) {
        for (Index r = 0; r < W.rows(); ++r) { W(r, c) = static_cast<Scalar>(u(rng)); }
      }
    }
    return m;
  }

  MlpSpec const &spec() const { return spec_; }
  std::vector<Mat> const &layers() const { return layers_; }
  std::vector<Mat> &layers() { return layers_; }
  Mat const &layer(Index i) const { return layers_.at(static_cast<std::size_t>(i)); }
  Mat &layer(Index i) { return layers_.at(static_cast<std::size_t>(i)); }
  Index depth() const { return static_cast<Index>(layers_.size()); }

  std::int64_t param_count() const
  {
    std::int64_t n = 0;
    for (auto const &W : layers_) { n += static_cast<std::int64_t>(W.size()); }
    return n;
  }

  bool all_finite() const
  {
    return std::all_of(layers_.begin(), layers_.end(), [](Mat const &W) { return W.allFinite(); });
  }

private:
  MlpSpec spec_;
  std::vector<Mat> layers_;
};

// Per-layer dL/dW, same shapes as Mlp::layers().
template <typename Scalar = double> struct Gradients
{
  std::vector<MatrixX<Scalar>> layers;

  Scalar max_abs() const
  {
    Scalar m = 0;
    for (auto const &G : layers) { m = std::max(m, G.cwiseAbs().maxCoeff()); }
    return m;
  }

  Gradients &operator+=(Gradients const &o)
  {
    require(o.layers.size() == layers.size(), "gradient layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) { layers[i] += o.layers[i]; }
    return *this;
  }
};

template <typename Scalar = double> struct ForwardTrace
{
  std::vector<VectorX<Scalar>> activations; // h_1 .. h_{depth-1}
  VectorX<Scalar> output;                   // softmax probabilities
  std::optional<Scalar> loss;               // -ln output[label]
};

// Everything backward_batch needs from a forward pass.
template <typename Scalar = double> struct BatchCache
{
  std::vector<MatrixX<Scalar>> inputs; // input to layer i; inputs[0] is the batch
  MatrixX<Scalar> pre;                 // last-layer pre-activation (logits)
  MatrixX<Scalar> output;
};

inline VectorX<double> one_hot(int label, int num_classes)
{
  require(num_classes >= 1, "one_hot: num_classes must be positive");
  require(label >= 0 && label < num_classes, "one_hot: label out of range");
  VectorX<double> v = VectorX<double>::Zero(num_classes);
  v(label) = 1.0;
  return v;
}

namespace detail {

template <typename Derived> void apply_activation(Eigen::MatrixBase<Derived> &Z, Activation a)
{
  if (a == Activation::Tanh) {
    Z = Z.array().tanh().matrix();
  } else {
    Z = Z.cwiseMax(typename Derived::Scalar(0));
  }
}

// Derivative expressed in terms of the activation output.
template <typename Scalar> MatrixX<Scalar> activation_grad(MatrixX<Scalar> const &A, Activation a)
{
  if (a == Activation::Tanh) { return (Scalar(1) - A.array().square()).matrix(); }
  return (A.array() > Scalar(0)).template cast<Scalar>().matrix();
}

template <typename Scalar> MatrixX<Scalar> affine(MatrixX<Scalar> const &X, MatrixX<Scalar> const &W)
{
  Index const in = W.rows() - 1;
  MatrixX<Scalar> Z = X * W.topRows(in);
  Z.rowwise() += W.row(in);
  return Z;
}

template <typename Scalar> MatrixX<Scalar> row_log_softmax(MatrixX<Scalar> const &Z)
{
  VectorX<Scalar> mx = Z.rowwise().maxCoeff();
  MatrixX<Scalar> S = Z.colwise() - mx;
  VectorX<Scalar> lse = S.array().exp().rowwise().sum().log().matrix();
  S.colwise() -= lse;
  return S;
}

} // namespace detail

// Batch forward pass. Rows of X are records.
template <typename Scalar>
MatrixX<Scalar> forward_batch(Mlp<Scalar> const &model, MatrixX<Scalar> const &X, BatchCache<Scalar> *cache = nullptr)
{
  auto const &spec = model.spec();
  if (X.cols() != spec.input_width()) {
    throw DomainError("forward: record width " + std::to_string(X.cols()) + " does not match model input " +
                      std::to_string(spec.input_width()));
  }
  if (cache) { cache->inputs.clear(); }
  MatrixX<Scalar> A = X;
  Index const depth = model.depth();
  for (Index i = 0; i < depth; ++i) {
    if (cache) { cache->inputs.push_back(A); }
    MatrixX<Scalar> Z = detail::affine(A, model.layer(i));
    if (i + 1 < depth) {
      detail::apply_activation(Z, spec.hidden_activation);
      A = std::move(Z);
    } else {
      if (cache) { cache->pre = Z; }
      if (spec.output == OutputKind::Softmax) {
        A = detail::row_log_softmax(Z).array().exp().matrix();
      } else {
        detail::apply_activation(Z, spec.hidden_activation);
        A = std::move(Z);
      }
    }
  }
  if (!A.allFinite()) { throw NumericError("forward: non-finite output"); }
  if (cache) { cache->output = A; }
  return A;
}

// Backpropagates delta, the gradient of the loss w.r.t. the last layer's
// pre-activation, through every layer. Writes dL/dX into dinput if given.
template <typename Scalar>
Gradients<Scalar> backward_batch(Mlp<Scalar> const &model, BatchCache<Scalar> const &cache, MatrixX<Scalar> delta,
                                 MatrixX<Scalar> *dinput = nullptr)
{
  Index const depth = model.depth();
  require(static_cast<Index>(cache.inputs.size()) == depth, "backward: cache does not match model depth");
  Gradients<Scalar> g;
  g.layers.resize(static_cast<std::size_t>(depth));
  for (Index i = depth - 1; i >= 0; --i) {
    auto const &A = cache.inputs[static_cast<std::size_t>(i)];
    auto const &W = model.layer(i);
    Index const in = W.rows() - 1;
    auto &G = g.layers[static_cast<std::size_t>(i)];
    G.resize(W.rows(), W.cols());
    G.topRows(in).noalias() = A.transpose() * delta;
    G.row(in) = delta.colwise().sum();
    if (i > 0 || dinput) {
      MatrixX<Scalar> dA = delta * W.topRows(in).transpose();
      if (i > 0) {
        delta = dA.cwiseProduct(detail::activation_grad(A, model.spec().hidden_activation));
      } else {
        *dinput = std::move(dA);
      }
    }
  }
  for (auto const &G : g.layers) {
    if (!G.allFinite()) { throw NumericError("backward: non-finite gradient"); }
  }
  return g;
}

// For OutputKind::Hidden models: converts dL/d(output) into the delta
// backward_batch expects.
template <typename Scalar>
MatrixX<Scalar> hidden_output_delta(Mlp<Scalar> const &model, BatchCache<Scalar> const &cache,
                                    MatrixX<Scalar> const &doutput)
{
  return doutput.cwiseProduct(detail::activation_grad(cache.output, model.spec().hidden_activation));
}

template <typename Scalar>
ForwardTrace<Scalar> forward(Mlp<Scalar> const &model, VectorX<Scalar> const &record,
                             std::optional<int> label = std::nullopt)
{
  require(model.spec().output == OutputKind::Softmax, "forward: model must have a softmax output");
  if (label) { require(*label >= 0 && *label < model.spec().output_width(), "forward: label out of range"); }
  BatchCache<Scalar> cache;
  MatrixX<Scalar> out = forward_batch(model, MatrixX<Scalar>(record.transpose()), &cache);
  ForwardTrace<Scalar> t;
  for (std::size_t i = 1; i < cache.inputs.size(); ++i) { t.activations.push_back(cache.inputs[i].row(0).transpose()); }
  t.output = out.row(0).transpose();
  if (label) {
    t.loss = -detail::row_log_softmax(cache.pre)(0, *label);
    if (!std::isfinite(static_cast<double>(*t.loss))) { throw NumericError("forward: non-finite loss"); }
  }
  return t;
}

// Gradient of the cross-entropy loss of one labelled record.
template <typename Scalar>
Gradients<Scalar> backward(Mlp<Scalar> const &model, VectorX<Scalar> const &record, int label)
{
  require(model.spec().output == OutputKind::Softmax, "backward: model must have a softmax output");
  require(label >= 0 && label < model.spec().output_width(), "backward: label out of range");
  BatchCache<Scalar> cache;
  MatrixX<Scalar> P = forward_batch(model, MatrixX<Scalar>(record.transpose()), &cache);
  P(0, label) -= Scalar(1);
  return backward_batch(model, cache, std::move(P));
}

template <typename Scalar> Mlp<Scalar> gd_step(Mlp<Scalar> model, Gradients<Scalar> const &grads, Scalar learning_rate)
{
  require(learning_rate > 0, "gd_step: learning rate must be positive");
  require(static_cast<Index>(grads.layers.size()) == model.depth(), "gd_step: gradient layer count mismatch");
  for (Index i = 0; i < model.depth(); ++i) {
    auto const &G = grads.layers[static_cast<std::size_t>(i)];
    auto &W = model.layer(i);
    require(G.rows() == W.rows() && G.cols() == W.cols(), "gd_step: gradient shape mismatch");
    W -= learning_rate * G;
  }
  return model;
}

// Labelled records with nonnegative per-record weights. An empty weight
// vector means weight 1 everywhere.
template <typename Scalar = double> struct WeightedSet
{
  MatrixX<Scalar> features;
  std::vector<int> labels;
  std::vector<Scalar> weights;

  Index size() const { return features.rows(); }
  Scalar weight(Index i) const { return weights.empty() ? Scalar(1) : weights[static_cast<std::size_t>(i)]; }

  void validate(Index input_width, Index num_classes) const
  {
    require(size() > 0, "dataset is empty");
    require(static_cast<Index>(labels.size()) == size(), "label count does not match record count");
    require(weights.empty() || static_cast<Index>(weights.size()) == size(), "weight count does not match record count");
    require(features.cols() == input_width, "record width does not match model input");
    for (int l : labels) { require(l >= 0 && l < num_classes, "label out of range"); }
    for (auto w : weights) { require(w >= 0 && std::isfinite(static_cast<double>(w)), "weights must be finite and nonnegative"); }
  }
};

// Gradient of (1/|rows|) * sum_i w_i * CE_i over the selected rows. Returns the
// same normalised weighted loss through loss_out.
template <typename Scalar>
Gradients<Scalar> batch_gradient(Mlp<Scalar> const &model, WeightedSet<Scalar> const &data, std::span<Index const> rows,
                                 Scalar *loss_out = nullptr)
{
  Index const n = static_cast<Index>(rows.size());
  MatrixX<Scalar> X(n, data.features.cols());
  for (Index r = 0; r < n; ++r) { X.row(r) = data.features.row(rows[static_cast<std::size_t>(r)]); }
  BatchCache<Scalar> cache;
  MatrixX<Scalar> delta = forward_batch(model, X, &cache);
  MatrixX<Scalar> logp;
  if (loss_out) { logp = detail::row_log_softmax(cache.pre); }
  Scalar loss = 0;
  for (Index r = 0; r < n; ++r) {
    Index const src = rows[static_cast<std::size_t>(r)];
    int const y = data.labels[static_cast<std::size_t>(src)];
    Scalar const w = data.weight(src) / static_cast<Scalar>(n);
    delta(r, y) -= Scalar(1);
    delta.row(r) *= w;
    if (loss_out) { loss -= w * logp(r, y); }
  }
  if (loss_out) { *loss_out = loss; }
  return backward_batch(model, cache, std::move(delta));
}

template <typename Scalar> Scalar weighted_loss(Mlp<Scalar> const &model, WeightedSet<Scalar> const &data)
{
  data.validate(model.spec().input_width(), model.spec().output_width());
  BatchCache<Scalar> cache;
  forward_batch(model, data.features, &cache);
  MatrixX<Scalar> logp = detail::row_log_softmax(cache.pre);
  Scalar loss = 0;
  for (Index r = 0; r < data.size(); ++r) { loss -= data.weight(r) * logp(r, data.labels[static_cast<std::size_t>(r)]); }
  return loss / static_cast<Scalar>(data.size());
}

struct TrainConfig
{
  int epochs = 100;
  double learning_rate = 0.1;
  Index batch_size = 0; // 0 or >= dataset size: full batch
  std::uint64_t seed = 1;
};

// Gradient descent on the weighted cross-entropy. Mini-batches come from a
// seeded shuffle each epoch; full-batch mode keeps record order fixed.
template <typename Scalar> Mlp<Scalar> train(Mlp<Scalar> model, WeightedSet<Scalar> const &data, TrainConfig const &cfg)
{
  data.validate(model.spec().input_width(), model.spec().output_width());
  require(model.spec().output == OutputKind::Softmax, "train: model must have a softmax output");
  require(cfg.learning_rate > 0, "train: learning rate must be positive");
  require(cfg.epochs >= 0, "train: epochs must be nonnegative");
  Index const n = data.size();
  Index const bs = (cfg.batch_size <= 0 || cfg.batch_size >= n) ? n : cfg.batch_size;
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(cfg.seed);
  Scalar const lr = static_cast<Scalar>(cfg.learning_rate);
  for (int e = 0; e < cfg.epochs; ++e) {
    if (bs < n) { std::shuffle(order.begin(), order.end(), rng); }
    for (Index start = 0; start < n; start += bs) {
      Index const len = std::min(bs, n - start);
      auto g = batch_gradient(model, data, std::span<Index const>(order.data() + start, static_cast<std::size_t>(len)));
      model = gd_step(std::move(model), g, lr);
    }
  }
  return model;
}

// Argmax per row, ties to the lowest index.
template <typename Scalar> std::vector<int> predict(Mlp<Scalar> const &model, MatrixX<Scalar> const &X)
{
  MatrixX<Scalar> P = forward_batch(model, X);
  std::vector<int> out(static_cast<std::size_t>(P.rows()));
  for (Index r = 0; r < P.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < P.cols(); ++c) {
      if (P(r, c) > P(r, best)) { best = c; }
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

template <typename Scalar>
double test_accuracy(Mlp<Scalar> const &model, MatrixX<Scalar> const &X, std::span<int const> labels)
{
  require(X.rows() > 0, "test_accuracy: empty dataset");
  require(static_cast<Index>(labels.size()) == X.rows(), "test_accuracy: label count mismatch");
  auto const pred = predict(model, X);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) { hits += pred[i] == labels[i] ? 1 : 0; }
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

} // namespace mia

#endif // MIA_NN_HPP
