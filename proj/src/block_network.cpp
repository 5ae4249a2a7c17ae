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

#include "mia/block_network.hpp"

#include <algorithm>
#include <numeric>

namespace mia {

void BlockNetworkSpec::validate() const
{
  require(input_width >= 1, "block network: input width must be positive");
  require(encoder_width >= 1 && conv_filters >= 1, "block network: encoder sizes must be positive");
  require(num_classes >= 2, "block network: need at least two classes");
  for (auto const &b : blocks) {
    require(b.offset >= 0 && b.width >= 1 && b.offset + b.width <= input_width,
            "block network: block outside the input vector");
    if (b.kind == EncoderKind::ColumnConv) {
      require(b.rows >= 1 && b.width % b.rows == 0, "block network: conv block width must be a multiple of its rows");
    }
  }
}

struct BlockNetwork::Cache
{
  struct Enc
  {
    BatchCache<double> kernel;
    BatchCache<double> head;
  };
  std::vector<Enc> enc;
  BatchCache<double> combiner;
};

namespace {

Matrix stack_columns(Matrix const &S, Index rows)
{
  Index const cols = S.cols() / rows;
  Matrix M(S.rows() * cols, rows);
  for (Index s = 0; s < S.rows(); ++s) {
    for (Index j = 0; j < cols; ++j) { M.row(s * cols + j) = S.row(s).segment(j * rows, rows); }
  }
  return M;
}

Matrix unstack(Matrix const &K, Index n)
{
  Index const cols = K.rows() / n;
  Index const f = K.cols();
  Matrix H(n, cols * f);
  for (Index s = 0; s < n; ++s) {
    for (Index j = 0; j < cols; ++j) { H.row(s).segment(j * f, f) = K.row(s * cols + j); }
  }
  return H;
}

Matrix restack(Matrix const &H, Index cols)
{
  Index const f = H.cols() / cols;
  Matrix K(H.rows() * cols, f);
  for (Index s = 0; s < H.rows(); ++s) {
    for (Index j = 0; j < cols; ++j) { K.row(s * cols + j) = H.row(s).segment(j * f, f); }
  }
  return K;
}

MlpSpec hidden_spec(Index in, Index out, Activation a)
{
  return MlpSpec{{in, out}, a, OutputKind::Hidden};
}

} // namespace

BlockNetwork::BlockNetwork(BlockNetworkSpec spec, Rng &rng)
  : spec_(std::move(spec))
{
  spec_.validate();
  Index concat_width = 0;
  for (auto const &b : spec_.blocks) {
    Encoder e{b, std::nullopt, {}};
    if (b.kind == EncoderKind::ColumnConv) {
      Index const cols = b.width / b.rows;
      e.kernel = Mlp<double>::random(hidden_spec(b.rows, spec_.conv_filters, spec_.activation), rng);
      e.head = Mlp<double>::random(hidden_spec(cols * spec_.conv_filters, spec_.encoder_width, spec_.activation), rng);
    } else {
      e.head = Mlp<double>::random(hidden_spec(b.width, spec_.encoder_width, spec_.activation), rng);
    }
    concat_width += spec_.encoder_width;
    encoders_.push_back(std::move(e));
  }
  if (encoders_.empty()) { concat_width = spec_.input_width; }
  MlpSpec cs;
  cs.layer_widths.push_back(concat_width);
  cs.layer_widths.insert(cs.layer_widths.end(), spec_.combiner_hidden.begin(), spec_.combiner_hidden.end());
  cs.layer_widths.push_back(spec_.num_classes);
  cs.hidden_activation = spec_.activation;
  combiner_ = Mlp<double>::random(cs, rng);
}

std::int64_t BlockNetwork::param_count() const
{
  std::int64_t n = 0;
  for (auto const *p : parameters()) { n += p->size(); }
  return n;
}

Matrix BlockNetwork::forward_impl(Matrix const &X, Cache *cache) const
{
  require(X.cols() == spec_.input_width, "block network: input width mismatch");
  if (encoders_.empty()) { return forward_batch(combiner_, X, cache ? &cache->combiner : nullptr); }
  if (cache) { cache->enc.resize(encoders_.size()); }
  Matrix concat(X.rows(), static_cast<Index>(encoders_.size()) * spec_.encoder_width);
  for (std::size_t i = 0; i < encoders_.size(); ++i) {
    auto const &e = encoders_[i];
    Matrix slice = X.middleCols(e.block.offset, e.block.width);
    if (e.kernel) {
      Matrix K = forward_batch(*e.kernel, stack_columns(slice, e.block.rows), cache ? &cache->enc[i].kernel : nullptr);
      slice = unstack(K, X.rows());
    }
    concat.middleCols(static_cast<Index>(i) * spec_.encoder_width, spec_.encoder_width) =
        forward_batch(e.head, slice, cache ? &cache->enc[i].head : nullptr);
  }
  return forward_batch(combiner_, concat, cache ? &cache->combiner : nullptr);
}

Matrix BlockNetwork::forward(Matrix const &X) const { return forward_impl(X, nullptr); }

std::vector<Matrix const *> BlockNetwork::parameters() const
{
  std::vector<Matrix const *> out;
  for (auto const &e : encoders_) {
    if (e.kernel) {
      for (auto const &W : e.kernel->layers()) { out.push_back(&W); }
    }
    for (auto const &W : e.head.layers()) { out.push_back(&W); }
  }
  for (auto const &W : combiner_.layers()) { out.push_back(&W); }
  return out;
}

std::vector<Matrix *> BlockNetwork::parameters()
{
  std::vector<Matrix *> out;
  for (auto &e : encoders_) {
    if (e.kernel) {
      for (auto &W : e.kernel->layers()) { out.push_back(&W); }
    }
    for (auto &W : e.head.layers()) { out.push_back(&W); }
  }
  for (auto &W : combiner_.layers()) { out.push_back(&W); }
  return out;
}

std::vector<Matrix> BlockNetwork::gradients(Matrix const &X, std::span<int const> labels, double *loss) const
{
  Index const n = X.rows();
  require(n > 0, "block network: empty batch");
  require(static_cast<Index>(labels.size()) == n, "block network: label count mismatch");
  Cache cache;
  Matrix delta = forward_impl(X, &cache);
  if (loss) {
    Matrix const logp = detail::row_log_softmax(cache.combiner.pre);
    double l = 0;
    for (Index r = 0; r < n; ++r) { l -= logp(r, labels[static_cast<std::size_t>(r)]); }
    *loss = l / static_cast<double>(n);
  }
  for (Index r = 0; r < n; ++r) {
    int const y = labels[static_cast<std::size_t>(r)];
    require(y >= 0 && y < spec_.num_classes, "block network: label out of range");
    delta(r, y) -= 1.0;
  }
  delta /= static_cast<double>(n);

  Matrix dconcat;
  auto gc = backward_batch(combiner_, cache.combiner, std::move(delta), encoders_.empty() ? nullptr : &dconcat);

  std::vector<Matrix> out;
  for (std::size_t i = 0; i < encoders_.size(); ++i) {
    auto const &e = encoders_[i];
    Matrix const dout = dconcat.middleCols(static_cast<Index>(i) * spec_.encoder_width, spec_.encoder_width);
    auto const &hc = cache.enc[i].head;
    Matrix dhead_in;
    auto gh = backward_batch(e.head, hc, hidden_output_delta(e.head, hc, dout), e.kernel ? &dhead_in : nullptr);
    if (e.kernel) {
      auto const &kc = cache.enc[i].kernel;
      Matrix const dk = restack(dhead_in, e.block.width / e.block.rows);
      auto gk = backward_batch(*e.kernel, kc, hidden_output_delta(*e.kernel, kc, dk));
      for (auto &G : gk.layers) { out.push_back(std::move(G)); }
    }
    for (auto &G : gh.layers) { out.push_back(std::move(G)); }
  }
  for (auto &G : gc.layers) { out.push_back(std::move(G)); }
  return out;
}

double BlockNetwork::sgd_step(Matrix const &X, std::span<int const> labels, double learning_rate)
{
  double loss = 0;
  auto grads = gradients(X, labels, &loss);
  auto params = parameters();
  for (std::size_t i = 0; i < params.size(); ++i) { *params[i] -= learning_rate * grads[i]; }
  return loss;
}

void BlockNetwork::fit(Matrix const &X, std::span<int const> labels, TrainConfig const &cfg)
{
  Index const n = X.rows();
  require(n > 0, "block network: empty training set");
  require(static_cast<Index>(labels.size()) == n, "block network: label count mismatch");
  require(cfg.learning_rate > 0, "block network: learning rate must be positive");
  Index const bs = (cfg.batch_size <= 0 || cfg.batch_size >= n) ? n : cfg.batch_size;
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(cfg.seed);
  Matrix batch;
  std::vector<int> batch_labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Index start = 0; start < n; start += bs) {
      Index const len = std::min(bs, n - start);
      batch.resize(len, X.cols());
      batch_labels.resize(static_cast<std::size_t>(len));
      for (Index r = 0; r < len; ++r) {
        Index const src = order[static_cast<std::size_t>(start + r)];
        batch.row(r) = X.row(src);
        batch_labels[static_cast<std::size_t>(r)] = labels[static_cast<std::size_t>(src)];
      }
      sgd_step(batch, batch_labels, cfg.learning_rate);
    }
  }
}

} // namespace mia
