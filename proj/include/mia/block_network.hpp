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

// A two-level network: each input block goes through its own encoder, the
// encoder outputs are concatenated and fed to a combiner with a softmax
// head. With no blocks the combiner sees the whole input directly. All
// parts are trained jointly by backpropagation through the composition.

#ifndef MIA_BLOCK_NETWORK_HPP
#define MIA_BLOCK_NETWORK_HPP

#include <optional>
#include <span>
#include <vector>

#include "mia/nn.hpp"

namespace mia {

enum class EncoderKind
{
  Dense,
  // Treats the block as a column-major rows x cols matrix and slides one
  // shared kernel (spanning a full column) across the columns.
  ColumnConv
};

struct InputBlock
{
  Index offset = 0;
  Index width = 0;
  EncoderKind kind = EncoderKind::Dense;
  Index rows = 0; // ColumnConv only; width must be a multiple of rows
};

struct BlockNetworkSpec
{
  Index input_width = 0;
  std::vector<InputBlock> blocks;
  Index encoder_width = 64;
  Index conv_filters = 4;
  std::vector<Index> combiner_hidden{128, 64};
  Index num_classes = 2;
  Activation activation = Activation::Tanh;

  void validate() const;
};

class BlockNetwork
{
public:
  BlockNetwork() = default;
  BlockNetwork(BlockNetworkSpec spec, Rng &rng);

  BlockNetworkSpec const &spec() const { return spec_; }
  std::int64_t param_count() const;

  Matrix forward(Matrix const &X) const;

  // Mean cross-entropy over the batch; returns the loss and applies one
  // gradient step.
  double sgd_step(Matrix const &X, std::span<int const> labels, double learning_rate);

  // Mini-batch SGD with a seeded shuffle each epoch.
  void fit(Matrix const &X, std::span<int const> labels, TrainConfig const &cfg);

  // Parameters in a fixed order, for equality checks and gradient tests.
  std::vector<Matrix const *> parameters() const;
  std::vector<Matrix *> parameters();

  // Gradient of the mean cross-entropy w.r.t. parameters(), same order.
  std::vector<Matrix> gradients(Matrix const &X, std::span<int const> labels, double *loss = nullptr) const;

private:
  struct Encoder
  {
    InputBlock block;
    std::optional<Mlp<double>> kernel; // ColumnConv only
    Mlp<double> head;
  };

  struct Cache;
  Matrix forward_impl(Matrix const &X, Cache *cache) const;

  BlockNetworkSpec spec_;
  std::vector<Encoder> encoders_;
  Mlp<double> combiner_;
};

} // namespace mia

#endif // MIA_BLOCK_NETWORK_HPP
