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

#include <cmath>

#include <gtest/gtest.h>

#include "mia/datakit.hpp"
#include "mia/nn.hpp"

namespace mia {
namespace {

Mlp<double> random_model(std::vector<Index> widths, std::uint64_t seed, Activation a = Activation::Tanh)
{
  Rng rng(seed);
  return Mlp<double>::random(MlpSpec{std::move(widths), a}, rng);
}

// Central finite difference of the record loss w.r.t. every parameter.
std::vector<Matrix> numeric_gradient(Mlp<double> model, Vector const &x, int y, double eps)
{
  std::vector<Matrix> out;
  for (Index l = 0; l < model.depth(); ++l) {
    Matrix G(model.layer(l).rows(), model.layer(l).cols());
    for (Index i = 0; i < G.size(); ++i) {
      double const w = model.layer(l)(i);
      model.layer(l)(i) = w + eps;
      double const up = *forward(model, x, y).loss;
      model.layer(l)(i) = w - eps;
      double const down = *forward(model, x, y).loss;
      model.layer(l)(i) = w;
      G(i) = (up - down) / (2 * eps);
    }
    out.push_back(G);
  }
  return out;
}

double max_relative_error(Gradients<double> const &g, std::vector<Matrix> const &n)
{
  double worst = 0;
  for (std::size_t l = 0; l < n.size(); ++l) {
    for (Index i = 0; i < n[l].size(); ++i) {
      double const a = g.layers[l](i), b = n[l](i);
      worst = std::max(worst, std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}));
    }
  }
  return worst;
}

TEST(OneHot, Definition)
{
  EXPECT_EQ(one_hot(2, 4), (Vector(4) << 0, 0, 1, 0).finished());
  EXPECT_EQ(one_hot(0, 1), Vector::Ones(1));
  Vector v = one_hot(29, 30);
  EXPECT_EQ(v.sum(), 1.0);
  EXPECT_EQ(v(29), 1.0);
}

TEST(OneHot, OutOfRange)
{
  EXPECT_THROW(one_hot(4, 4), DomainError);
  EXPECT_THROW(one_hot(-1, 4), DomainError);
}

TEST(MlpSpec, ParamCountIncludesBiasRow)
{
  MlpSpec s{{446, 256, 128, 30}};
  EXPECT_EQ(s.param_count(), 447 * 256 + 257 * 128 + 129 * 30);
  EXPECT_EQ(Mlp<double>(s).param_count(), s.param_count());
  EXPECT_THROW((MlpSpec{{4}}.validate()), DomainError);
  EXPECT_THROW((MlpSpec{{4, 0, 2}}.validate()), DomainError);
}

TEST(Forward, ZeroWeightsGiveUniformOutput)
{
  Mlp<double> m(MlpSpec{{5, 7, 30}});
  Vector x = Vector::Random(5);
  auto t = forward(m, x, 3);
  EXPECT_NEAR(t.output.sum(), 1.0, 1e-12);
  for (Index i = 0; i < 30; ++i) { EXPECT_NEAR(t.output(i), 1.0 / 30, 1e-15); }
  EXPECT_NEAR(*t.loss, 3.4011973816621555, 1e-12);
  EXPECT_EQ(t.activations.size(), 1u);
}

TEST(Forward, HandComputedTwoByTwoByTwo)
{
  Mlp<double> m(MlpSpec{{2, 2, 2}});
  m.layer(0) << 0.1, -0.2, 0.3, 0.4, 0.0, -0.1;
  m.layer(1) << 1.0, -1.0, 0.5, 0.5, 0.0, 0.2;
  auto t = forward(m, Vector((Vector(2) << 1.0, 2.0).finished()), 1);
  ASSERT_EQ(t.activations.size(), 1u);
  EXPECT_NEAR(t.activations[0](0), 0.6043677771171636, 1e-15);
  EXPECT_NEAR(t.activations[0](1), 0.46211715726000985, 1e-15);
  EXPECT_NEAR(t.output(0), 0.7327726222679969, 1e-15);
  EXPECT_NEAR(t.output(1), 0.26722737773200317, 1e-15);
  EXPECT_NEAR(*t.loss, 1.3196553809966065, 1e-14);
}

TEST(Forward, SoftmaxNormalisedForRandomModels)
{
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<Index> w(1, 8);
    std::vector<Index> widths{w(rng), w(rng), w(rng), w(rng) + 1};
    auto m = random_model(widths, rng());
    for (auto &W : m.layers()) { W *= 5.0; }
    Vector x = Vector::Random(widths[0]) * 10.0;
    auto t = forward(m, x);
    EXPECT_LT(std::abs(t.output.sum() - 1.0), 1e-9);
    EXPECT_GE(t.output.minCoeff(), 0.0);
    EXPECT_LE(t.output.maxCoeff(), 1.0);
    EXPECT_EQ(t.activations.size(), widths.size() - 2);
  }
}

TEST(Forward, Errors)
{
  Mlp<double> m(MlpSpec{{3, 2}});
  EXPECT_THROW(forward(m, Vector(Vector::Zero(4))), DomainError);
  EXPECT_THROW(forward(m, Vector(Vector::Zero(3)), 2), DomainError);
  Vector bad = Vector::Zero(3);
  bad(0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(forward(m, bad), NumericError);
}

TEST(Backward, MatchesFiniteDifferences)
{
  Rng rng(2024);
  std::uniform_int_distribution<Index> w(1, 8);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Index> widths{w(rng), w(rng), w(rng) + 1};
    if (trial % 2) { widths.insert(widths.begin() + 1, w(rng)); }
    auto m = random_model(widths, rng());
    Vector x = Vector::Random(widths[0]);
    int const y = static_cast<int>(rng() % static_cast<std::uint64_t>(widths.back()));
    worst = std::max(worst, max_relative_error(backward(m, x, y), numeric_gradient(m, x, y, 1e-4)));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Backward, ReluMatchesFiniteDifferences)
{
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = random_model({4, 6, 5, 3}, rng(), Activation::Relu);
    Vector x = Vector::Random(4);
    EXPECT_LT(max_relative_error(backward(m, x, 1), numeric_gradient(m, x, 1, 1e-6)), 1e-4);
  }
}

TEST(Backward, ZeroModelOutputBiasGradient)
{
  Mlp<double> m(MlpSpec{{4, 3, 5}});
  auto g = backward(m, Vector(Vector::Zero(4)), 2);
  RowVector expected = RowVector::Constant(5, 0.2);
  expected(2) -= 1.0;
  EXPECT_TRUE(g.layers.back().row(3).isApprox(expected, 1e-15));
}

TEST(Backward, StationaryAtMemorisedPoint)
{
  Mlp<double> m(MlpSpec{{4, 3, 3}});
  m.layer(1)(3, 1) = 25.0; // output bias favours the label
  Vector x = Vector::Random(4);
  ASSERT_LT(*forward(m, x, 1).loss, 1e-8);
  EXPECT_LT(backward(m, x, 1).max_abs(), 1e-6);
}

TEST(GdStep, Identities)
{
  auto m = random_model({3, 4, 2}, 5);
  Gradients<double> zero{{Matrix::Zero(4, 4), Matrix::Zero(5, 2)}};
  auto same = gd_step(m, zero, 0.3);
  for (Index l = 0; l < m.depth(); ++l) { EXPECT_EQ(same.layer(l), m.layer(l)); }

  Gradients<double> g{m.layers()};
  auto zeroed = gd_step(m, g, 1.0);
  for (auto const &W : zeroed.layers()) { EXPECT_TRUE(W.isZero(0.0)); }

  Gradients<double> bad{{Matrix::Zero(3, 4), Matrix::Zero(5, 2)}};
  EXPECT_THROW(gd_step(m, bad, 0.1), DomainError);
  EXPECT_THROW(gd_step(m, zero, 0.0), DomainError);
}

TEST(GdStep, QuadraticSurrogate)
{
  // L(w) = (w - 3)^2 at w = 1: dL/dw = -4, so w' = 1 - 0.1 * -4 = 1.4.
  Mlp<double> m(MlpSpec{{1, 1}});
  m.layer(0)(0, 0) = 1.0;
  Gradients<double> g{{Matrix::Zero(2, 1)}};
  g.layers[0](0, 0) = 2.0 * (m.layer(0)(0, 0) - 3.0);
  EXPECT_DOUBLE_EQ(gd_step(m, g, 0.1).layer(0)(0, 0), 1.4);
}

WeightedSet<double> two_clusters(Index n, std::uint64_t seed)
{
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  WeightedSet<double> d;
  d.features.resize(n, 2);
  for (Index i = 0; i < n; ++i) {
    int const y = static_cast<int>(i % 2);
    double const c = y ? 2.0 : -2.0;
    d.features(i, 0) = c + noise(rng);
    d.features(i, 1) = -c + noise(rng);
    d.labels.push_back(y);
  }
  return d;
}

TEST(Train, MemorisesSingleRecord)
{
  auto m = random_model({6, 8, 4}, 3);
  WeightedSet<double> d{Matrix::Random(1, 6), {2}, {}};
  auto trained = train(m, d, TrainConfig{500, 0.5, 0, 1});
  EXPECT_LT(weighted_loss(trained, d), 1e-3);
}

TEST(Train, DoubledWeightsHalvedRateSameTrajectory)
{
  auto m = random_model({2, 5, 2}, 9);
  auto d = two_clusters(40, 4);
  d.weights.assign(40, 1.0);
  for (std::size_t i = 0; i < d.weights.size(); ++i) { d.weights[i] = 0.5 + 0.1 * static_cast<double>(i % 7); }
  auto d2 = d;
  for (auto &w : d2.weights) { w *= 2.0; }
  auto a = train(m, d, TrainConfig{50, 0.2, 0, 1});
  auto b = train(m, d2, TrainConfig{50, 0.1, 0, 1});
  for (Index l = 0; l < a.depth(); ++l) { EXPECT_LT((a.layer(l) - b.layer(l)).cwiseAbs().maxCoeff(), 1e-12); }
}

TEST(Train, SeparatesTwoClusters)
{
  auto d = two_clusters(200, 8);
  auto m = train(random_model({2, 4, 2}, 1), d, TrainConfig{50, 0.1, 16, 3});
  EXPECT_GT(test_accuracy(m, d.features, d.labels), 0.95);
}

TEST(Train, FullBatchLossDecreases)
{
  auto d = two_clusters(60, 2);
  auto m = random_model({2, 6, 2}, 4);
  double const before = weighted_loss(m, d);
  auto trained = train(m, d, TrainConfig{20, 0.05, 0, 1});
  EXPECT_LE(weighted_loss(trained, d), before);
}

TEST(Train, DeterministicUnderSeed)
{
  auto d = two_clusters(64, 5);
  auto m = random_model({2, 6, 2}, 4);
  auto a = train(m, d, TrainConfig{10, 0.1, 8, 42});
  auto b = train(m, d, TrainConfig{10, 0.1, 8, 42});
  for (Index l = 0; l < a.depth(); ++l) { EXPECT_EQ(a.layer(l), b.layer(l)); }
}

TEST(Train, RejectsEmptyAndNegativeWeights)
{
  auto m = random_model({2, 2}, 1);
  WeightedSet<double> empty{Matrix(0, 2), {}, {}};
  EXPECT_THROW(train(m, empty, TrainConfig{}), DomainError);
  WeightedSet<double> neg{Matrix::Zero(1, 2), {0}, {-1.0}};
  EXPECT_THROW(train(m, neg, TrainConfig{}), DomainError);
}

TEST(TestAccuracy, Baselines)
{
  // Memorised training set.
  WeightedSet<double> ten{Matrix::Identity(10, 10), {0, 1, 2, 3, 4, 0, 1, 2, 3, 4}, {}};
  auto m = train(random_model({10, 16, 5}, 2), ten, TrainConfig{800, 0.5, 0, 1});
  EXPECT_EQ(test_accuracy(m, ten.features, ten.labels), 1.0);

  // Constant output: every prediction is class 0.
  Mlp<double> zero(MlpSpec{{3, 4}});
  Matrix X = Matrix::Random(8, 3);
  std::vector<int> labels{0, 1, 2, 3, 0, 1, 2, 3};
  EXPECT_EQ(test_accuracy(zero, X, labels), 0.25);

  // Zero-weight model on Locations-shaped synthetic data.
  auto data = generate_synthetic(SynthSpec{600, 446, 30, 0.2, 3});
  Mlp<double> flat(MlpSpec{{446, 8, 30}});
  EXPECT_NEAR(test_accuracy(flat, data.features, data.labels), 1.0 / 30, 1e-12);

  EXPECT_THROW(test_accuracy(zero, Matrix(0, 3), std::vector<int>{}), DomainError);
}

} // namespace
} // namespace mia
