// Copyright 2026 The GradLab Authors
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

#include "gradlab/nn.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "gradlab/rng.hpp"

using namespace gradlab;
using namespace gradlab::nn;

namespace {

Batch RandomBatch(Rng& rng, int n, int dim, int classes) {
  Batch b;
  for (int i = 0; i < n; ++i) {
    std::vector<double> x(dim);
    for (double& v : x) v = rng.Normal();
    b.xs.push_back(std::move(x));
    b.ys.push_back(rng.UniformInt(classes));
  }
  return b;
}

}  // namespace

TEST_CASE("init is deterministic for a fixed seed") {
  NetworkSpec spec{.layer_widths = {4, 3, 2}, .init_seed = 99};
  const ModelParameters a = InitNetwork(spec);
  const ModelParameters b = InitNetwork(spec);
  REQUIRE(a.flat.size() == b.flat.size());
  for (std::size_t i = 0; i < a.flat.size(); ++i) CHECK(a.flat[i] == b.flat[i]);
}

TEST_CASE("parameter count follows the layer widths") {
  NetworkSpec spec{.layer_widths = {4, 3, 2}, .init_seed = 1};
  CHECK(ModelShape(spec).param_count() == 4 * 3 + 3 + 3 * 2 + 2);  // 23
  CHECK(InitNetwork(spec).flat.size() == 23);
}

TEST_CASE("biases start at exactly zero") {
  NetworkSpec spec{.layer_widths = {2, 2}, .init_seed = 7};
  const ModelParameters p = InitNetwork(spec);
  const ModelShape shape(spec);
  for (const auto& layer : shape.layers())
    for (int j = 0; j < layer.out; ++j) CHECK(p.flat[layer.b_offset + j] == 0.0);
}

TEST_CASE("spec validation rejects malformed networks") {
  CHECK_THROWS_AS(NetworkSpec{.layer_widths = {4}}.Validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS((NetworkSpec{.layer_widths = {4, 0, 2}}.Validate()),
                  std::invalid_argument);
  NetworkSpec bad_vib{.layer_widths = {4, 3, 2},
                      .vib = VibConfig{.latent_dim = 0, .beta = 0.1}};
  CHECK_THROWS_AS(bad_vib.Validate(), std::invalid_argument);
}

TEST_CASE("zero network produces zero logits") {
  NetworkSpec spec{.layer_widths = {3, 4, 2}, .init_seed = 0};
  ModelParameters p = InitNetwork(spec);
  std::fill(p.flat.begin(), p.flat.end(), 0.0);
  const std::vector<double> x{0.3, -1.0, 2.0};
  for (const double v : Forward(p, x)) CHECK(v == 0.0);
}

TEST_CASE("single linear layer reproduces the hand matrix product") {
  NetworkSpec spec{.layer_widths = {2, 2}, .init_seed = 0};
  ModelParameters p = InitNetwork(spec);
  // W = [[1,2],[3,4]] row-major, b = 0.
  p.flat = {1.0, 2.0, 3.0, 4.0, 0.0, 0.0};
  const std::vector<double> logits = Forward(p, std::vector<double>{1.0, 1.0});
  REQUIRE(logits.size() == 2);
  CHECK(logits[0] == doctest::Approx(3.0));
  CHECK(logits[1] == doctest::Approx(7.0));
}

TEST_CASE("forward rejects dimension mismatch") {
  NetworkSpec spec{.layer_widths = {3, 2}, .init_seed = 0};
  const ModelParameters p = InitNetwork(spec);
  CHECK_THROWS_AS(Forward(p, std::vector<double>{1.0, 2.0}),
                  std::invalid_argument);
}

TEST_CASE("uniform logits over two classes give loss ln 2") {
  NetworkSpec spec{.layer_widths = {3, 2}, .init_seed = 0};
  ModelParameters p = InitNetwork(spec);
  std::fill(p.flat.begin(), p.flat.end(), 0.0);
  Batch b;
  b.xs = {{0.5, -0.5, 1.0}};
  b.ys = {1};
  CHECK(LossAndGradient(p, b).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("labels out of range are rejected") {
  NetworkSpec spec{.layer_widths = {3, 2}, .init_seed = 0};
  const ModelParameters p = InitNetwork(spec);
  Batch b;
  b.xs = {{0.5, -0.5, 1.0}};
  b.ys = {2};
  CHECK_THROWS_AS(LossAndGradient(p, b), std::invalid_argument);
  b.ys = {-1};
  CHECK_THROWS_AS(LossAndGradient(p, b), std::invalid_argument);
}

TEST_CASE("analytic gradient matches central finite differences") {
  NetworkSpec spec{.layer_widths = {5, 4, 3}, .init_seed = 2024};
  const ModelParameters p = InitNetwork(spec);
  Rng rng(555);
  const Batch b = RandomBatch(rng, 8, 5, 3);
  CHECK(FiniteDifferenceCheck(p, b, 1e-5) < 1e-4);
}

TEST_CASE("one-layer network passes a tight finite-difference check") {
  NetworkSpec spec{.layer_widths = {4, 2}, .init_seed = 31};
  const ModelParameters p = InitNetwork(spec);
  Rng rng(77);
  const Batch b = RandomBatch(rng, 6, 4, 2);
  CHECK(FiniteDifferenceCheck(p, b, 1e-5) < 1e-6);
}

TEST_CASE("finite differences stay finite on symmetric logits") {
  NetworkSpec spec{.layer_widths = {2, 2}, .init_seed = 0};
  ModelParameters p = InitNetwork(spec);
  std::fill(p.flat.begin(), p.flat.end(), 0.0);
  Batch b;
  b.xs = {{1.0, -1.0}};
  b.ys = {0};
  const double err = FiniteDifferenceCheck(p, b, 1e-5);
  CHECK(std::isfinite(err));
}

TEST_CASE("batch gradient is the mean of per-sample gradients") {
  NetworkSpec spec{.layer_widths = {5, 4, 3}, .init_seed = 2024};
  const ModelParameters p = InitNetwork(spec);
  Rng rng(556);
  const Batch b = RandomBatch(rng, 8, 5, 3);
  const LossGrad lg = LossAndGradient(p, b);
  const auto per_sample = PerSampleGradients(p, b);
  REQUIRE(per_sample.size() == b.size());
  for (std::size_t i = 0; i < lg.grad.size(); ++i) {
    double mean = 0.0;
    for (const auto& g : per_sample) mean += g[i];
    mean /= static_cast<double>(per_sample.size());
    CHECK(std::abs(mean - lg.grad[i]) < 1e-10);
  }
}

TEST_CASE("per-sample gradients on a singleton batch match the batch gradient") {
  NetworkSpec spec{.layer_widths = {4, 3, 2}, .init_seed = 8};
  const ModelParameters p = InitNetwork(spec);
  Rng rng(557);
  const Batch b = RandomBatch(rng, 1, 4, 2);
  const auto per_sample = PerSampleGradients(p, b);
  const LossGrad lg = LossAndGradient(p, b);
  REQUIRE(per_sample.size() == 1);
  for (std::size_t i = 0; i < lg.grad.size(); ++i)
    CHECK(per_sample[0][i] == doctest::Approx(lg.grad[i]).epsilon(1e-14));
}

TEST_CASE("duplicated samples give identical per-sample gradients") {
  NetworkSpec spec{.layer_widths = {4, 3, 2}, .init_seed = 8};
  const ModelParameters p = InitNetwork(spec);
  Batch b;
  b.xs = {{1.0, 2.0, -1.0, 0.5}, {1.0, 2.0, -1.0, 0.5}};
  b.ys = {1, 1};
  const auto per_sample = PerSampleGradients(p, b);
  REQUIRE(per_sample.size() == 2);
  for (std::size_t i = 0; i < per_sample[0].size(); ++i)
    CHECK(per_sample[0][i] == per_sample[1][i]);
}

TEST_CASE("each per-sample gradient survives its own finite-difference check") {
  NetworkSpec spec{.layer_widths = {5, 4, 3}, .init_seed = 41};
  const ModelParameters p = InitNetwork(spec);
  Rng rng(558);
  const Batch b = RandomBatch(rng, 4, 5, 3);
  for (std::size_t i = 0; i < b.size(); ++i) {
    Batch solo;
    solo.xs = {b.xs[i]};
    solo.ys = {b.ys[i]};
    CHECK(FiniteDifferenceCheck(p, solo, 1e-5) < 1e-4);
  }
}

TEST_CASE("sgd step with zero rate is the identity") {
  NetworkSpec spec{.layer_widths = {3, 2}, .init_seed = 5};
  const ModelParameters p = InitNetwork(spec);
  GradientVector g(p.flat.size(), 1.5);
  const ModelParameters q = SgdStep(p, g, 0.0);
  for (std::size_t i = 0; i < p.flat.size(); ++i) CHECK(q.flat[i] == p.flat[i]);
}

TEST_CASE("sgd step followed by its inverse restores the parameters") {
  NetworkSpec spec{.layer_widths = {3, 2}, .init_seed = 5};
  const ModelParameters p = InitNetwork(spec);
  Rng rng(559);
  GradientVector g(p.flat.size());
  for (double& v : g) v = rng.Normal();
  GradientVector neg = g;
  for (double& v : neg) v = -v;
  const ModelParameters back = SgdStep(SgdStep(p, g, 0.01), neg, 0.01);
  for (std::size_t i = 0; i < p.flat.size(); ++i)
    CHECK(std::abs(back.flat[i] - p.flat[i]) < 1e-12);
}

TEST_CASE("sgd step rejects mismatched gradient length") {
  NetworkSpec spec{.layer_widths = {3, 2}, .init_seed = 5};
  const ModelParameters p = InitNetwork(spec);
  CHECK_THROWS_AS(SgdStep(p, GradientVector(3, 0.0), 0.1),
                  std::invalid_argument);
}

TEST_CASE("vib forward is deterministic for a fixed latent stream") {
  NetworkSpec spec{.layer_widths = {4, 6, 2},
                   .vib = VibConfig{.latent_dim = 3, .beta = 0.01},
                   .init_seed = 17};
  const ModelParameters p = InitNetwork(spec);
  const std::vector<double> x{0.2, -0.7, 1.1, 0.4};
  const std::vector<double> xi{0.5, -1.2, 0.3};
  const auto a = Forward(p, x, xi);
  const auto b = Forward(p, x, xi);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  CHECK_THROWS_AS(Forward(p, x), std::invalid_argument);
}

TEST_CASE("vib loss with beta zero reduces to plain cross-entropy") {
  NetworkSpec spec{.layer_widths = {4, 6, 3},
                   .vib = VibConfig{.latent_dim = 3, .beta = 0.0},
                   .init_seed = 29};
  const ModelParameters p = InitNetwork(spec);
  Rng rng(560);
  const Batch b = RandomBatch(rng, 5, 4, 3);
  Rng noise_rng(561);
  const VibNoise noise = VibNoise::Draw(noise_rng, b.size(), 3);

  // Cross-entropy computed from the forward logits alone.
  double ce = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto logits = Forward(p, b.xs[i], noise.row(i));
    double m = logits[0];
    for (const double v : logits) m = std::max(m, v);
    double s = 0.0;
    for (const double v : logits) s += std::exp(v - m);
    ce += m + std::log(s) - logits[b.ys[i]];
  }
  ce /= static_cast<double>(b.size());

  CHECK(LossAndGradient(p, b, noise).loss == doctest::Approx(ce).epsilon(1e-14));
}

TEST_CASE("vib gradient matches finite differences with replayed noise") {
  NetworkSpec spec{.layer_widths = {4, 5, 2},
                   .vib = VibConfig{.latent_dim = 3, .beta = 0.05},
                   .init_seed = 37};
  const ModelParameters p = InitNetwork(spec);
  Rng rng(562);
  const Batch b = RandomBatch(rng, 6, 4, 2);
  Rng noise_rng(563);
  const VibNoise noise = VibNoise::Draw(noise_rng, b.size(), 3);
  CHECK(FiniteDifferenceCheck(p, b, 1e-5, &noise) < 1e-4);
}

TEST_CASE("vib batch gradient is the mean of per-sample gradients") {
  NetworkSpec spec{.layer_widths = {4, 5, 2},
                   .vib = VibConfig{.latent_dim = 2, .beta = 0.01},
                   .init_seed = 43};
  const ModelParameters p = InitNetwork(spec);
  Rng rng(564);
  const Batch b = RandomBatch(rng, 5, 4, 2);
  Rng noise_rng(565);
  const VibNoise noise = VibNoise::Draw(noise_rng, b.size(), 2);
  const LossGrad lg = LossAndGradient(p, b, noise);
  const auto per_sample = PerSampleGradients(p, b, noise);
  for (std::size_t i = 0; i < lg.grad.size(); ++i) {
    double mean = 0.0;
    for (const auto& g : per_sample) mean += g[i];
    mean /= static_cast<double>(per_sample.size());
    CHECK(std::abs(mean - lg.grad[i]) < 1e-10);
  }
}
