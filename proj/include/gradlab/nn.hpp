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

#ifndef GRADLAB_NN_HPP_
#define GRADLAB_NN_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gradlab/rng.hpp"

namespace gradlab::nn {

// Flat vector of loss partial derivatives in the canonical flattening order
// (see ModelShape). Everything downstream -- defenses, reducers, attack
// models -- consumes these raw indices, so the layout is part of the
// contract.
using GradientVector = std::vector<double>;

struct VibConfig {
  int latent_dim = 0;   // >= 1
  double beta = 0.0;    // KL weight, >= 0
};

// Fully-connected ReLU classifier. layer_widths runs input ... output.
// When `vib` is set, the network becomes: hidden ReLU stack over all interior
// widths, a linear encoder head producing (mu, log-variance) of a diagonal
// Gaussian latent of size latent_dim, the reparameterized sample
// h = mu + exp(logvar/2) * xi, and a linear decoder from h to the output
// width. The training loss gains beta * KL(N(mu, sigma^2) || N(0, I)).
struct NetworkSpec {
  std::vector<int> layer_widths;
  std::optional<VibConfig> vib;
  std::uint64_t init_seed = 0;

  int input_dim() const { return layer_widths.front(); }
  int output_dim() const { return layer_widths.back(); }
  // Throws std::invalid_argument on malformed widths or VIB settings.
  void Validate() const;
};

struct LayerShape {
  int in = 0;
  int out = 0;
  bool relu = false;          // ReLU applied to this layer's output
  std::size_t w_offset = 0;   // weights, row-major (out x in)
  std::size_t b_offset = 0;   // biases (out)
};

// Canonical flattening: for each linear layer in forward order, the weight
// matrix row-major (output unit major) followed by the bias vector. VIB
// networks order their layers: hidden stack, encoder head (2*latent_dim
// outputs: rows [0, latent) are mu, rows [latent, 2*latent) are logvar),
// decoder.
class ModelShape {
 public:
  explicit ModelShape(const NetworkSpec& spec);

  std::size_t param_count() const { return param_count_; }
  const std::vector<LayerShape>& layers() const { return layers_; }
  bool has_vib() const { return has_vib_; }
  int latent_dim() const { return latent_dim_; }
  // Index of the encoder-head layer within layers(); only valid for VIB nets.
  std::size_t encoder_layer() const { return layers_.size() - 2; }

 private:
  std::vector<LayerShape> layers_;
  std::size_t param_count_ = 0;
  bool has_vib_ = false;
  int latent_dim_ = 0;
};

struct ModelParameters {
  NetworkSpec spec;
  std::vector<double> flat;  // canonical flattening, length = param_count

  std::size_t param_count() const { return flat.size(); }
};

struct Batch {
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;

  std::size_t size() const { return xs.size(); }
};

// Reparameterization noise for a VIB forward pass: one xi row of latent_dim
// standard normals per batch sample. Passing the draws explicitly keeps every
// operation a pure function that can be replayed (finite differences re-use
// the same noise on both sides of each perturbation).
struct VibNoise {
  int latent_dim = 0;
  std::vector<double> xi;  // k x latent_dim, row-major

  static VibNoise Draw(Rng& rng, std::size_t batch_size, int latent_dim);
  std::span<const double> row(std::size_t i) const {
    return {xi.data() + i * latent_dim, static_cast<std::size_t>(latent_dim)};
  }
};

// Zero-mean Gaussian weights with stddev 1/sqrt(fan_in); biases zero.
// Deterministic for a fixed spec.init_seed.
ModelParameters InitNetwork(const NetworkSpec& spec);

// Logits for a single input. The non-VIB overload throws if the network has
// a VIB layer; the xi overload requires latent_dim noise values.
std::vector<double> Forward(const ModelParameters& params,
                            std::span<const double> x);
std::vector<double> Forward(const ModelParameters& params,
                            std::span<const double> x,
                            std::span<const double> xi);

// Mean softmax cross-entropy over the batch, plus beta * mean KL when the
// network has a VIB layer, and its exact gradient.
struct LossGrad {
  double loss = 0.0;
  GradientVector grad;
};
LossGrad LossAndGradient(const ModelParameters& params, const Batch& batch);
LossGrad LossAndGradient(const ModelParameters& params, const Batch& batch,
                         const VibNoise& noise);

// Element i is the exact gradient of the loss on sample i alone. The batch
// gradient equals the arithmetic mean of these.
std::vector<GradientVector> PerSampleGradients(const ModelParameters& params,
                                               const Batch& batch);
std::vector<GradientVector> PerSampleGradients(const ModelParameters& params,
                                               const Batch& batch,
                                               const VibNoise& noise);

// d(sample loss)/dx for one sample; the hook gradient-space PGD loops need.
std::vector<double> InputGradient(const ModelParameters& params,
                                  std::span<const double> x, int y);
std::vector<double> InputGradient(const ModelParameters& params,
                                  std::span<const double> x, int y,
                                  std::span<const double> xi);

// params - lr * g under the canonical flattening.
ModelParameters SgdStep(const ModelParameters& params, const GradientVector& g,
                        double lr);

// Max over coordinates of |analytic - central difference| / max(|g_i|, 1e-8).
// For VIB networks the same noise is replayed on every loss evaluation.
double FiniteDifferenceCheck(const ModelParameters& params, const Batch& batch,
                             double step,
                             const VibNoise* noise = nullptr);

}  // namespace gradlab::nn

#endif  // GRADLAB_NN_HPP_
