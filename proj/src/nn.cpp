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

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gradlab::nn {
namespace {

// Stable log(sum(exp(z))).
double LogSumExp(std::span<const double> z) {
  double m = z[0];
  for (const double v : z) m = std::max(m, v);
  double s = 0.0;
  for (const double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

struct ForwardTrace {
  // activations[l] is the input to layer l; activations.back() is the final
  // linear output (logits).
  std::vector<std::vector<double>> activations;
  // VIB only:
  std::vector<double> mu, logvar, sigma, latent;
};

void ApplyLayer(const ModelParameters& params, const LayerShape& layer,
                std::span<const double> in, std::vector<double>& out,
                bool apply_relu) {
  out.assign(layer.out, 0.0);
  const double* w = params.flat.data() + layer.w_offset;
  const double* b = params.flat.data() + layer.b_offset;
  for (int j = 0; j < layer.out; ++j) {
    double acc = b[j];
    const double* row = w + static_cast<std::size_t>(j) * layer.in;
    for (int i = 0; i < layer.in; ++i) acc += row[i] * in[i];
    out[j] = apply_relu && acc < 0.0 ? 0.0 : acc;
  }
}

// Runs the network on one sample, recording the activations backprop needs.
ForwardTrace TraceForward(const ModelParameters& params, const ModelShape& shape,
                          std::span<const double> x,
                          std::span<const double> xi) {
  if (static_cast<int>(x.size()) != params.spec.input_dim())
    throw std::invalid_argument("Forward: input has dimension " +
                                std::to_string(x.size()) + ", network expects " +
                                std::to_string(params.spec.input_dim()));
  ForwardTrace t;
  t.activations.emplace_back(x.begin(), x.end());
  const auto& layers = shape.layers();
  if (!shape.has_vib()) {
    for (const auto& layer : layers) {
      std::vector<double> out;
      ApplyLayer(params, layer, t.activations.back(), out, layer.relu);
      t.activations.push_back(std::move(out));
    }
    return t;
  }
  const int latent = shape.latent_dim();
  if (static_cast<int>(xi.size()) != latent)
    throw std::invalid_argument("Forward: VIB network needs latent noise");
  // Hidden ReLU stack.
  for (std::size_t l = 0; l + 2 < layers.size(); ++l) {
    std::vector<double> out;
    ApplyLayer(params, layers[l], t.activations.back(), out, true);
    t.activations.push_back(std::move(out));
  }
  // Encoder head: rows [0, latent) are mu, [latent, 2*latent) are logvar.
  std::vector<double> head;
  ApplyLayer(params, layers[shape.encoder_layer()], t.activations.back(), head,
             false);
  t.mu.assign(head.begin(), head.begin() + latent);
  t.logvar.assign(head.begin() + latent, head.end());
  t.sigma.resize(latent);
  t.latent.resize(latent);
  for (int j = 0; j < latent; ++j) {
    t.sigma[j] = std::exp(0.5 * t.logvar[j]);
    t.latent[j] = t.mu[j] + t.sigma[j] * xi[j];
  }
  t.activations.push_back(t.latent);
  std::vector<double> logits;
  ApplyLayer(params, layers.back(), t.activations.back(), logits, false);
  t.activations.push_back(std::move(logits));
  return t;
}

// delta = dLoss/d(layer output); accumulates this layer's parameter gradient
// into `grad` and returns dLoss/d(layer input).
std::vector<double> BackpropLayer(const ModelParameters& params,
                                  const LayerShape& layer,
                                  std::span<const double> in,
                                  std::span<const double> out,
                                  std::vector<double> delta,
                                  std::vector<double>& grad) {
  // ReLU: zero the deltas of inactive units (output stored post-activation).
  if (layer.relu)
    for (int j = 0; j < layer.out; ++j)
      if (out[j] <= 0.0) delta[j] = 0.0;
  double* gw = grad.data() + layer.w_offset;
  double* gb = grad.data() + layer.b_offset;
  const double* w = params.flat.data() + layer.w_offset;
  std::vector<double> din(layer.in, 0.0);
  for (int j = 0; j < layer.out; ++j) {
    const double d = delta[j];
    if (d == 0.0) continue;
    gb[j] += d;
    double* grow = gw + static_cast<std::size_t>(j) * layer.in;
    const double* wrow = w + static_cast<std::size_t>(j) * layer.in;
    for (int i = 0; i < layer.in; ++i) {
      grow[i] += d * in[i];
      din[i] += d * wrow[i];
    }
  }
  return din;
}

// Loss of one sample and its gradient contribution (accumulated into `grad`
// unscaled; callers divide by the batch size). When dx is non-null it receives
// the loss gradient with respect to the input features.
double SampleLossAndAccumulate(const ModelParameters& params,
                               const ModelShape& shape,
                               std::span<const double> x, int y,
                               std::span<const double> xi,
                               std::vector<double>* grad,
                               std::vector<double>* dx = nullptr) {
  const int classes = params.spec.output_dim();
  if (y < 0 || y >= classes)
    throw std::invalid_argument("label " + std::to_string(y) +
                                " out of range for " + std::to_string(classes) +
                                " classes");
  ForwardTrace t = TraceForward(params, shape, x, xi);
  const auto& logits = t.activations.back();
  const double lse = LogSumExp(logits);
  double loss = lse - logits[y];

  const auto& layers = shape.layers();
  std::vector<double> delta(classes);
  for (int c = 0; c < classes; ++c)
    delta[c] = std::exp(logits[c] - lse) - (c == y ? 1.0 : 0.0);

  double kl = 0.0;
  if (shape.has_vib()) {
    const int latent = shape.latent_dim();
    const double beta = params.spec.vib->beta;
    for (int j = 0; j < latent; ++j) {
      const double var = t.sigma[j] * t.sigma[j];
      kl += 0.5 * (t.mu[j] * t.mu[j] + var - t.logvar[j] - 1.0);
    }
    loss += beta * kl;
    if (grad) {
      // Decoder.
      const std::size_t dec = layers.size() - 1;
      std::vector<double> dlatent = BackpropLayer(
          params, layers[dec], t.latent, t.activations.back(), delta, *grad);
      // Reparameterization + KL into the encoder head (mu rows, then logvar).
      std::vector<double> dhead(2 * latent);
      for (int j = 0; j < latent; ++j) {
        dhead[j] = dlatent[j] + beta * t.mu[j];
        dhead[latent + j] = dlatent[j] * 0.5 * t.sigma[j] * xi[j] +
                            beta * 0.5 * (t.sigma[j] * t.sigma[j] - 1.0);
      }
      // The encoder head has no ReLU, so its output span is never read.
      const std::size_t enc = shape.encoder_layer();
      std::vector<double> d =
          BackpropLayer(params, layers[enc], t.activations[enc],
                        std::span<const double>{}, std::move(dhead), *grad);
      for (std::size_t l = enc; l-- > 0;)
        d = BackpropLayer(params, layers[l], t.activations[l],
                          t.activations[l + 1], std::move(d), *grad);
      if (dx) *dx = std::move(d);
    }
    return loss;
  }
  if (grad) {
    std::vector<double> d = std::move(delta);
    for (std::size_t l = layers.size(); l-- > 0;)
      d = BackpropLayer(params, layers[l], t.activations[l],
                        t.activations[l + 1], std::move(d), *grad);
    if (dx) *dx = std::move(d);
  }
  return loss;
}

void CheckBatch(const ModelParameters& params, const Batch& batch) {
  if (batch.size() == 0) throw std::invalid_argument("empty batch");
  if (batch.xs.size() != batch.ys.size())
    throw std::invalid_argument("batch xs/ys size mismatch");
  for (const auto& x : batch.xs)
    if (static_cast<int>(x.size()) != params.spec.input_dim())
      throw std::invalid_argument("batch feature dimension mismatch");
}

const VibNoise& RequireNoise(const ModelParameters& params, const Batch& batch,
                             const VibNoise& noise) {
  const int latent = params.spec.vib ? params.spec.vib->latent_dim : 0;
  if (noise.latent_dim != latent ||
      noise.xi.size() != batch.size() * static_cast<std::size_t>(latent))
    throw std::invalid_argument("VibNoise shape does not match batch");
  return noise;
}

double LossOnly(const ModelParameters& params, const ModelShape& shape,
                const Batch& batch, const VibNoise* noise) {
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    total += SampleLossAndAccumulate(
        params, shape, batch.xs[i], batch.ys[i],
        noise ? noise->row(i) : std::span<const double>{}, nullptr);
  return total / static_cast<double>(batch.size());
}

}  // namespace

void NetworkSpec::Validate() const {
  if (layer_widths.size() < 2)
    throw std::invalid_argument("NetworkSpec needs at least 2 widths");
  for (const int w : layer_widths)
    if (w < 1) throw std::invalid_argument("NetworkSpec widths must be >= 1");
  if (vib) {
    if (vib->latent_dim < 1)
      throw std::invalid_argument("VIB latent_dim must be >= 1");
    if (vib->beta < 0.0)
      throw std::invalid_argument("VIB beta must be nonnegative");
  }
}

ModelShape::ModelShape(const NetworkSpec& spec) {
  spec.Validate();
  has_vib_ = spec.vib.has_value();
  latent_dim_ = has_vib_ ? spec.vib->latent_dim : 0;
  const auto& w = spec.layer_widths;
  std::vector<std::pair<std::pair<int, int>, bool>> dims;  // ((in,out), relu)
  if (!has_vib_) {
    for (std::size_t l = 0; l + 1 < w.size(); ++l)
      dims.push_back({{w[l], w[l + 1]}, l + 2 < w.size()});
  } else {
    for (std::size_t l = 0; l + 2 < w.size(); ++l)
      dims.push_back({{w[l], w[l + 1]}, true});
    dims.push_back({{w[w.size() - 2], 2 * latent_dim_}, false});  // encoder head
    dims.push_back({{latent_dim_, w.back()}, false});             // decoder
  }
  std::size_t offset = 0;
  for (const auto& [d, relu] : dims) {
    LayerShape layer;
    layer.in = d.first;
    layer.out = d.second;
    layer.relu = relu;
    layer.w_offset = offset;
    offset += static_cast<std::size_t>(layer.in) * layer.out;
    layer.b_offset = offset;
    offset += layer.out;
    layers_.push_back(layer);
  }
  param_count_ = offset;
}

VibNoise VibNoise::Draw(Rng& rng, std::size_t batch_size, int latent_dim) {
  VibNoise noise;
  noise.latent_dim = latent_dim;
  noise.xi.resize(batch_size * static_cast<std::size_t>(latent_dim));
  for (double& v : noise.xi) v = rng.Normal();
  return noise;
}

ModelParameters InitNetwork(const NetworkSpec& spec) {
  const ModelShape shape(spec);
  ModelParameters params;
  params.spec = spec;
  params.flat.assign(shape.param_count(), 0.0);
  Rng rng = Rng(spec.init_seed).Derive("init");
  for (const auto& layer : shape.layers()) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.in));
    double* w = params.flat.data() + layer.w_offset;
    const std::size_t count = static_cast<std::size_t>(layer.in) * layer.out;
    for (std::size_t i = 0; i < count; ++i) w[i] = scale * rng.Normal();
    // biases stay zero
  }
  return params;
}

std::vector<double> Forward(const ModelParameters& params,
                            std::span<const double> x) {
  if (params.spec.vib)
    throw std::invalid_argument("Forward: VIB network needs latent noise");
  const ModelShape shape(params.spec);
  return TraceForward(params, shape, x, {}).activations.back();
}

std::vector<double> Forward(const ModelParameters& params,
                            std::span<const double> x,
                            std::span<const double> xi) {
  const ModelShape shape(params.spec);
  return TraceForward(params, shape, x, xi).activations.back();
}

static LossGrad LossAndGradientImpl(const ModelParameters& params,
                                    const Batch& batch, const VibNoise* noise) {
  CheckBatch(params, batch);
  const ModelShape shape(params.spec);
  LossGrad out;
  out.grad.assign(shape.param_count(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    total += SampleLossAndAccumulate(
        params, shape, batch.xs[i], batch.ys[i],
        noise ? noise->row(i) : std::span<const double>{}, &out.grad);
  const double inv_k = 1.0 / static_cast<double>(batch.size());
  out.loss = total * inv_k;
  for (double& g : out.grad) g *= inv_k;
  return out;
}

LossGrad LossAndGradient(const ModelParameters& params, const Batch& batch) {
  if (params.spec.vib)
    throw std::invalid_argument("LossAndGradient: VIB network needs noise");
  return LossAndGradientImpl(params, batch, nullptr);
}

LossGrad LossAndGradient(const ModelParameters& params, const Batch& batch,
                         const VibNoise& noise) {
  CheckBatch(params, batch);
  return LossAndGradientImpl(params, batch, &RequireNoise(params, batch, noise));
}

static std::vector<GradientVector> PerSampleImpl(const ModelParameters& params,
                                                 const Batch& batch,
                                                 const VibNoise* noise) {
  CheckBatch(params, batch);
  const ModelShape shape(params.spec);
  std::vector<GradientVector> grads;
  grads.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    GradientVector g(shape.param_count(), 0.0);
    SampleLossAndAccumulate(params, shape, batch.xs[i], batch.ys[i],
                            noise ? noise->row(i) : std::span<const double>{},
                            &g);
    grads.push_back(std::move(g));
  }
  return grads;
}

std::vector<GradientVector> PerSampleGradients(const ModelParameters& params,
                                               const Batch& batch) {
  if (params.spec.vib)
    throw std::invalid_argument("PerSampleGradients: VIB network needs noise");
  return PerSampleImpl(params, batch, nullptr);
}

std::vector<GradientVector> PerSampleGradients(const ModelParameters& params,
                                               const Batch& batch,
                                               const VibNoise& noise) {
  CheckBatch(params, batch);
  return PerSampleImpl(params, batch, &RequireNoise(params, batch, noise));
}

std::vector<double> InputGradient(const ModelParameters& params,
                                  std::span<const double> x, int y,
                                  std::span<const double> xi) {
  const ModelShape shape(params.spec);
  std::vector<double> scratch(shape.param_count(), 0.0);
  std::vector<double> dx;
  SampleLossAndAccumulate(params, shape, x, y, xi, &scratch, &dx);
  return dx;
}

std::vector<double> InputGradient(const ModelParameters& params,
                                  std::span<const double> x, int y) {
  if (params.spec.vib)
    throw std::invalid_argument("InputGradient: VIB network needs noise");
  return InputGradient(params, x, y, {});
}

ModelParameters SgdStep(const ModelParameters& params, const GradientVector& g,
                        double lr) {
  if (g.size() != params.flat.size())
    throw std::invalid_argument("SgdStep: gradient length mismatch");
  ModelParameters next = params;
  for (std::size_t i = 0; i < g.size(); ++i) next.flat[i] -= lr * g[i];
  return next;
}

double FiniteDifferenceCheck(const ModelParameters& params, const Batch& batch,
                             double step, const VibNoise* noise) {
  if (step <= 0.0) throw std::invalid_argument("step must be positive");
  CheckBatch(params, batch);
  const ModelShape shape(params.spec);
  if (shape.has_vib() && noise == nullptr)
    throw std::invalid_argument("FiniteDifferenceCheck: VIB network needs noise");
  if (noise != nullptr) RequireNoise(params, batch, *noise);
  const LossGrad analytic = LossAndGradientImpl(params, batch, noise);
  ModelParameters probe = params;
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.flat.size(); ++i) {
    const double original = probe.flat[i];
    probe.flat[i] = original + step;
    const double loss_plus = LossOnly(probe, shape, batch, noise);
    probe.flat[i] = original - step;
    const double loss_minus = LossOnly(probe, shape, batch, noise);
    probe.flat[i] = original;
    const double fd = (loss_plus - loss_minus) / (2.0 * step);
    const double denom = std::max(std::abs(analytic.grad[i]), 1e-8);
    worst = std::max(worst, std::abs(fd - analytic.grad[i]) / denom);
  }
  return worst;
}

}  // namespace gradlab::nn
