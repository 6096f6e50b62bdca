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

#include "gradlab/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "gradlab/optim.hpp"
#include "gradlab/rng.hpp"

namespace gradlab::estimators {
namespace {

std::vector<double> Softmax(std::vector<double> logits) {
  double m = logits[0];
  for (const double v : logits) m = std::max(m, v);
  double total = 0.0;
  for (double& v : logits) {
    v = std::exp(v - m);
    total += v;
  }
  for (double& v : logits) v /= total;
  return logits;
}

}  // namespace

EstimatorKind EstimatorKindFromName(const std::string& name) {
  if (name == "logistic") return EstimatorKind::kLogistic;
  if (name == "mlp") return EstimatorKind::kMlp;
  throw std::invalid_argument("unknown estimator kind: " + name);
}

const char* EstimatorKindName(EstimatorKind kind) {
  return kind == EstimatorKind::kLogistic ? "logistic" : "mlp";
}

int ArgmaxLowest(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<int>(best);
}

std::vector<double> Estimator::Standardize(std::span<const double> x) const {
  if (x.size() != mean_.size())
    throw std::invalid_argument("estimator input dimension mismatch");
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    z[i] = (x[i] - mean_[i]) * inv_std_[i];
  return z;
}

Estimator Estimator::Train(const std::vector<std::vector<double>>& xs,
                           const std::vector<int>& ys, int num_classes,
                           const TrainConfig& config) {
  if (xs.empty() || xs.size() != ys.size())
    throw std::invalid_argument("training set empty or ragged");
  if (num_classes < 2) throw std::invalid_argument("need >= 2 classes");
  const std::size_t n = xs.size();
  const int dim = static_cast<int>(xs[0].size());
  std::set<int> present;
  for (const int y : ys) {
    if (y < 0 || y >= num_classes)
      throw std::invalid_argument("training label out of range");
    present.insert(y);
  }
  if (present.size() < 2)
    throw std::invalid_argument("training set contains a single class");

  Estimator est;
  est.mean_.assign(dim, 0.0);
  est.inv_std_.assign(dim, 0.0);
  for (const auto& x : xs) {
    if (static_cast<int>(x.size()) != dim)
      throw std::invalid_argument("ragged training features");
    for (int c = 0; c < dim; ++c) est.mean_[c] += x[c];
  }
  for (double& m : est.mean_) m /= static_cast<double>(n);
  for (const auto& x : xs)
    for (int c = 0; c < dim; ++c) {
      const double d = x[c] - est.mean_[c];
      est.inv_std_[c] += d * d;
    }
  for (double& v : est.inv_std_)
    v = 1.0 / std::max(std::sqrt(v / static_cast<double>(n)), 1e-8);

  nn::NetworkSpec spec;
  spec.init_seed = config.seed;
  if (config.kind == EstimatorKind::kLogistic) {
    spec.layer_widths = {dim, num_classes};
  } else {
    if (config.hidden < 1) throw std::invalid_argument("hidden width must be >= 1");
    spec.layer_widths = {dim, config.hidden, num_classes};
  }
  est.params_ = nn::InitNetwork(spec);
  if (config.kind == EstimatorKind::kLogistic)
    std::fill(est.params_.flat.begin(), est.params_.flat.end(), 0.0);

  std::vector<std::vector<double>> standardized;
  standardized.reserve(n);
  for (const auto& x : xs) standardized.push_back(est.Standardize(x));

  optim::Adam adam(est.params_.flat.size(), config.lr);
  Rng shuffle_rng = Rng(config.seed).Derive("estimator-shuffle");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  const int batch_size = std::max(1, config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.UniformInt(static_cast<int>(i))]);
    for (std::size_t begin = 0; begin < n; begin += batch_size) {
      const std::size_t end = std::min(begin + batch_size, n);
      nn::Batch batch;
      for (std::size_t i = begin; i < end; ++i) {
        batch.xs.push_back(standardized[order[i]]);
        batch.ys.push_back(ys[order[i]]);
      }
      nn::LossGrad lg = nn::LossAndGradient(est.params_, batch);
      if (config.weight_decay > 0.0)
        for (std::size_t i = 0; i < lg.grad.size(); ++i)
          lg.grad[i] += config.weight_decay * est.params_.flat[i];
      adam.Step(est.params_.flat, lg.grad);
    }
  }
  return est;
}

std::vector<double> Estimator::Posterior(std::span<const double> x) const {
  return Softmax(nn::Forward(params_, Standardize(x)));
}

int Estimator::Predict(std::span<const double> x) const {
  return ArgmaxLowest(Posterior(x));
}

std::vector<double> Estimator::InputGradient(std::span<const double> x,
                                             int label) const {
  const std::vector<double> dz =
      nn::InputGradient(params_, Standardize(x), label);
  std::vector<double> dx(dz.size());
  for (std::size_t i = 0; i < dz.size(); ++i) dx[i] = dz[i] * inv_std_[i];
  return dx;
}

}  // namespace gradlab::estimators
