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

#ifndef GRADLAB_ESTIMATORS_HPP_
#define GRADLAB_ESTIMATORS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gradlab/nn.hpp"

namespace gradlab::estimators {

enum class EstimatorKind { kLogistic, kMlp };

EstimatorKind EstimatorKindFromName(const std::string& name);
const char* EstimatorKindName(EstimatorKind kind);

struct TrainConfig {
  EstimatorKind kind = EstimatorKind::kLogistic;
  int hidden = 100;      // MLP hidden width
  int epochs = 80;
  int batch_size = 64;
  double lr = 0.01;      // Adam
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
};

// Multiclass probabilistic classifier over real vectors, trained with Adam on
// standardized features. The logistic variant starts from zero weights (a
// convex problem with a deterministic optimum path); the MLP variant is a
// one-hidden-layer ReLU network. Exposes the input gradient of its own
// cross-entropy, which gradient-space PGD consumes.
class Estimator {
 public:
  static Estimator Train(const std::vector<std::vector<double>>& xs,
                         const std::vector<int>& ys, int num_classes,
                         const TrainConfig& config);

  std::vector<double> Posterior(std::span<const double> x) const;
  // Argmax of the posterior; ties break to the lowest index.
  int Predict(std::span<const double> x) const;
  // d CE(posterior(x), label) / dx in the original (unstandardized) space.
  std::vector<double> InputGradient(std::span<const double> x,
                                    int label) const;

  int num_classes() const { return params_.spec.output_dim(); }
  int input_dim() const { return params_.spec.input_dim(); }

 private:
  nn::ModelParameters params_;
  std::vector<double> mean_, inv_std_;

  std::vector<double> Standardize(std::span<const double> x) const;
};

// Argmax with lowest-index tie-break, shared by all posterior consumers.
int ArgmaxLowest(std::span<const double> v);

}  // namespace gradlab::estimators

#endif  // GRADLAB_ESTIMATORS_HPP_
