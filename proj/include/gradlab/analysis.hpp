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

#ifndef GRADLAB_ANALYSIS_HPP_
#define GRADLAB_ANALYSIS_HPP_

#include <span>
#include <vector>

namespace gradlab::analysis {

// All information quantities are in nats.

// Finite channel X -> Y given by a prior over X and a stochastic matrix
// P(Y|X). Small enough alphabets admit exact enumeration, which is what the
// bound-verification harness relies on.
struct DiscreteChannel {
  std::vector<double> prior;                     // P(X)
  std::vector<std::vector<double>> conditional;  // row x: P(Y | X = x)

  int input_size() const { return static_cast<int>(prior.size()); }
  int output_size() const {
    return conditional.empty() ? 0 : static_cast<int>(conditional[0].size());
  }
  // Throws std::invalid_argument unless prior and all rows are distributions
  // and shapes agree.
  void Validate() const;
};

// -sum p ln p with 0 ln 0 = 0. Throws if p is not a distribution.
double Entropy(std::span<const double> p);

// Binary entropy H2(e) in nats; e in [0, 1].
double BinaryEntropy(double e);

// Exact I(X;Y) by joint enumeration.
double MutualInformationExact(const DiscreteChannel& channel);

// Exact error of the Bayes-optimal predictor of X from Y.
double BayesError(const DiscreteChannel& channel);

// max(0, (h_x - mi - ln 2) / ln(m - 1)) for alphabet size m > 2. For m <= 2
// the denominator vanishes and the call routes to FanoBinaryNumeric on the
// conditional entropy h_x - mi.
double FanoErrorLowerBound(double h_x, double mi, int m);

// Smallest e in [0, 0.5] with H2(e) >= h_x_given_y, by bisection to 1e-10.
// Requires 0 <= h_x_given_y <= ln 2.
double FanoBinaryNumeric(double h_x_given_y);

// 1 - (h_a - mi - ln 2) / ((1 - p_star) * ln(m - 1)), clamped to [0, 1].
// Only defined for m > 2 (the underlying error bound is vacuous at m = 2).
double AdvantageUpperBound(double h_a, double mi, int m, double p_star);

// 0.5 * ln(1 + p_power / sigma). The source expression divides by sigma, not
// sigma^2; `classical` evaluates the textbook variant 0.5 * ln(1 + P/sigma^2)
// instead.
double GaussianCapacityBound(double p_power, double sigma,
                             bool classical = false);

// H(prior) minus the mean cross-entropy of the supplied posteriors on the
// labeled evaluation pairs, clamped at 0. A finite-sample estimator of the
// information the posteriors carry about the label, not a bound certificate.
double MiProxyFromPosteriors(const std::vector<std::vector<double>>& posteriors,
                             std::span<const int> labels,
                             std::span<const double> prior);

}  // namespace gradlab::analysis

#endif  // GRADLAB_ANALYSIS_HPP_
