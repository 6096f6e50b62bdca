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

#include "gradlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gradlab::analysis {
namespace {

constexpr double kLn2 = 0.6931471805599453;
constexpr double kLogFloor = 1e-12;

void CheckDistribution(std::span<const double> p, const char* what) {
  if (p.empty()) throw std::invalid_argument(std::string(what) + " is empty");
  double total = 0.0;
  for (const double v : p) {
    if (v < 0.0 || !std::isfinite(v))
      throw std::invalid_argument(std::string(what) + " has invalid mass");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument(std::string(what) + " does not sum to 1");
}

}  // namespace

void DiscreteChannel::Validate() const {
  CheckDistribution(prior, "prior");
  if (conditional.size() != prior.size())
    throw std::invalid_argument("conditional rows must match prior size");
  for (const auto& row : conditional) {
    if (row.size() != conditional[0].size())
      throw std::invalid_argument("ragged conditional matrix");
    CheckDistribution(row, "conditional row");
  }
}

double Entropy(std::span<const double> p) {
  CheckDistribution(p, "distribution");
  double h = 0.0;
  for (const double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double BinaryEntropy(double e) {
  if (e < 0.0 || e > 1.0)
    throw std::invalid_argument("binary entropy argument must lie in [0, 1]");
  double h = 0.0;
  if (e > 0.0) h -= e * std::log(e);
  if (e < 1.0) h -= (1.0 - e) * std::log(1.0 - e);
  return h;
}

double MutualInformationExact(const DiscreteChannel& channel) {
  channel.Validate();
  const int nx = channel.input_size();
  const int ny = channel.output_size();
  std::vector<double> marginal(ny, 0.0);
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y)
      marginal[y] += channel.prior[x] * channel.conditional[x][y];
  double mi = 0.0;
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y) {
      const double joint = channel.prior[x] * channel.conditional[x][y];
      if (joint > 0.0)
        mi += joint * std::log(joint / (channel.prior[x] * marginal[y]));
    }
  return std::max(mi, 0.0);
}

double BayesError(const DiscreteChannel& channel) {
  channel.Validate();
  const int nx = channel.input_size();
  const int ny = channel.output_size();
  double accuracy = 0.0;
  for (int y = 0; y < ny; ++y) {
    double best = 0.0;
    for (int x = 0; x < nx; ++x)
      best = std::max(best, channel.prior[x] * channel.conditional[x][y]);
    accuracy += best;
  }
  return 1.0 - accuracy;
}

double FanoErrorLowerBound(double h_x, double mi, int m) {
  if (m < 1) throw std::invalid_argument("alphabet size must be >= 1");
  if (m <= 2) {
    const double h_cond = std::clamp(h_x - mi, 0.0, kLn2);
    return FanoBinaryNumeric(h_cond);
  }
  const double raw = (h_x - mi - kLn2) / std::log(static_cast<double>(m - 1));
  return std::max(raw, 0.0);
}

double FanoBinaryNumeric(double h_x_given_y) {
  if (h_x_given_y < 0.0 || h_x_given_y > kLn2 + 1e-12)
    throw std::invalid_argument("conditional entropy must lie in [0, ln 2]");
  if (h_x_given_y <= 0.0) return 0.0;
  double lo = 0.0, hi = 0.5;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (BinaryEntropy(mid) >= h_x_given_y)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

double AdvantageUpperBound(double h_a, double mi, int m, double p_star) {
  if (m <= 2)
    throw std::invalid_argument("advantage bound needs alphabet size > 2");
  if (p_star < 0.0 || p_star >= 1.0)
    throw std::invalid_argument("baseline rate must lie in [0, 1)");
  const double raw = 1.0 - (h_a - mi - kLn2) /
                               ((1.0 - p_star) * std::log(static_cast<double>(m - 1)));
  return std::clamp(raw, 0.0, 1.0);
}

double GaussianCapacityBound(double p_power, double sigma, bool classical) {
  if (p_power < 0.0) throw std::invalid_argument("power must be >= 0");
  if (sigma <= 0.0) throw std::invalid_argument("sigma must be > 0");
  const double denom = classical ? sigma * sigma : sigma;
  return 0.5 * std::log1p(p_power / denom);
}

double MiProxyFromPosteriors(const std::vector<std::vector<double>>& posteriors,
                             std::span<const int> labels,
                             std::span<const double> prior) {
  if (posteriors.empty() || posteriors.size() != labels.size())
    throw std::invalid_argument("posteriors/labels size mismatch or empty");
  const double h_prior = Entropy(prior);
  double ce = 0.0;
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= static_cast<int>(posteriors[i].size()))
      throw std::invalid_argument("label outside posterior support");
    ce -= std::log(std::max(posteriors[i][y], kLogFloor));
  }
  ce /= static_cast<double>(posteriors.size());
  return std::max(h_prior - ce, 0.0);
}

}  // namespace gradlab::analysis
