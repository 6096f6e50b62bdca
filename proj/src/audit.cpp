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

#include "gradlab/audit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "gradlab/defenses.hpp"
#include "gradlab/metrics.hpp"

namespace gradlab::audit {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double L2Norm(std::span<const double> v) {
  double s = 0.0;
  for (const double x : v) s += x * x;
  return std::sqrt(s);
}

// g / max(1, l2(g) / clip).
nn::GradientVector ClipGradient(nn::GradientVector g, double clip) {
  const double norm = L2Norm(g);
  if (norm > clip) {
    const double scale = clip / norm;
    for (double& x : g) x *= scale;
  }
  return g;
}

nn::GradientVector RecordGradient(const nn::ModelParameters& theta,
                                  const std::vector<double>& z, int label,
                                  double clip) {
  nn::Batch batch;
  batch.xs.push_back(z);
  batch.ys.push_back(label);
  return ClipGradient(nn::LossAndGradient(theta, batch).grad, clip);
}

double Distance(CanaryDistance kind, std::span<const double> g0,
                std::span<const double> g1) {
  if (kind == CanaryDistance::kMse) {
    double s = 0.0;
    for (std::size_t i = 0; i < g0.size(); ++i) {
      const double d = g0[i] - g1[i];
      s += d * d;
    }
    return s / static_cast<double>(g0.size());
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < g0.size(); ++i) dot += g0[i] * g1[i];
  return 1.0 - dot / std::max(L2Norm(g0) * L2Norm(g1), 1e-12);
}

// One epsilon formula evaluation with the documented edge handling: nonpositive
// numerators contribute zero, zero denominators with a positive numerator
// are unbounded.
double EpsilonTerm(double numerator_rate, double denominator_rate,
                   double delta) {
  const double numerator = 1.0 - delta - numerator_rate;
  if (numerator <= 0.0) return 0.0;
  if (denominator_rate <= 0.0) return kInf;
  return std::log(numerator / denominator_rate);
}

double EpsilonFormula(double fpr, double fnr, double delta) {
  return std::max(EpsilonTerm(fpr, fnr, delta), EpsilonTerm(fnr, fpr, delta));
}

}  // namespace

void AttributeSpec::Validate() const {
  if (num_values < 2)
    throw std::invalid_argument("audited attributes need at least two values");
  if (slot_begin < 0)
    throw std::invalid_argument("attribute slot_begin must be >= 0");
  if (label < 0) throw std::invalid_argument("record label must be >= 0");
}

void AttributeSpec::Encode(std::span<double> x, int value) const {
  if (value < 0 || value >= num_values)
    throw std::invalid_argument("attribute value outside its alphabet");
  if (slot_begin + slot_count() > static_cast<int>(x.size()))
    throw std::invalid_argument("attribute slots exceed the feature vector");
  if (one_hot) {
    for (int j = 0; j < num_values; ++j) x[slot_begin + j] = 0.0;
    x[slot_begin + value] = 1.0;
  } else {
    x[slot_begin] = static_cast<double>(value);
  }
}

void AuditConfig::Validate() const {
  attribute.Validate();
  if (clip <= 0.0) throw std::invalid_argument("clip must be > 0");
  if (sigma < 0.0) throw std::invalid_argument("sigma must be >= 0");
  if (delta <= 0.0 || delta >= 1.0)
    throw std::invalid_argument("delta must lie in (0, 1)");
  if (trials < 100)
    throw std::invalid_argument("audits need at least 100 trials per hypothesis");
  if (sensitivity_factor <= 0.0)
    throw std::invalid_argument("sensitivity_factor must be > 0");
}

AuditSamples RunAuditGame(const CanaryRecord& record,
                          const nn::ModelParameters& theta,
                          const AuditConfig& config) {
  config.Validate();
  const AttributeSpec& attribute = config.attribute;
  if (static_cast<int>(record.z.size()) != theta.spec.input_dim())
    throw std::invalid_argument("record width does not match the network");
  if (record.attribute_value < 0 ||
      record.attribute_value >= attribute.num_values)
    throw std::invalid_argument("record attribute value outside its alphabet");

  std::vector<double> z0 = record.z;
  attribute.Encode(z0, record.attribute_value);
  const nn::GradientVector g_h0 =
      RecordGradient(theta, z0, record.label, config.clip);

  AuditSamples samples;
  const Rng root = Rng(config.seed).Derive("audit-trial");
  const int total = 2 * config.trials;
  for (int t = 0; t < total; ++t) {
    const Rng trial = root.Derive(static_cast<std::uint64_t>(t));
    Rng bit_rng = trial.Derive("bit");
    const int b = bit_rng.UniformInt(2);
    std::vector<double> z = z0;
    if (b == 1) {
      Rng flip_rng = trial.Derive("flip");
      int value = flip_rng.UniformInt(attribute.num_values - 1);
      if (value >= record.attribute_value) ++value;
      attribute.Encode(z, value);
    }
    nn::GradientVector released =
        RecordGradient(theta, z, record.label, config.clip);
    Rng noise_rng = trial.Derive("noise");
    double stat = 0.0;
    for (std::size_t i = 0; i < released.size(); ++i) {
      const double noisy = released[i] + config.sigma * noise_rng.Normal();
      const double d = noisy - g_h0[i];
      stat += d * d;
    }
    stat = std::sqrt(stat);
    if (!std::isfinite(stat))
      throw std::runtime_error("non-finite audit statistic at trial " +
                               std::to_string(t));
    (b == 0 ? samples.h0 : samples.h1).push_back(stat);
  }
  return samples;
}

EpsilonEstimate EmpiricalEpsilon(std::span<const double> h0,
                                 std::span<const double> h1, double delta) {
  if (h0.empty() || h1.empty())
    throw std::invalid_argument("both hypothesis sample sets must be nonempty");
  if (delta < 0.0 || delta >= 1.0)
    throw std::invalid_argument("delta must lie in [0, 1)");
  std::vector<double> s0(h0.begin(), h0.end());
  std::vector<double> s1(h1.begin(), h1.end());
  std::sort(s0.begin(), s0.end());
  std::sort(s1.begin(), s1.end());
  const int n0 = static_cast<int>(s0.size());
  const int n1 = static_cast<int>(s1.size());

  std::vector<double> pooled;
  pooled.reserve(s0.size() + s1.size());
  pooled.insert(pooled.end(), s0.begin(), s0.end());
  pooled.insert(pooled.end(), s1.begin(), s1.end());
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> cutoffs;
  cutoffs.push_back(pooled.front() - 1.0);
  for (std::size_t i = 0; i + 1 < pooled.size(); ++i)
    if (pooled[i] < pooled[i + 1])
      cutoffs.push_back(0.5 * (pooled[i] + pooled[i + 1]));
  cutoffs.push_back(pooled.back() + 1.0);

  const auto count_above = [](const std::vector<double>& v, double c) {
    return static_cast<int>(v.end() -
                            std::upper_bound(v.begin(), v.end(), c));
  };
  const auto count_below = [](const std::vector<double>& v, double c) {
    return static_cast<int>(std::lower_bound(v.begin(), v.end(), c) -
                            v.begin());
  };

  double best = -kInf;
  double best_c = cutoffs.front();
  bool best_above = true;
  int best_fp = n0;
  int best_fn = 0;
  for (const double c : cutoffs) {
    for (const bool above : {true, false}) {
      // Rejecting H0 above c: false positives are H0 samples above it,
      // false negatives H1 samples at or below it. The mirrored rule covers
      // statistics whose ordering is inverted.
      const int fp = above ? count_above(s0, c) : count_below(s0, c);
      const int fn = above ? n1 - count_above(s1, c) : n1 - count_below(s1, c);
      double fpr = static_cast<double>(fp) / n0;
      double fnr = static_cast<double>(fn) / n1;
      if (fp == 0) fpr = metrics::ClopperPearson(0, n0).second;
      if (fn == 0) fnr = metrics::ClopperPearson(0, n1).second;
      const double eps = EpsilonFormula(fpr, fnr, delta);
      if (eps > best + 1e-15) {
        best = eps;
        best_c = c;
        best_above = above;
        best_fp = fp;
        best_fn = fn;
      }
    }
  }

  EpsilonEstimate estimate;
  estimate.eps_hat = std::max(best, 0.0);
  estimate.critical_value = best_c;
  estimate.reject_above = best_above;
  estimate.fpr = static_cast<double>(best_fp) / n0;
  estimate.fnr = static_cast<double>(best_fn) / n1;
  estimate.degenerate = best_fp == 0 && best_fn == 0;

  const auto [fpr_lo, fpr_hi] = metrics::ClopperPearson(best_fp, n0);
  const auto [fnr_lo, fnr_hi] = metrics::ClopperPearson(best_fn, n1);
  const double hi = std::max(EpsilonTerm(fpr_lo, fnr_lo, delta),
                             EpsilonTerm(fnr_lo, fpr_lo, delta));
  const double lo = std::max({EpsilonTerm(fpr_hi, fnr_hi, delta),
                              EpsilonTerm(fnr_hi, fpr_hi, delta), 0.0});
  estimate.lo = std::min(lo, estimate.eps_hat);
  estimate.hi = std::max(hi, estimate.eps_hat);
  return estimate;
}

CanaryRecord CraftCanary(const nn::ModelParameters& theta,
                         const AttributeSpec& attribute, int attribute_value,
                         double clip, const CanaryCraftConfig& config) {
  attribute.Validate();
  if (clip <= 0.0) throw std::invalid_argument("clip must be > 0");
  if (config.iters < 0) throw std::invalid_argument("iters must be >= 0");
  if (config.step <= 0.0) throw std::invalid_argument("step must be > 0");
  if (attribute_value < 0 || attribute_value >= attribute.num_values)
    throw std::invalid_argument("attribute value outside its alphabet");
  if (config.hypothesis_value < 0 ||
      config.hypothesis_value >= attribute.num_values ||
      config.hypothesis_value == attribute_value)
    throw std::invalid_argument("hypothesis value must be a different value");
  const int dim = theta.spec.input_dim();
  if (attribute.slot_begin + attribute.slot_count() > dim)
    throw std::invalid_argument("attribute slots exceed the network input");

  const Rng root(config.seed);
  Rng init_rng = root.Derive("init");
  std::vector<double> z(dim);
  for (double& x : z) x = init_rng.Normal();

  std::vector<int> free_slots;
  for (int i = 0; i < dim; ++i)
    if (i < attribute.slot_begin ||
        i >= attribute.slot_begin + attribute.slot_count())
      free_slots.push_back(i);

  const auto objective = [&](const std::vector<double>& point) {
    std::vector<double> z0 = point;
    attribute.Encode(z0, attribute_value);
    std::vector<double> z1 = point;
    attribute.Encode(z1, config.hypothesis_value);
    const nn::GradientVector g0 =
        RecordGradient(theta, z0, attribute.label, clip);
    const nn::GradientVector g1 =
        RecordGradient(theta, z1, attribute.label, clip);
    return Distance(config.distance, g0, g1);
  };

  // Adam ascent on central finite differences over the free slots.
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kAdamEps = 1e-8;
  constexpr double kFdStep = 1e-4;
  std::vector<double> m(free_slots.size(), 0.0);
  std::vector<double> v(free_slots.size(), 0.0);
  double previous = objective(z);
  double best_value = previous;
  std::vector<double> best_z = z;
  int nondecreasing = 0;
  for (int iter = 1; iter <= config.iters; ++iter) {
    std::vector<double> grad(free_slots.size());
    for (std::size_t j = 0; j < free_slots.size(); ++j) {
      const int slot = free_slots[j];
      const double saved = z[slot];
      z[slot] = saved + kFdStep;
      const double up = objective(z);
      z[slot] = saved - kFdStep;
      const double down = objective(z);
      z[slot] = saved;
      grad[j] = (up - down) / (2.0 * kFdStep);
    }
    for (std::size_t j = 0; j < free_slots.size(); ++j) {
      m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * grad[j];
      v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * grad[j] * grad[j];
      const double m_hat = m[j] / (1.0 - std::pow(kBeta1, iter));
      const double v_hat = v[j] / (1.0 - std::pow(kBeta2, iter));
      z[free_slots[j]] += config.step * m_hat / (std::sqrt(v_hat) + kAdamEps);
    }
    const double current = objective(z);
    if (!std::isfinite(current))
      throw std::runtime_error("canary objective non-finite at iteration " +
                               std::to_string(iter));
    if (current >= previous - 1e-12) ++nondecreasing;
    if (current > best_value) {
      best_value = current;
      best_z = z;
    }
    previous = current;
  }

  CanaryRecord record;
  attribute.Encode(best_z, attribute_value);
  record.z = std::move(best_z);
  record.attribute_value = attribute_value;
  record.label = attribute.label;
  record.distance = config.distance == CanaryDistance::kMse ? "mse" : "cosine";
  record.iters = config.iters;
  record.step = config.step;
  record.objective = best_value;
  record.nondecreasing_fraction =
      config.iters == 0 ? 1.0
                        : static_cast<double>(nondecreasing) / config.iters;
  return record;
}

AuditRow AuditReport(const EpsilonEstimate& estimate, const AuditConfig& config,
                     int n_attributes) {
  config.Validate();
  if (n_attributes < 1)
    throw std::invalid_argument("n_attributes must be >= 1");
  AuditRow row;
  row.clip = config.clip;
  row.sigma = config.sigma;
  row.delta = config.delta;
  row.analytic_eps = defenses::TheoreticalEpsilon(
      config.clip * config.sensitivity_factor, config.sigma, config.delta);
  row.estimate = estimate;
  row.n_attributes = n_attributes;
  row.indistinguishable = estimate.eps_hat <= 0.0;
  row.normalized_ratio =
      row.indistinguishable
          ? 0.0
          : row.analytic_eps / (estimate.eps_hat * n_attributes);
  return row;
}

double ChiMean(int n, double sigma) {
  if (n < 1) throw std::invalid_argument("degrees of freedom must be >= 1");
  if (sigma < 0.0) throw std::invalid_argument("sigma must be >= 0");
  return sigma * std::sqrt(2.0) *
         std::exp(std::lgamma(0.5 * (n + 1)) - std::lgamma(0.5 * n));
}

}  // namespace gradlab::audit
