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

// Per-attribute privacy audit: a two-hypothesis game on one record whose
// designated attribute either stays (H0) or is re-drawn (H1), an empirical
// privacy-loss estimate from the induced test-statistic distributions, and
// gradient-space canary crafting that maximizes hypothesis separation.

#ifndef GRADLAB_AUDIT_HPP_
#define GRADLAB_AUDIT_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gradlab/nn.hpp"
#include "gradlab/rng.hpp"

namespace gradlab::audit {

// Where the audited attribute lives inside the feature vector. One-hot
// attributes occupy num_values consecutive slots starting at slot_begin;
// scalar attributes hold the value index in the single slot_begin slot.
// The record label is part of the record and never flipped or crafted.
struct AttributeSpec {
  int slot_begin = 0;
  int num_values = 2;
  bool one_hot = true;
  int label = 0;

  void Validate() const;  // throws unless num_values >= 2, slots in range
  int slot_count() const { return one_hot ? num_values : 1; }
  // Writes the encoding of `value` into the attribute slots of x.
  void Encode(std::span<double> x, int value) const;
};

// The audited record: full feature vector (attribute slots included), its
// designated attribute value, and the crafting trace that produced it.
struct CanaryRecord {
  std::vector<double> z;
  int attribute_value = 0;
  int label = 0;

  std::string distance = "mse";
  int iters = 0;
  double step = 0.0;
  // Best separation value visited during crafting; z is that iterate.
  double objective = 0.0;
  // Diagnostic: fraction of raw optimizer steps that did not decrease the
  // objective. Fixed-step Adam oscillates once it reaches the clipping
  // ridge, so long runs sit well below 1; the returned record is the best
  // visited iterate, not the last one.
  double nondecreasing_fraction = 1.0;
};

struct AuditConfig {
  double clip = 2.0;
  double sigma = 0.1;
  double delta = 1e-5;
  // Trials per hypothesis; the game runs 2 * trials times with a fresh
  // uniform private bit each time.
  int trials = 5000;
  // Multiplier on clip when quoting the analytic epsilon. Two clipped
  // gradients can differ by up to 2 * clip; the quoted bound treats clip
  // itself as the per-attribute sensitivity, and this factor lets a caller
  // evaluate the stricter variant without changing the mechanism.
  double sensitivity_factor = 1.0;
  AttributeSpec attribute;
  std::uint64_t seed = 0;

  void Validate() const;  // trials >= 100, delta in (0, 1), clip > 0, sigma >= 0
};

// Test statistics t = l2(noisy released gradient - clipped H0 gradient),
// partitioned by the true private bit.
struct AuditSamples {
  std::vector<double> h0;
  std::vector<double> h1;
};

// Runs the audit game 2 * config.trials times at fixed parameters: flip a
// uniform bit, re-draw the attribute uniformly from the other values when
// the bit is set, release the clipped single-record gradient plus Gaussian
// noise, and record the test statistic under the true bit.
AuditSamples RunAuditGame(const CanaryRecord& record,
                          const nn::ModelParameters& theta,
                          const AuditConfig& config);

struct EpsilonEstimate {
  double eps_hat = 0.0;
  double lo = 0.0;    // conservative 95% interval; hi may be +infinity
  double hi = 0.0;
  double critical_value = 0.0;
  bool reject_above = true;  // decision rule direction at the chosen cutoff
  double fpr = 0.0;          // observed rates at the chosen cutoff
  double fnr = 0.0;
  // Perfect separation at the chosen cutoff: the point estimate is then a
  // floored stand-in for an unbounded one.
  bool degenerate = false;
};

// Sweeps the decision cutoff over all midpoints of the pooled statistics
// (both rejection directions) and keeps the cutoff maximizing
// max(log((1-delta-FPR)/FNR), log((1-delta-FNR)/FPR)). Observed zero rates
// are floored at their Clopper-Pearson 95% upper bound before the logs;
// nonpositive numerators contribute zero. The interval propagates the
// per-rate Clopper-Pearson bounds through the same formula, widest-first.
EpsilonEstimate EmpiricalEpsilon(std::span<const double> h0,
                                 std::span<const double> h1, double delta);

enum class CanaryDistance { kMse, kCosine };

struct CanaryCraftConfig {
  CanaryDistance distance = CanaryDistance::kMse;
  int iters = 2000;
  double step = 5e-2;
  // H1 pins the attribute to this value while crafting; the game itself
  // re-draws uniformly.
  int hypothesis_value = 1;
  std::uint64_t seed = 0;
};

// Ascends Dist(clipped H0 gradient, clipped H1 gradient) over the
// non-attribute feature slots with Adam on central finite differences,
// starting from a standard-normal record, and returns the best iterate
// visited. iters = 0 returns the initialization. Throws std::runtime_error
// naming the iteration if the objective turns non-finite.
CanaryRecord CraftCanary(const nn::ModelParameters& theta,
                         const AttributeSpec& attribute, int attribute_value,
                         double clip, const CanaryCraftConfig& config);

// One emitted audit row: mechanism parameters, the analytic epsilon for the
// quoted sensitivity, the empirical estimate, and the analytic-to-empirical
// ratio normalized by the attribute count (the per-attribute view of the
// gap). A zero empirical estimate makes the ratio meaningless; the row is
// then flagged indistinguishable.
struct AuditRow {
  double clip = 0.0;
  double sigma = 0.0;
  double delta = 0.0;
  double analytic_eps = 0.0;
  EpsilonEstimate estimate;
  int n_attributes = 1;
  double normalized_ratio = 0.0;
  bool indistinguishable = false;
};

AuditRow AuditReport(const EpsilonEstimate& estimate, const AuditConfig& config,
                     int n_attributes);

// Mean of the chi distribution with n degrees of freedom scaled by sigma:
// the exact H0 statistic mean, sigma * sqrt(2) * Gamma((n+1)/2) / Gamma(n/2).
double ChiMean(int n, double sigma);

}  // namespace gradlab::audit

#endif  // GRADLAB_AUDIT_HPP_
