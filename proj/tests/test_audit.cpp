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

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "gradlab/defenses.hpp"

namespace {

using gradlab::Rng;
namespace audit = gradlab::audit;
namespace defenses = gradlab::defenses;
namespace nn = gradlab::nn;

nn::ModelParameters SmallTheta(int input_dim, std::uint64_t seed) {
  nn::NetworkSpec spec;
  spec.layer_widths = {input_dim, 3, 2};
  spec.init_seed = seed;
  return nn::InitNetwork(spec);
}

audit::AttributeSpec OneHotTail(int input_dim, int m) {
  audit::AttributeSpec attribute;
  attribute.slot_begin = input_dim - m;
  attribute.num_values = m;
  attribute.one_hot = true;
  return attribute;
}

TEST_CASE("attribute encoding writes one-hot groups and scalars") {
  audit::AttributeSpec one_hot;
  one_hot.slot_begin = 2;
  one_hot.num_values = 3;
  std::vector<double> x(6, 9.0);
  one_hot.Encode(x, 1);
  CHECK(x == std::vector<double>{9.0, 9.0, 0.0, 1.0, 0.0, 9.0});

  audit::AttributeSpec scalar;
  scalar.slot_begin = 1;
  scalar.num_values = 4;
  scalar.one_hot = false;
  std::vector<double> y(3, 0.0);
  scalar.Encode(y, 3);
  CHECK(y == std::vector<double>{0.0, 3.0, 0.0});

  CHECK_THROWS_AS(one_hot.Encode(x, 3), std::invalid_argument);
  std::vector<double> too_short(3, 0.0);
  CHECK_THROWS_AS(one_hot.Encode(too_short, 0), std::invalid_argument);
  audit::AttributeSpec single;
  single.num_values = 1;
  CHECK_THROWS_AS(single.Validate(), std::invalid_argument);
}

TEST_CASE("empirical epsilon matches the hand-computed cutoff") {
  // H0: 95 low values and 5 high; H1: 10 low and 90 high. At the midpoint
  // FPR = 0.05 and FNR = 0.10, so with delta = 0 the estimate is
  // max(ln(0.95 / 0.10), ln(0.90 / 0.05)) = ln 18.
  std::vector<double> h0(95, 0.0);
  h0.insert(h0.end(), 5, 2.0);
  std::vector<double> h1(10, 0.0);
  h1.insert(h1.end(), 90, 2.0);
  const audit::EpsilonEstimate estimate = audit::EmpiricalEpsilon(h0, h1, 0.0);
  CHECK(estimate.eps_hat == doctest::Approx(std::log(18.0)).epsilon(1e-9));
  CHECK(estimate.reject_above);
  CHECK(estimate.fpr == doctest::Approx(0.05));
  CHECK(estimate.fnr == doctest::Approx(0.10));
  CHECK(estimate.critical_value == doctest::Approx(1.0));
  CHECK_FALSE(estimate.degenerate);
  CHECK(estimate.lo <= estimate.eps_hat);
  CHECK(estimate.hi >= estimate.eps_hat);

  // delta shrinks both numerators: max(ln(0.45/0.1), ln(0.40/0.05)) = ln 8.
  const audit::EpsilonEstimate damped = audit::EmpiricalEpsilon(h0, h1, 0.5);
  CHECK(damped.eps_hat == doctest::Approx(std::log(8.0)).epsilon(1e-9));
}

TEST_CASE("empirical epsilon is symmetric under hypothesis exchange") {
  std::vector<double> h0 = {0.1, 0.4, 0.5, 0.9, 1.3, 1.4};
  std::vector<double> h1 = {0.8, 1.1, 1.6, 2.0, 2.2, 2.7};
  const audit::EpsilonEstimate forward =
      audit::EmpiricalEpsilon(h0, h1, 1e-5);
  const audit::EpsilonEstimate swapped =
      audit::EmpiricalEpsilon(h1, h0, 1e-5);
  CHECK(forward.eps_hat == doctest::Approx(swapped.eps_hat).epsilon(1e-12));
  CHECK(forward.reject_above != swapped.reject_above);
}

TEST_CASE("identical hypothesis samples give zero epsilon") {
  std::vector<double> samples = {0.5, 1.0, 1.5, 2.0, 2.5};
  const audit::EpsilonEstimate estimate =
      audit::EmpiricalEpsilon(samples, samples, 1e-5);
  CHECK(estimate.eps_hat == 0.0);
  CHECK(estimate.lo == 0.0);
  CHECK(estimate.hi > 0.0);
}

TEST_CASE("perfect separation is flagged degenerate with unbounded upper CI") {
  std::vector<double> h0(100, 0.0);
  std::vector<double> h1(100, 10.0);
  const audit::EpsilonEstimate estimate =
      audit::EmpiricalEpsilon(h0, h1, 0.0);
  CHECK(estimate.degenerate);
  // Both rates floored at the Clopper-Pearson 95% upper bound for 0 of 100.
  const double floor = 1.0 - std::pow(0.025, 1.0 / 100.0);
  CHECK(estimate.eps_hat ==
        doctest::Approx(std::log((1.0 - floor) / floor)).epsilon(1e-6));
  CHECK(std::isinf(estimate.hi));
  CHECK(estimate.lo <= estimate.eps_hat);
  CHECK(estimate.fpr == 0.0);
  CHECK(estimate.fnr == 0.0);
}

TEST_CASE("empirical epsilon validates inputs") {
  std::vector<double> some = {1.0, 2.0};
  std::vector<double> none;
  CHECK_THROWS_AS(audit::EmpiricalEpsilon(none, some, 0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(audit::EmpiricalEpsilon(some, none, 0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(audit::EmpiricalEpsilon(some, some, 1.0),
                  std::invalid_argument);
}

TEST_CASE("interval brackets the estimate across random sample sets") {
  Rng rng(31);
  for (int rep = 0; rep < 50; ++rep) {
    Rng stream = rng.Derive(static_cast<std::uint64_t>(rep));
    std::vector<double> h0(40);
    std::vector<double> h1(40);
    const double shift = stream.Uniform(0.0, 2.0);
    for (double& v : h0) v = stream.Normal();
    for (double& v : h1) v = stream.Normal() + shift;
    const audit::EpsilonEstimate estimate =
        audit::EmpiricalEpsilon(h0, h1, 1e-5);
    CHECK(estimate.eps_hat >= 0.0);
    CHECK(estimate.lo <= estimate.eps_hat);
    CHECK(estimate.hi >= estimate.eps_hat);
  }
}

TEST_CASE("chi mean matches closed forms and grows with dimension") {
  // Gamma(1) = 1 and Gamma(1/2) = sqrt(pi) give the n = 1, 2 closed forms.
  CHECK(audit::ChiMean(1, 1.0) ==
        doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(1e-12));
  CHECK(audit::ChiMean(2, 1.0) ==
        doctest::Approx(std::sqrt(M_PI / 2.0)).epsilon(1e-12));
  // n = 3: sqrt(2) * Gamma(2) / Gamma(3/2) = 2 * sqrt(2 / pi).
  CHECK(audit::ChiMean(3, 2.0) ==
        doctest::Approx(2.0 * 2.0 * std::sqrt(2.0 / M_PI)).epsilon(1e-12));
  double previous = 0.0;
  for (int n = 1; n <= 50; ++n) {
    const double mean = audit::ChiMean(n, 0.5);
    CHECK(mean > previous);
    previous = mean;
  }
  // Large n: mean approaches sigma * sqrt(n).
  CHECK(audit::ChiMean(400, 1.0) ==
        doctest::Approx(std::sqrt(400.0)).epsilon(1e-3));
}

TEST_CASE("audit game H0 statistics follow the chi mean") {
  const nn::ModelParameters theta = SmallTheta(6, 3);
  audit::AuditConfig config;
  config.attribute = OneHotTail(6, 2);
  config.clip = 2.0;
  config.sigma = 0.1;
  config.trials = 1500;
  config.seed = 17;
  audit::CanaryRecord record;
  record.z = {0.4, -0.2, 0.9, 0.1, 1.0, 0.0};
  record.attribute_value = 0;
  const audit::AuditSamples samples =
      audit::RunAuditGame(record, theta, config);
  CHECK(samples.h0.size() + samples.h1.size() == 3000);
  CHECK(samples.h0.size() > 1200);
  CHECK(samples.h1.size() > 1200);
  const double mean_h0 =
      std::accumulate(samples.h0.begin(), samples.h0.end(), 0.0) /
      static_cast<double>(samples.h0.size());
  const double expected =
      audit::ChiMean(static_cast<int>(theta.flat.size()), config.sigma);
  CHECK(mean_h0 == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("audit game is deterministic and flips to a different value") {
  const nn::ModelParameters theta = SmallTheta(5, 9);
  audit::AuditConfig config;
  config.attribute = OneHotTail(5, 2);
  config.sigma = 0.0;  // isolates the hypothesis gradients
  config.trials = 100;
  config.seed = 5;
  audit::CanaryRecord record;
  record.z = {0.3, -1.0, 0.2, 1.0, 0.0};
  record.attribute_value = 0;
  const audit::AuditSamples a = audit::RunAuditGame(record, theta, config);
  const audit::AuditSamples b = audit::RunAuditGame(record, theta, config);
  CHECK(a.h0 == b.h0);
  CHECK(a.h1 == b.h1);
  // With sigma = 0 every H0 statistic is exactly zero and every H1 statistic
  // is the fixed distance to the flipped-attribute gradient: a flip can
  // never return the original value.
  for (const double v : a.h0) CHECK(v == 0.0);
  REQUIRE(!a.h1.empty());
  for (const double v : a.h1) {
    CHECK(v > 0.0);
    CHECK(v == doctest::Approx(a.h1.front()).epsilon(1e-12));
  }
}

TEST_CASE("audit game validates its configuration") {
  const nn::ModelParameters theta = SmallTheta(5, 9);
  audit::AuditConfig config;
  config.attribute = OneHotTail(5, 2);
  audit::CanaryRecord record;
  record.z = {0.3, -1.0, 0.2, 1.0, 0.0};

  audit::AuditConfig bad = config;
  bad.trials = 50;
  CHECK_THROWS_AS(audit::RunAuditGame(record, theta, bad),
                  std::invalid_argument);
  bad = config;
  bad.delta = 0.0;
  CHECK_THROWS_AS(audit::RunAuditGame(record, theta, bad),
                  std::invalid_argument);
  audit::CanaryRecord wrong = record;
  wrong.z.push_back(0.0);
  CHECK_THROWS_AS(audit::RunAuditGame(wrong, theta, config),
                  std::invalid_argument);
  wrong = record;
  wrong.attribute_value = 5;
  CHECK_THROWS_AS(audit::RunAuditGame(wrong, theta, config),
                  std::invalid_argument);
}

TEST_CASE("zero crafting iterations return the seeded initialization") {
  const nn::ModelParameters theta = SmallTheta(6, 21);
  const audit::AttributeSpec attribute = OneHotTail(6, 2);
  audit::CanaryCraftConfig config;
  config.iters = 0;
  config.seed = 40;
  const audit::CanaryRecord a =
      audit::CraftCanary(theta, attribute, 0, 2.0, config);
  const audit::CanaryRecord b =
      audit::CraftCanary(theta, attribute, 0, 2.0, config);
  CHECK(a.z == b.z);
  CHECK(a.z.size() == 6);
  // Attribute slots hold the designated one-hot encoding.
  CHECK(a.z[4] == 1.0);
  CHECK(a.z[5] == 0.0);
  CHECK(a.attribute_value == 0);
  CHECK(a.iters == 0);
  CHECK(a.nondecreasing_fraction == 1.0);
  CHECK(std::isfinite(a.objective));

  config.seed = 41;
  const audit::CanaryRecord c =
      audit::CraftCanary(theta, attribute, 0, 2.0, config);
  CHECK(a.z != c.z);
}

TEST_CASE("crafting increases the hypothesis separation objective") {
  const nn::ModelParameters theta = SmallTheta(6, 33);
  const audit::AttributeSpec attribute = OneHotTail(6, 2);
  audit::CanaryCraftConfig config;
  config.seed = 7;
  config.iters = 0;
  const audit::CanaryRecord random_record =
      audit::CraftCanary(theta, attribute, 0, 2.0, config);
  config.iters = 80;
  const audit::CanaryRecord crafted =
      audit::CraftCanary(theta, attribute, 0, 2.0, config);
  // The returned record is the best iterate visited, so more iterations can
  // only help.
  CHECK(crafted.objective > random_record.objective);
  CHECK(crafted.objective > 1.5 * random_record.objective);
  CHECK(crafted.nondecreasing_fraction > 0.0);
  CHECK(crafted.nondecreasing_fraction <= 1.0);
  CHECK(crafted.iters == 80);

  config.iters = 160;
  const audit::CanaryRecord longer =
      audit::CraftCanary(theta, attribute, 0, 2.0, config);
  CHECK(longer.objective >= crafted.objective);
  // The attribute slots stayed out of the optimizer.
  CHECK(crafted.z[4] == 1.0);
  CHECK(crafted.z[5] == 0.0);
  for (const double v : crafted.z) CHECK(std::isfinite(v));
}

TEST_CASE("cosine distance crafting also improves its objective") {
  const nn::ModelParameters theta = SmallTheta(6, 12);
  const audit::AttributeSpec attribute = OneHotTail(6, 2);
  audit::CanaryCraftConfig config;
  config.distance = audit::CanaryDistance::kCosine;
  config.seed = 3;
  config.iters = 0;
  const double before =
      audit::CraftCanary(theta, attribute, 0, 2.0, config).objective;
  config.iters = 60;
  const audit::CanaryRecord crafted =
      audit::CraftCanary(theta, attribute, 0, 2.0, config);
  CHECK(crafted.objective >= before);
  CHECK(crafted.distance == "cosine");
}

TEST_CASE("crafting validates its arguments") {
  const nn::ModelParameters theta = SmallTheta(6, 33);
  const audit::AttributeSpec attribute = OneHotTail(6, 2);
  audit::CanaryCraftConfig config;
  config.hypothesis_value = 0;  // same as the designated value
  CHECK_THROWS_AS(audit::CraftCanary(theta, attribute, 0, 2.0, config),
                  std::invalid_argument);
  config = {};
  config.step = 0.0;
  CHECK_THROWS_AS(audit::CraftCanary(theta, attribute, 0, 2.0, config),
                  std::invalid_argument);
  config = {};
  CHECK_THROWS_AS(audit::CraftCanary(theta, attribute, 0, 0.0, config),
                  std::invalid_argument);
}

TEST_CASE("audit report quotes the analytic epsilon and normalized ratio") {
  audit::AuditConfig config;
  config.clip = 2.0;
  config.sigma = 0.1;
  config.delta = 1e-5;
  config.attribute = OneHotTail(6, 2);
  audit::EpsilonEstimate estimate;
  estimate.eps_hat = 2.0;
  estimate.lo = 1.5;
  estimate.hi = 2.5;
  const audit::AuditRow row = audit::AuditReport(estimate, config, 10);
  CHECK(row.analytic_eps ==
        doctest::Approx(defenses::TheoreticalEpsilon(2.0, 0.1, 1e-5))
            .epsilon(1e-12));
  CHECK(row.normalized_ratio ==
        doctest::Approx(row.analytic_eps / (2.0 * 10.0)).epsilon(1e-12));
  CHECK_FALSE(row.indistinguishable);
  CHECK(row.n_attributes == 10);

  audit::EpsilonEstimate zero;
  const audit::AuditRow flagged = audit::AuditReport(zero, config, 10);
  CHECK(flagged.indistinguishable);
  CHECK(flagged.normalized_ratio == 0.0);

  audit::AuditConfig doubled = config;
  doubled.sensitivity_factor = 2.0;
  const audit::AuditRow wide = audit::AuditReport(estimate, doubled, 10);
  CHECK(wide.analytic_eps == doctest::Approx(2.0 * row.analytic_eps));
  CHECK_THROWS_AS(audit::AuditReport(estimate, config, 0),
                  std::invalid_argument);
}

}  // namespace
