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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "gradlab/rng.hpp"

using namespace gradlab;
using namespace gradlab::analysis;

namespace {

// Random channel with Dirichlet-ish rows (normalized exponentials).
DiscreteChannel RandomChannel(Rng& rng, int nx, int ny) {
  DiscreteChannel ch;
  ch.prior.resize(nx);
  double total = 0.0;
  for (double& v : ch.prior) {
    v = -std::log(1.0 - rng.Uniform());
    total += v;
  }
  for (double& v : ch.prior) v /= total;
  ch.conditional.assign(nx, std::vector<double>(ny));
  for (auto& row : ch.conditional) {
    double s = 0.0;
    for (double& v : row) {
      v = -std::log(1.0 - rng.Uniform());
      s += v;
    }
    for (double& v : row) v /= s;
  }
  return ch;
}

}  // namespace

TEST_CASE("entropy hand values") {
  CHECK(Entropy(std::vector<double>{0.5, 0.5}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(Entropy(std::vector<double>{1.0, 0.0}) == 0.0);
  CHECK(std::abs(Entropy(std::vector<double>{0.9, 0.1}) - 0.3251) < 1e-4);
  CHECK_THROWS_AS(Entropy(std::vector<double>{0.5, 0.4}),
                  std::invalid_argument);
}

TEST_CASE("mutual information on canonical channels") {
  DiscreteChannel identity;
  identity.prior = {0.25, 0.25, 0.25, 0.25};
  identity.conditional = {
      {1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}};
  CHECK(MutualInformationExact(identity) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));

  DiscreteChannel independent;
  independent.prior = {0.3, 0.7};
  independent.conditional = {{0.6, 0.4}, {0.6, 0.4}};
  CHECK(MutualInformationExact(independent) == doctest::Approx(0.0));

  DiscreteChannel bsc;
  bsc.prior = {0.5, 0.5};
  bsc.conditional = {{0.9, 0.1}, {0.1, 0.9}};
  CHECK(std::abs(MutualInformationExact(bsc) - 0.3680) < 1e-4);
  CHECK(MutualInformationExact(bsc) ==
        doctest::Approx(std::log(2.0) - BinaryEntropy(0.1)).epsilon(1e-12));
}

TEST_CASE("bayes error on canonical channels") {
  DiscreteChannel bsc;
  bsc.prior = {0.5, 0.5};
  bsc.conditional = {{0.9, 0.1}, {0.1, 0.9}};
  CHECK(BayesError(bsc) == doctest::Approx(0.1).epsilon(1e-12));

  DiscreteChannel blind;
  blind.prior = {0.25, 0.25, 0.25, 0.25};
  blind.conditional = {{1.0}, {1.0}, {1.0}, {1.0}};
  CHECK(BayesError(blind) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("fano error bound hand values") {
  const double h4 = std::log(4.0);
  CHECK(std::abs(FanoErrorLowerBound(h4, 0.0, 4) - 0.6309) < 1e-4);
  // Raw value goes negative once I covers H - ln 2; bound clamps at 0.
  CHECK(FanoErrorLowerBound(0.3, 0.3, 4) == 0.0);
  CHECK(FanoErrorLowerBound(h4, h4, 4) == 0.0);
}

TEST_CASE("fano binary inversion") {
  CHECK(FanoBinaryNumeric(0.0) == 0.0);
  CHECK(FanoBinaryNumeric(std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(FanoBinaryNumeric(BinaryEntropy(0.1)) ==
        doctest::Approx(0.1).epsilon(1e-7));
}

TEST_CASE("fano binary inversion is the identity against binary entropy") {
  for (double e = 0.0; e <= 0.5 + 1e-12; e += 0.025)
    CHECK(std::abs(FanoBinaryNumeric(BinaryEntropy(e)) - e) < 1e-8);
}

TEST_CASE("binary alphabet routes to the numeric bound") {
  // H(X) = ln 2, I = ln 2 - H2(0.1): conditional entropy H2(0.1), whose
  // numeric inversion recovers 0.1.
  const double h = std::log(2.0);
  const double mi = h - BinaryEntropy(0.1);
  CHECK(FanoErrorLowerBound(h, mi, 2) == doctest::Approx(0.1).epsilon(1e-7));
}

TEST_CASE("advantage bound hand value and clamps") {
  const double h4 = std::log(4.0);
  CHECK(std::abs(AdvantageUpperBound(h4, 0.0, 4, 0.25) - 0.1587) < 1e-3);
  CHECK(AdvantageUpperBound(h4, h4, 4, 0.25) == 1.0);
  CHECK(AdvantageUpperBound(h4, h4 + 1.0, 4, 0.25) == 1.0);
  CHECK_THROWS_AS(AdvantageUpperBound(1.0, 0.5, 2, 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(AdvantageUpperBound(1.0, 0.5, 4, 1.0),
                  std::invalid_argument);
}

TEST_CASE("gaussian capacity bound formula and flag") {
  CHECK(GaussianCapacityBound(0.0, 0.1) == 0.0);
  CHECK(GaussianCapacityBound(1.0, 1.0) ==
        doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));
  CHECK(GaussianCapacityBound(2.0, 0.5) ==
        doctest::Approx(0.5 * std::log1p(4.0)).epsilon(1e-12));
  CHECK(GaussianCapacityBound(2.0, 0.5, /*classical=*/true) ==
        doctest::Approx(0.5 * std::log1p(8.0)).epsilon(1e-12));
  double prev = -1.0;
  for (double p = 0.0; p <= 5.0; p += 0.5) {
    const double c = GaussianCapacityBound(p, 0.3);
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("bound functions are monotone in the information") {
  const double h = std::log(4.0);
  double prev_err = 1.0, prev_adv = -1.0;
  for (double mi = 0.0; mi <= h; mi += h / 20.0) {
    const double err = FanoErrorLowerBound(h, mi, 4);
    const double adv = AdvantageUpperBound(h, mi, 4, 0.25);
    CHECK(err <= prev_err + 1e-12);
    CHECK(adv >= prev_adv - 1e-12);
    prev_err = err;
    prev_adv = adv;
  }
}

TEST_CASE("bayes error dominates the fano bound on random channels") {
  Rng rng(909);
  for (int trial = 0; trial < 1000; ++trial) {
    const int nx = 2 + rng.UniformInt(3);  // 2..4
    const int ny = 2 + rng.UniformInt(7);  // 2..8
    const DiscreteChannel ch = RandomChannel(rng, nx, ny);
    const double h = Entropy(ch.prior);
    const double mi = MutualInformationExact(ch);
    const double bayes = BayesError(ch);
    const double bound = FanoErrorLowerBound(h, mi, nx);
    CHECK(bayes >= bound - 1e-9);
  }
}

TEST_CASE("bayes advantage respects the advantage bound on random channels") {
  Rng rng(910);
  for (int trial = 0; trial < 1000; ++trial) {
    const int nx = 3 + rng.UniformInt(2);  // 3..4
    const int ny = 2 + rng.UniformInt(7);
    const DiscreteChannel ch = RandomChannel(rng, nx, ny);
    const double h = Entropy(ch.prior);
    const double mi = MutualInformationExact(ch);
    double p_star = 0.0;
    for (const double v : ch.prior) p_star = std::max(p_star, v);
    const double p_bayes = 1.0 - BayesError(ch);
    const double adv = std::max(p_bayes - p_star, 0.0) / (1.0 - p_star);
    CHECK(adv <= AdvantageUpperBound(h, mi, nx, p_star) + 1e-9);
  }
}

TEST_CASE("mi proxy endpoints") {
  const std::vector<double> prior{0.5, 0.5};
  std::vector<std::vector<double>> at_prior(40, {0.5, 0.5});
  std::vector<int> labels(40);
  for (int i = 0; i < 40; ++i) labels[i] = i % 2;
  CHECK(MiProxyFromPosteriors(at_prior, labels, prior) == doctest::Approx(0.0));

  std::vector<std::vector<double>> perfect;
  for (int i = 0; i < 40; ++i)
    perfect.push_back(labels[i] == 1 ? std::vector<double>{0.0, 1.0}
                                     : std::vector<double>{1.0, 0.0});
  CHECK(MiProxyFromPosteriors(perfect, labels, prior) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("mi proxy tracks exact information on an enumerable channel") {
  // Exact-posterior scoring of samples from a known channel: the proxy
  // estimates I(X;Y) up to sampling noise.
  DiscreteChannel ch;
  ch.prior = {0.5, 0.5};
  ch.conditional = {{0.85, 0.15}, {0.2, 0.8}};
  const double exact = MutualInformationExact(ch);

  std::vector<double> marginal(2, 0.0);
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) marginal[y] += ch.prior[x] * ch.conditional[x][y];

  Rng rng(911);
  std::vector<std::vector<double>> posteriors;
  std::vector<int> labels;
  for (int i = 0; i < 20000; ++i) {
    const int x = rng.Categorical(ch.prior);
    const int y = rng.Categorical(ch.conditional[x]);
    std::vector<double> post(2);
    for (int xx = 0; xx < 2; ++xx)
      post[xx] = ch.prior[xx] * ch.conditional[xx][y] / marginal[y];
    posteriors.push_back(std::move(post));
    labels.push_back(x);
  }
  const double proxy = MiProxyFromPosteriors(posteriors, labels, ch.prior);
  CHECK(proxy <= exact + 0.05);
  CHECK(proxy >= exact - 0.05);
}
