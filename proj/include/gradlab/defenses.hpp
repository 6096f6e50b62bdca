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

#ifndef GRADLAB_DEFENSES_HPP_
#define GRADLAB_DEFENSES_HPP_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gradlab/nn.hpp"
#include "gradlab/rng.hpp"

namespace gradlab::defenses {

using nn::GradientVector;

enum class DefenseKind { kIdentity, kPrune, kSign, kAdvPerturb, kVib, kDpsgd };

DefenseKind DefenseKindFromName(const std::string& name);
const char* DefenseKindName(DefenseKind kind);

// One gradient-release mechanism with its parameters. Identity, Prune, Sign,
// and AdvPerturb post-process released gradients; VIB marks a training-time
// swap to a VIB-equipped network (released gradients are raw gradients of the
// VIB loss); DPSGD privatizes per-sample gradients and also replaces the
// training update.
struct DefenseMechanism {
  DefenseKind kind = DefenseKind::kIdentity;
  double prune_rate = 0.99;
  double adv_gamma = 0.005;
  double adv_step = 0.002;
  int adv_iters = 5;
  double vib_beta = 0.01;
  int vib_latent_dim = 16;
  double dpsgd_clip = 2.0;
  double dpsgd_sigma = 0.1;

  void Validate() const;
  // True when the mechanism changes how the model trains, not just what is
  // released.
  bool training_time() const {
    return kind == DefenseKind::kVib || kind == DefenseKind::kDpsgd;
  }
  std::string Describe() const;
};

GradientVector ApplyIdentity(const GradientVector& g);

// Zeros the ceil(rate * n) entries of smallest magnitude; magnitude ties zero
// the lower index first.
GradientVector Prune(const GradientVector& g, double rate);

// Element-wise mathematical sign; sign(0) = 0.
GradientVector Sign(const GradientVector& g);

// d CE(f_phi(g), label) / dg for the defender's gradient classifier.
using InputGradFn =
    std::function<std::vector<double>(std::span<const double>, int)>;

// Projected gradient descent inside the l-infinity ball of radius gamma
// around g. Untargeted (label = true sensitive value): ascends the classifier
// loss to erase the signal. Targeted (label = decoy): descends toward the
// decoy. Makes exactly `iters` gradient queries.
GradientVector AdvPerturb(const GradientVector& g, int label,
                          const InputGradFn& grad_fn, double gamma,
                          double step, int iters, bool targeted = false);

// Per-sample l2 clip to `clip`, Gaussian noise sigma per sample, then mean:
// output = (1/k) * sum_i (clip(g_i) + N(0, sigma^2 I)). Equivalent to one
// N(0, sigma^2/k I) draw on the clipped mean; the per-sample form is kept as
// written.
GradientVector Dpsgd(const std::vector<GradientVector>& per_sample,
                     double clip, double sigma, Rng& rng);

// Per-step epsilon of the Gaussian mechanism: clip * sqrt(2 ln(1.25/delta))
// / sigma.
double TheoreticalEpsilon(double clip, double sigma, double delta);

// Named parameter sets for the privacy-utility sweep: three operating points
// per mechanism family plus the identity baseline.
struct DefenseProfile {
  std::string name;
  DefenseMechanism mechanism;
};
std::vector<DefenseProfile> SweepProfiles();

}  // namespace gradlab::defenses

#endif  // GRADLAB_DEFENSES_HPP_
