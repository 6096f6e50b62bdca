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

#include "gradlab/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace gradlab::defenses {

DefenseKind DefenseKindFromName(const std::string& name) {
  if (name == "identity") return DefenseKind::kIdentity;
  if (name == "prune") return DefenseKind::kPrune;
  if (name == "sign") return DefenseKind::kSign;
  if (name == "adv-perturb") return DefenseKind::kAdvPerturb;
  if (name == "vib") return DefenseKind::kVib;
  if (name == "dpsgd") return DefenseKind::kDpsgd;
  throw std::invalid_argument("unknown defense: " + name);
}

const char* DefenseKindName(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::kIdentity:
      return "identity";
    case DefenseKind::kPrune:
      return "prune";
    case DefenseKind::kSign:
      return "sign";
    case DefenseKind::kAdvPerturb:
      return "adv-perturb";
    case DefenseKind::kVib:
      return "vib";
    case DefenseKind::kDpsgd:
      return "dpsgd";
  }
  return "unknown";
}

void DefenseMechanism::Validate() const {
  if (prune_rate < 0.0 || prune_rate > 1.0)
    throw std::invalid_argument("prune rate must lie in [0, 1]");
  if (adv_gamma <= 0.0 || adv_step <= 0.0)
    throw std::invalid_argument("perturbation radius and step must be > 0");
  if (adv_iters < 0)
    throw std::invalid_argument("perturbation iterations must be >= 0");
  if (vib_beta < 0.0) throw std::invalid_argument("vib beta must be >= 0");
  if (vib_latent_dim < 1)
    throw std::invalid_argument("vib latent dim must be >= 1");
  if (dpsgd_clip <= 0.0) throw std::invalid_argument("clip must be > 0");
  if (dpsgd_sigma < 0.0) throw std::invalid_argument("sigma must be >= 0");
}

std::string DefenseMechanism::Describe() const {
  std::ostringstream out;
  out << DefenseKindName(kind);
  switch (kind) {
    case DefenseKind::kPrune:
      out << "(rate=" << prune_rate << ")";
      break;
    case DefenseKind::kAdvPerturb:
      out << "(gamma=" << adv_gamma << ",step=" << adv_step
          << ",iters=" << adv_iters << ")";
      break;
    case DefenseKind::kVib:
      out << "(beta=" << vib_beta << ")";
      break;
    case DefenseKind::kDpsgd:
      out << "(clip=" << dpsgd_clip << ",sigma=" << dpsgd_sigma << ")";
      break;
    default:
      break;
  }
  return out.str();
}

GradientVector ApplyIdentity(const GradientVector& g) { return g; }

GradientVector Prune(const GradientVector& g, double rate) {
  if (rate < 0.0 || rate > 1.0)
    throw std::invalid_argument("prune rate must lie in [0, 1]");
  const std::size_t n = g.size();
  const auto zeros =
      static_cast<std::size_t>(std::ceil(rate * static_cast<double>(n)));
  if (zeros == 0) return g;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ma = std::abs(g[a]), mb = std::abs(g[b]);
    return ma != mb ? ma < mb : a < b;
  });
  GradientVector out = g;
  for (std::size_t i = 0; i < zeros && i < n; ++i) out[order[i]] = 0.0;
  return out;
}

GradientVector Sign(const GradientVector& g) {
  GradientVector out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    out[i] = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
  return out;
}

GradientVector AdvPerturb(const GradientVector& g, int label,
                          const InputGradFn& grad_fn, double gamma,
                          double step, int iters, bool targeted) {
  if (gamma <= 0.0 || step <= 0.0)
    throw std::invalid_argument("gamma and step must be > 0");
  if (iters < 0) throw std::invalid_argument("iters must be >= 0");
  GradientVector out = g;
  const double direction = targeted ? -1.0 : 1.0;
  for (int it = 0; it < iters; ++it) {
    const std::vector<double> dg = grad_fn(out, label);
    if (dg.size() != g.size())
      throw std::invalid_argument("classifier gradient length mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double s = dg[i] > 0.0 ? 1.0 : (dg[i] < 0.0 ? -1.0 : 0.0);
      out[i] += direction * step * s;
      out[i] = std::clamp(out[i], g[i] - gamma, g[i] + gamma);
    }
  }
  return out;
}

GradientVector Dpsgd(const std::vector<GradientVector>& per_sample,
                     double clip, double sigma, Rng& rng) {
  if (per_sample.empty())
    throw std::invalid_argument("dpsgd needs at least one per-sample gradient");
  if (clip <= 0.0) throw std::invalid_argument("clip must be > 0");
  if (sigma < 0.0) throw std::invalid_argument("sigma must be >= 0");
  const std::size_t n = per_sample[0].size();
  GradientVector out(n, 0.0);
  for (const GradientVector& gi : per_sample) {
    if (gi.size() != n)
      throw std::invalid_argument("ragged per-sample gradients");
    double norm_sq = 0.0;
    for (const double v : gi) norm_sq += v * v;
    const double scale = 1.0 / std::max(1.0, std::sqrt(norm_sq) / clip);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] += gi[i] * scale;
      if (sigma > 0.0) out[i] += sigma * rng.Normal();
    }
  }
  const double inv_k = 1.0 / static_cast<double>(per_sample.size());
  for (double& v : out) v *= inv_k;
  return out;
}

double TheoreticalEpsilon(double clip, double sigma, double delta) {
  if (clip <= 0.0) throw std::invalid_argument("clip must be > 0");
  if (sigma <= 0.0)
    throw std::invalid_argument("epsilon undefined for sigma = 0");
  if (delta <= 0.0 || delta >= 1.0)
    throw std::invalid_argument("delta must lie in (0, 1)");
  return clip * std::sqrt(2.0 * std::log(1.25 / delta)) / sigma;
}

std::vector<DefenseProfile> SweepProfiles() {
  std::vector<DefenseProfile> profiles;
  {
    DefenseMechanism identity;
    profiles.push_back({"identity", identity});
  }
  for (const double rate : {0.90, 0.95, 0.99}) {
    DefenseMechanism m;
    m.kind = DefenseKind::kPrune;
    m.prune_rate = rate;
    profiles.push_back({"prune-" + std::to_string(rate).substr(0, 4), m});
  }
  {
    DefenseMechanism m;
    m.kind = DefenseKind::kSign;
    profiles.push_back({"sign", m});
  }
  const std::pair<double, double> adv_points[] = {
      {5e-4, 2e-4}, {1e-3, 3e-4}, {5e-3, 2e-3}};
  int adv_index = 0;
  for (const auto& [gamma, step] : adv_points) {
    DefenseMechanism m;
    m.kind = DefenseKind::kAdvPerturb;
    m.adv_gamma = gamma;
    m.adv_step = step;
    m.adv_iters = 5;
    profiles.push_back({"adv-perturb-" + std::to_string(++adv_index), m});
  }
  int vib_index = 0;
  for (const double beta : {1e-1, 1e-2, 1e-3}) {
    DefenseMechanism m;
    m.kind = DefenseKind::kVib;
    m.vib_beta = beta;
    profiles.push_back({"vib-" + std::to_string(++vib_index), m});
  }
  int dp_index = 0;
  for (const double sigma : {1e-1, 2e-2, 1e-2}) {
    DefenseMechanism m;
    m.kind = DefenseKind::kDpsgd;
    m.dpsgd_clip = 2.0;
    m.dpsgd_sigma = sigma;
    profiles.push_back({"dpsgd-" + std::to_string(++dp_index), m});
  }
  return profiles;
}

}  // namespace gradlab::defenses
