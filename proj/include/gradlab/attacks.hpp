// Copyright 2026 The GradLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GRADLAB_ATTACKS_HPP_
#define GRADLAB_ATTACKS_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gradlab/data.hpp"
#include "gradlab/estimators.hpp"
#include "gradlab/nn.hpp"
#include "gradlab/rng.hpp"

namespace gradlab::attacks {

// The four gradient-leakage inference targets: the sensitive attribute of a
// record, an external property of a record, the fraction of a batch with a
// property (over ratio bins), and the identity of the contributing user.
enum class AttackKind { kAttribute, kProperty, kDistribution, kUser };

AttackKind AttackKindFromName(const std::string& name);
const char* AttackKindName(AttackKind kind);

// Dimensionality reduction applied to raw gradient vectors before any
// posterior model sees them. MaxPool takes the max of non-overlapping
// windows (stride = kernel; a trailing partial window is maxed as-is).
// Pca projects centered inputs onto a fitted orthonormal basis.
enum class ReducerKind { kMaxPool, kPca };

class FeatureReducer {
 public:
  // Default-constructed reducer is MaxPool(1): the identity.
  FeatureReducer() = default;

  static FeatureReducer MaxPool(int kernel);  // kernel >= 1
  static FeatureReducer Pca(int dims);        // dims >= 1, requires Fit

  // Fits the PCA basis on the given sample set via seeded orthogonal
  // iteration; the basis is orthonormal and sign-canonicalized (largest
  // magnitude entry of each component is positive). No-op for MaxPool.
  // Throws if dims exceeds the input dimension or fewer than 2 samples.
  void Fit(const std::vector<std::vector<double>>& samples, Rng rng);

  // Throws if a Pca reducer is used before Fit.
  std::vector<double> Reduce(std::span<const double> g) const;

  ReducerKind kind() const { return kind_; }
  int kernel() const { return kernel_; }  // MaxPool window
  int dims() const { return dims_; }      // Pca components
  bool fitted() const { return kind_ == ReducerKind::kMaxPool || fitted_; }
  int output_dim(int input_dim) const;
  // Row j of the fitted basis (PCA only).
  std::span<const double> component(int j) const;

 private:
  ReducerKind kind_ = ReducerKind::kMaxPool;
  int kernel_ = 1;
  int dims_ = 0;
  bool fitted_ = false;
  int input_dim_ = 0;
  std::vector<double> mean_;
  std::vector<double> basis_;  // dims_ x input_dim_, row-major
};

// One shadow observation: the (possibly defended) gradient and the value of
// the sensitive variable that produced it.
struct AttackPair {
  std::vector<double> gradient;
  int label = 0;
};

// Maps a batch and its sensitive value to the gradient the adversary would
// observe. CleanObserver computes the undefended batch gradient at theta
// (drawing reparameterization noise from the rng for VIB networks); adaptive
// attacks substitute an observer that applies the defense.
using GradientObserver =
    std::function<nn::GradientVector(const nn::Batch&, int, Rng)>;

GradientObserver CleanObserver(const nn::ModelParameters& theta);

struct PairGenConfig {
  AttackKind kind = AttackKind::kAttribute;
  int batch_size = 1;  // records per shadow batch (k)
  int n_pairs = 0;
  int property_value = 1;   // kDistribution: sensitive value with the property
  data::RatioBinSpec bins;  // kDistribution only
};

// Shadow training pairs with labels balanced round-robin over classes
// (sensitive value for kAttribute/kProperty, ratio-bin index for
// kDistribution). Each pair draws its batch and observation noise from
// derived per-pair streams. kUser uses the UserGroup overload below.
std::vector<AttackPair> GenAttackTrainingSet(const data::Dataset& shadow,
                                             const PairGenConfig& config,
                                             const GradientObserver& observe,
                                             const Rng& rng);

// User-labeled pairs: label i is the index into shadow_users (round-robin),
// batches bootstrapped from that user's pool.
std::vector<AttackPair> GenUserTrainingSet(
    const std::vector<data::UserGroup>& shadow_users, int batch_size,
    int n_pairs, const GradientObserver& observe, const Rng& rng);

// Reducer composed with a pluggable classifier: the adversary's posterior
// over the sensitive variable given an observed gradient.
class PosteriorModel {
 public:
  // Fits an unfitted Pca reducer on the pairs' gradients, then trains the
  // estimator on reduced features. Throws if fewer than 2 classes present.
  static PosteriorModel Train(const std::vector<AttackPair>& pairs,
                              FeatureReducer reducer,
                              const estimators::TrainConfig& config,
                              int num_classes);

  // Length num_classes, non-negative, sums to 1 within 1e-9.
  std::vector<double> Posterior(std::span<const double> g) const;

  int num_classes() const { return estimator_.num_classes(); }
  const FeatureReducer& reducer() const { return reducer_; }

 private:
  PosteriorModel(FeatureReducer reducer, estimators::Estimator estimator)
      : reducer_(std::move(reducer)), estimator_(std::move(estimator)) {}

  FeatureReducer reducer_;
  estimators::Estimator estimator_;
};

// Turns the m-1 exceedance scores s_i = P(a > i) into a distribution over m
// ordered bins: P(0) = 1 - s_1, P(j) = s_j - s_{j+1}, P(m-1) = s_{m-1}.
// Negative masses clamp to 0 and the result renormalizes; a non-positive or
// non-finite total falls back to uniform.
std::vector<double> OrdinalRecombine(std::span<const double> exceed_probs);

// Ordinal classifier over num_bins ordered ratio bins: one binary
// PosteriorModel per threshold, model i trained on 1{label > i}.
class OrdinalModel {
 public:
  // num_bins >= 3. A Pca reducer is fitted once and shared by all binaries.
  static OrdinalModel Train(const std::vector<AttackPair>& pairs, int num_bins,
                            FeatureReducer reducer,
                            const estimators::TrainConfig& config);

  std::vector<double> Posterior(std::span<const double> g) const;

  int num_bins() const { return num_bins_; }

 private:
  OrdinalModel() = default;

  std::vector<PosteriorModel> binaries_;  // binaries_[i] estimates P(a > i)
  int num_bins_ = 0;
};

struct EncoderConfig {
  int hidden = 100;
  int embedding_dim = 50;
  int epochs = 80;
  int batch_size = 64;
  double lr = 0.01;  // Adam
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
};

// Maps reduced gradients to an embedding space in which distance encodes
// user identity. Trained end-to-end with a linear classification head over
// the shadow users; the head is dropped after training and only the encoder
// layers are kept.
class UserEncoder {
 public:
  // Throws if fewer than 2 distinct user labels are present.
  static UserEncoder Train(const std::vector<AttackPair>& user_pairs,
                           FeatureReducer reducer,
                           const EncoderConfig& config);

  std::vector<double> Embed(std::span<const double> g) const;

  int embedding_dim() const { return embedding_dim_; }
  // Accuracy of the full encoder+head network on its training pairs,
  // recorded before the head is dropped.
  double train_accuracy() const { return train_accuracy_; }

 private:
  struct Layer {
    int in = 0;
    int out = 0;
    bool relu = false;
    std::vector<double> w;  // out x in, row-major
    std::vector<double> b;
  };

  UserEncoder() = default;

  FeatureReducer reducer_;
  std::vector<double> mean_, inv_std_;
  std::vector<Layer> layers_;
  int embedding_dim_ = 0;
  double train_accuracy_ = 0.0;
};

// softmax_i(-||candidates[i] - observed||_2): closer embeddings get more
// probability mass; equal distances split mass evenly.
std::vector<double> UiaPosteriorFromEmbeddings(
    std::span<const double> observed,
    const std::vector<std::vector<double>>& candidates);

// Computes each candidate batch's clean gradient at theta, embeds it and the
// observed gradient, and returns the distance softmax over candidates.
// VIB networks need vib_rng for the candidates' reparameterization noise.
std::vector<double> UiaPosterior(const UserEncoder& encoder,
                                 std::span<const double> g_observed,
                                 const std::vector<nn::Batch>& candidate_batches,
                                 const nn::ModelParameters& theta,
                                 const Rng* vib_rng = nullptr);

// Log-score fusion of per-round posteriors under conditional independence:
// score(a) = sum_i log P_i(a) - (R-1) * log prior(a), posteriors floored at
// 1e-12 before the log. a_hat is the argmax, ties to the lowest index.
struct AggregateResult {
  int a_hat = 0;
  std::vector<double> log_scores;
};

AggregateResult MultiRoundAggregate(
    const std::vector<std::vector<double>>& round_posteriors,
    std::span<const double> prior);

// How an attack is instantiated inside a game: which target, which estimator
// backs the posterior, how many shadow pairs per round, and whether shadow
// gradients pass through the live defense before training (adaptive).
struct AttackConfig {
  AttackKind kind = AttackKind::kAttribute;
  estimators::EstimatorKind estimator = estimators::EstimatorKind::kLogistic;
  int n_pairs = 256;
  bool adaptive = false;
};

// Adaptive variant of the same attack: training pairs are generated through
// the defense; evaluation is unchanged.
AttackConfig AdaptiveWrap(AttackConfig config);

}  // namespace gradlab::attacks

#endif  // GRADLAB_ATTACKS_HPP_
