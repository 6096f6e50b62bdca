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

#ifndef GRADLAB_GAME_HPP_
#define GRADLAB_GAME_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gradlab/attacks.hpp"
#include "gradlab/data.hpp"
#include "gradlab/defenses.hpp"
#include "gradlab/estimators.hpp"
#include "gradlab/metrics.hpp"
#include "gradlab/nn.hpp"
#include "gradlab/rng.hpp"

namespace gradlab::game {

// One inference game: a model trains for `epochs` one-epoch rounds on the
// private split while an adversary observes (defended) batch gradients at
// the rounds in `rounds` and infers each trial's sensitive value.
struct GameConfig {
  // Model under attack. The input width must match the prepared data; a VIB
  // defense swaps in its latent layer at initialization.
  nn::NetworkSpec network;

  // Adversary.
  attacks::AttackKind attack_kind = attacks::AttackKind::kAttribute;
  bool adaptive = false;  // train attack models on defended shadow gradients
  estimators::TrainConfig estimator;   // posterior models (seed is per-round)
  attacks::EncoderConfig encoder;      // kUser only (seed is per-round)
  attacks::FeatureReducer reducer = attacks::FeatureReducer::MaxPool(3);
  int n_shadow_pairs = 256;  // shadow gradient pairs per observed round

  // Game shape.
  int batch_size = 16;      // k, records per challenge batch
  int epochs = 10;          // r, one-epoch training rounds
  std::vector<int> rounds;  // R, 1-based; empty means 1..epochs
  int trials = 100;         // T

  // Defense under evaluation.
  defenses::DefenseMechanism defense;
  estimators::TrainConfig defender;  // adv-perturb's gradient classifier

  // Data. Non-user games generate `dataset_size` records, split them
  // train/test/public, and build a balanced shadow set from the public
  // split. User games generate per-user records and partition users into
  // train/shadow groups (leftover users' records become the test split).
  data::SyntheticSpec data_spec;
  int dataset_size = 2000;
  double train_fraction = 0.5;
  double test_fraction = 0.25;
  double public_fraction = 0.25;
  int shadow_size = 500;
  data::RatioBinSpec bins;  // kDistribution
  int property_value = 1;   // kDistribution: sensitive value with property
  int uia_candidates = 5;   // kUser: candidate users per trial
  int users_total = 30;
  int records_per_user = 40;
  int n_train_users = 12;
  int n_shadow_users = 8;
  double user_strength = 1.0;

  // Utility training (plain SGD; DPSGD defense swaps in its private update).
  double train_lr = 0.01;
  int train_minibatch = 32;

  std::uint64_t master_seed = 0;

  // R resolved: `rounds` if nonempty, else 1..epochs.
  std::vector<int> ObservableRounds() const;
  // Cardinality of the sensitive variable for the configured attack.
  int NumClasses() const;
  void Validate() const;
};

// Prepared splits and the sensitive prior. Provenance tags are the guard
// rails: attack models may only consume kShadow data (or shadow users),
// utility training only kTrain.
struct GameData {
  data::Dataset train;
  data::Dataset test;
  data::Dataset shadow;
  std::vector<data::UserGroup> train_users;   // kUser only
  std::vector<data::UserGroup> shadow_users;  // kUser only
  std::vector<double> prior;
};

// Builds the game's splits and prior. By default the dataset is synthesized
// from config.data_spec; passing an external dataset (e.g. CSV-loaded)
// replaces generation while keeping the same split, shadow, and one-hot
// plumbing. External non-user games take their sensitive prior from the
// empirical distribution and require every value to be present.
GameData PrepareData(const GameConfig& config,
                     const data::Dataset* external = nullptr);

// One trial: the drawn sensitive value, the adversary's posterior at every
// observed round, and the fused multi-round estimate.
struct TrialRecord {
  int true_a = 0;
  std::vector<std::vector<double>> posteriors;  // aligned with rounds
  int a_hat = 0;
  std::vector<double> log_scores;
};

// The attack model trained for one observed round (at the pre-update
// parameters theta_{i-1}); exactly one member is engaged per attack kind.
struct RoundAttackModel {
  int round = 0;
  std::optional<attacks::PosteriorModel> posterior;  // kAttribute, kProperty
  std::optional<attacks::OrdinalModel> ordinal;      // kDistribution
  std::optional<attacks::UserEncoder> encoder;       // kUser
};

struct GameResult {
  std::vector<int> rounds;
  std::vector<double> prior;
  std::vector<TrialRecord> trials;
  std::vector<RoundAttackModel> models;
  // theta[e] = parameters after e one-epoch updates; theta[0] is the init.
  std::vector<nn::ModelParameters> theta;
};

// Executes the full game loop: init, serial theta trajectory, per-round
// attack models from shadow data, then independent trials with pre-assigned
// streams. Deterministic for a fixed config and master seed. Throws
// std::runtime_error naming the trial and round on a non-finite observed
// gradient.
GameResult RunInferenceGame(const GameConfig& config,
                            const data::Dataset* external = nullptr);

// One epoch of utility training: plain SGD (lr, fixed shuffled order) over
// the split, minibatch gradients; a DPSGD defense replaces each minibatch
// gradient with its clipped-and-noised private aggregate; VIB networks draw
// fresh reparameterization noise per minibatch. Requires kTrain provenance.
nn::ModelParameters TrainOneEpoch(const nn::ModelParameters& theta,
                                  const data::Dataset& train,
                                  const defenses::DefenseMechanism& defense,
                                  double lr, int minibatch, Rng rng);

// The gradient-release pipeline for one mechanism at fixed parameters:
// clean batch gradient followed by the mechanism's transform. AdvPerturb
// needs the defender's classifier f_phi; `targeted` selects the user-game
// variant that descends toward a decoy class drawn from the stream.
attacks::GradientObserver MakeObserver(const nn::ModelParameters& theta,
                                       const defenses::DefenseMechanism& defense,
                                       const estimators::Estimator* f_phi,
                                       bool targeted);

// Label-1 posterior-mass AUROC of the task model on a binary-label split
// (VIB networks are scored at the latent mean).
double TaskAuroc(const nn::ModelParameters& theta, const data::Dataset& test);

// Per-round reports plus the multi-round report from the fused scores.
struct AttackEvaluation {
  std::vector<metrics::MetricsReport> per_round;  // aligned with rounds
  metrics::MetricsReport multi_round;
};

AttackEvaluation EvaluateAttack(const GameResult& result);

// One (defense, adversary mode) cell of the defense comparison.
struct DefenseCell {
  std::string name;
  defenses::DefenseMechanism mechanism;
  bool adaptive = false;
  AttackEvaluation eval;
};

// Runs every profile in static and adaptive mode under the base config's
// master seed: identical data and trial streams per cell, only the
// mechanism and adversary mode differ.
std::vector<DefenseCell> RunDefenseEval(
    const GameConfig& base, const std::vector<defenses::DefenseProfile>& profiles,
    const data::Dataset* external = nullptr);

// One point of the privacy-utility scatter: the adaptive adversary's fused
// advantage against the task model's test AUROC under the same mechanism.
struct SweepPoint {
  std::string name;
  defenses::DefenseMechanism mechanism;
  double advantage = 0.0;
  double task_auroc = 0.0;
};

// Sweeps the standard defense profiles (identity baseline plus three
// operating points per family).
std::vector<SweepPoint> PrivacyUtilitySweep(
    const GameConfig& base, const data::Dataset* external = nullptr);

}  // namespace gradlab::game

#endif  // GRADLAB_GAME_HPP_
