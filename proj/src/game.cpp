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

#include "gradlab/game.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

namespace gradlab::game {
namespace {

std::vector<double> SoftmaxOf(std::span<const double> scores) {
  double m = scores[0];
  for (const double v : scores) m = std::max(m, v);
  std::vector<double> p(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - m);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

void CheckFinite(std::span<const double> values, const std::string& what) {
  for (const double v : values)
    if (!std::isfinite(v))
      throw std::runtime_error("non-finite value in " + what +
                               "; aborting the trial set");
}

data::Dataset DatasetFromRecords(std::vector<data::Record> records,
                                 const data::Dataset& source,
                                 data::Provenance provenance) {
  data::Dataset ds;
  ds.records = std::move(records);
  ds.num_labels = source.num_labels;
  ds.m = source.m;
  ds.provenance = provenance;
  return ds;
}

// Shadow gradient pairs for either the adversary's attack model or the
// defender's classifier, labeled per the configured attack kind.
std::vector<attacks::AttackPair> ShadowPairs(const GameConfig& config,
                                             const GameData& data,
                                             const attacks::GradientObserver& observe,
                                             const Rng& rng) {
  if (config.attack_kind == attacks::AttackKind::kUser)
    return attacks::GenUserTrainingSet(data.shadow_users, config.batch_size,
                                       config.n_shadow_pairs, observe, rng);
  if (data.shadow.provenance != data::Provenance::kShadow)
    throw std::logic_error("attack models may only train on the shadow split");
  attacks::PairGenConfig pair_config;
  pair_config.kind = config.attack_kind;
  pair_config.batch_size = config.batch_size;
  pair_config.n_pairs = config.n_shadow_pairs;
  pair_config.property_value = config.property_value;
  pair_config.bins = config.bins;
  return attacks::GenAttackTrainingSet(data.shadow, pair_config, observe, rng);
}

// The adv-perturb defender's gradient classifier f_phi, trained per round on
// public (shadow) gradient pairs at the same parameters the release uses.
estimators::Estimator TrainDefenderClassifier(const GameConfig& config,
                                              const GameData& data,
                                              const nn::ModelParameters& theta,
                                              const Rng& rng) {
  const std::vector<attacks::AttackPair> pairs = ShadowPairs(
      config, data, attacks::CleanObserver(theta), rng.Derive("pairs"));
  std::vector<std::vector<double>> xs;
  xs.reserve(pairs.size());
  std::vector<int> ys;
  ys.reserve(pairs.size());
  for (const auto& p : pairs) {
    xs.push_back(p.gradient);
    ys.push_back(p.label);
  }
  estimators::TrainConfig defender_config = config.defender;
  defender_config.seed = rng.Derive("train").key();
  const int classes = config.attack_kind == attacks::AttackKind::kUser
                          ? static_cast<int>(data.shadow_users.size())
                          : config.NumClasses();
  return estimators::Estimator::Train(xs, ys, classes, defender_config);
}

std::vector<int> SampleDistinct(int population, int count, Rng& rng) {
  std::vector<int> idx(population);
  std::iota(idx.begin(), idx.end(), 0);
  for (int j = 0; j < count; ++j)
    std::swap(idx[j], idx[j + rng.UniformInt(population - j)]);
  idx.resize(count);
  return idx;
}

}  // namespace

std::vector<int> GameConfig::ObservableRounds() const {
  if (!rounds.empty()) return rounds;
  std::vector<int> all(epochs);
  std::iota(all.begin(), all.end(), 1);
  return all;
}

int GameConfig::NumClasses() const {
  switch (attack_kind) {
    case attacks::AttackKind::kAttribute:
    case attacks::AttackKind::kProperty:
      return data_spec.m;
    case attacks::AttackKind::kDistribution:
      return bins.m_bins;
    case attacks::AttackKind::kUser:
      return uia_candidates;
  }
  throw std::logic_error("unknown attack kind");
}

void GameConfig::Validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (n_shadow_pairs < 2)
    throw std::invalid_argument("n_shadow_pairs must be >= 2");
  if (train_lr <= 0.0) throw std::invalid_argument("train_lr must be > 0");
  if (train_minibatch < 1)
    throw std::invalid_argument("train_minibatch must be >= 1");
  int prev = 0;
  for (const int r : rounds) {
    if (r < 1 || r > epochs)
      throw std::invalid_argument("observable rounds must lie in [1, epochs]");
    if (r <= prev)
      throw std::invalid_argument("observable rounds must strictly increase");
    prev = r;
  }
  defense.Validate();
  data_spec.Validate();
  if (attack_kind == attacks::AttackKind::kUser) {
    if (uia_candidates < 2)
      throw std::invalid_argument("uia_candidates must be >= 2");
    if (uia_candidates > n_train_users)
      throw std::invalid_argument("uia_candidates exceed the train users");
    if (n_shadow_users < 2)
      throw std::invalid_argument("n_shadow_users must be >= 2");
    if (users_total < n_train_users + n_shadow_users)
      throw std::invalid_argument("users_total too small for the partition");
    if (records_per_user < 1)
      throw std::invalid_argument("records_per_user must be >= 1");
    if (user_strength < 0.0)
      throw std::invalid_argument("user_strength must be >= 0");
  } else {
    if (dataset_size < 8) throw std::invalid_argument("dataset_size too small");
    if (shadow_size < 2) throw std::invalid_argument("shadow_size must be >= 2");
    if (train_fraction <= 0.0 || test_fraction <= 0.0 ||
        public_fraction <= 0.0 ||
        train_fraction + test_fraction + public_fraction > 1.0 + 1e-9)
      throw std::invalid_argument("split fractions must be positive and sum <= 1");
    if (attack_kind == attacks::AttackKind::kDistribution) {
      bins.Validate();
      if (property_value < 0 || property_value >= data_spec.m)
        throw std::invalid_argument("property_value outside sensitive range");
    }
  }
}

GameData PrepareData(const GameConfig& config, const data::Dataset* external) {
  const Rng master(config.master_seed);
  if (external != nullptr) external->Validate();
  GameData data;
  if (config.attack_kind == attacks::AttackKind::kUser) {
    const data::Dataset all =
        external != nullptr
            ? *external
            : data::SynthGenerateUsers(config.data_spec, config.users_total,
                                       config.records_per_user,
                                       config.user_strength);
    auto [train_users, shadow_users] =
        data::UserPartition(all, 1, config.n_train_users,
                            config.n_shadow_users,
                            master.Derive("user-split").key());
    std::set<int> used;
    std::vector<data::Record> train_records;
    for (const auto& group : train_users) {
      used.insert(group.user);
      train_records.insert(train_records.end(), group.records.begin(),
                           group.records.end());
    }
    for (const auto& group : shadow_users) used.insert(group.user);
    std::vector<data::Record> leftover;
    for (const auto& record : all.records)
      if (!used.contains(record.user)) leftover.push_back(record);
    data.train = DatasetFromRecords(std::move(train_records), all,
                                    data::Provenance::kTrain);
    data.test =
        DatasetFromRecords(std::move(leftover), all, data::Provenance::kTest);
    data.train_users = std::move(train_users);
    data.shadow_users = std::move(shadow_users);
    data.prior.assign(config.uia_candidates,
                      1.0 / static_cast<double>(config.uia_candidates));
    return data;
  }

  data::Dataset all = external != nullptr
                          ? *external
                          : data::SynthGenerate(config.data_spec,
                                                config.dataset_size);
  std::vector<double> empirical_prior;
  if (external != nullptr) {
    empirical_prior.assign(all.m, 0.0);
    for (const auto& record : all.records)
      empirical_prior[record.a] += 1.0 / static_cast<double>(all.records.size());
    for (int a = 0; a < all.m; ++a)
      if (empirical_prior[a] <= 0.0)
        throw std::invalid_argument(
            "external dataset has no records with sensitive value " +
            std::to_string(a));
  }
  if (config.attack_kind == attacks::AttackKind::kAttribute)
    all = data::AppendSensitiveOneHot(all);
  auto [train, test, pub] =
      data::Split(all, config.train_fraction, config.test_fraction,
                  config.public_fraction, master.Derive("split").key());
  data.shadow = data::BuildShadow(pub, config.shadow_size, /*balanced=*/true);
  data.train = std::move(train);
  data.test = std::move(test);
  if (config.attack_kind == attacks::AttackKind::kDistribution)
    data.prior.assign(config.bins.m_bins,
                      1.0 / static_cast<double>(config.bins.m_bins));
  else if (external != nullptr)
    data.prior = std::move(empirical_prior);
  else
    data.prior = config.data_spec.prior;
  return data;
}

nn::ModelParameters TrainOneEpoch(const nn::ModelParameters& theta,
                                  const data::Dataset& train,
                                  const defenses::DefenseMechanism& defense,
                                  double lr, int minibatch, Rng rng) {
  if (train.provenance != data::Provenance::kTrain)
    throw std::logic_error("utility training requires the train split");
  if (train.records.empty())
    throw std::invalid_argument("utility training on an empty split");
  if (lr <= 0.0) throw std::invalid_argument("lr must be > 0");
  if (minibatch < 1) throw std::invalid_argument("minibatch must be >= 1");

  nn::ModelParameters params = theta;
  const std::size_t n = train.records.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle = rng.Derive("shuffle");
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[shuffle.UniformInt(static_cast<int>(i))]);

  Rng vib_rng = rng.Derive("vib-noise");
  Rng dp_rng = rng.Derive("dpsgd");
  const bool is_vib = params.spec.vib.has_value();
  for (std::size_t begin = 0; begin < n;
       begin += static_cast<std::size_t>(minibatch)) {
    const std::size_t end =
        std::min(begin + static_cast<std::size_t>(minibatch), n);
    nn::Batch batch;
    for (std::size_t i = begin; i < end; ++i) {
      batch.xs.push_back(train.records[order[i]].x);
      batch.ys.push_back(train.records[order[i]].y);
    }
    nn::GradientVector grad;
    if (defense.kind == defenses::DefenseKind::kDpsgd) {
      grad = defenses::Dpsgd(nn::PerSampleGradients(params, batch),
                             defense.dpsgd_clip, defense.dpsgd_sigma, dp_rng);
    } else if (is_vib) {
      const nn::VibNoise noise =
          nn::VibNoise::Draw(vib_rng, batch.size(), params.spec.vib->latent_dim);
      grad = nn::LossAndGradient(params, batch, noise).grad;
    } else {
      grad = nn::LossAndGradient(params, batch).grad;
    }
    params = nn::SgdStep(params, grad, lr);
  }
  CheckFinite(params.flat, "model parameters after a training epoch");
  return params;
}

attacks::GradientObserver MakeObserver(const nn::ModelParameters& theta,
                                       const defenses::DefenseMechanism& defense,
                                       const estimators::Estimator* f_phi,
                                       bool targeted) {
  defense.Validate();
  const attacks::GradientObserver clean = attacks::CleanObserver(theta);
  switch (defense.kind) {
    case defenses::DefenseKind::kIdentity:
    case defenses::DefenseKind::kVib:
      // VIB defends by changing what the network is; its released gradient
      // is the plain gradient of the VIB loss.
      return clean;
    case defenses::DefenseKind::kPrune: {
      const double rate = defense.prune_rate;
      return [clean, rate](const nn::Batch& batch, int label, Rng rng) {
        return defenses::Prune(clean(batch, label, std::move(rng)), rate);
      };
    }
    case defenses::DefenseKind::kSign:
      return [clean](const nn::Batch& batch, int label, Rng rng) {
        return defenses::Sign(clean(batch, label, std::move(rng)));
      };
    case defenses::DefenseKind::kAdvPerturb: {
      if (f_phi == nullptr)
        throw std::invalid_argument(
            "adv-perturb observer needs the defender's classifier");
      const estimators::Estimator classifier = *f_phi;
      const double gamma = defense.adv_gamma;
      const double step = defense.adv_step;
      const int iters = defense.adv_iters;
      return [clean, classifier, gamma, step, iters, targeted](
                 const nn::Batch& batch, int label, Rng rng) {
        const nn::GradientVector g = clean(batch, label, rng);
        // Targeted mode (user games) descends toward a decoy class of the
        // defender's classifier; untargeted ascends away from the true one.
        const int direction_label =
            targeted ? rng.Derive("target").UniformInt(classifier.num_classes())
                     : label;
        const defenses::InputGradFn grad_fn =
            [&classifier](std::span<const double> x, int lbl) {
              return classifier.InputGradient(x, lbl);
            };
        return defenses::AdvPerturb(g, direction_label, grad_fn, gamma, step,
                                    iters, targeted);
      };
    }
    case defenses::DefenseKind::kDpsgd: {
      const nn::ModelParameters* params = &theta;
      const double clip = defense.dpsgd_clip;
      const double sigma = defense.dpsgd_sigma;
      return [params, clip, sigma](const nn::Batch& batch, int, Rng rng) {
        Rng noise_rng = rng.Derive("dpsgd");
        return defenses::Dpsgd(nn::PerSampleGradients(*params, batch), clip,
                               sigma, noise_rng);
      };
    }
  }
  throw std::logic_error("unknown defense kind");
}

double TaskAuroc(const nn::ModelParameters& theta, const data::Dataset& test) {
  if (test.num_labels != 2)
    throw std::invalid_argument("task auroc needs binary labels");
  if (test.records.empty())
    throw std::invalid_argument("task auroc on an empty split");
  const bool is_vib = theta.spec.vib.has_value();
  const std::vector<double> mean_latent(
      is_vib ? theta.spec.vib->latent_dim : 0, 0.0);
  std::vector<double> scores;
  scores.reserve(test.records.size());
  std::vector<int> labels;
  labels.reserve(test.records.size());
  for (const auto& record : test.records) {
    const std::vector<double> logits =
        is_vib ? nn::Forward(theta, record.x, mean_latent)
               : nn::Forward(theta, record.x);
    scores.push_back(1.0 / (1.0 + std::exp(logits[0] - logits[1])));
    labels.push_back(record.y);
  }
  return metrics::BinaryAuroc(scores, labels);
}

GameResult RunInferenceGame(const GameConfig& config,
                            const data::Dataset* external) {
  config.Validate();
  const GameData data = PrepareData(config, external);
  const std::vector<int> rounds = config.ObservableRounds();
  const Rng master(config.master_seed);
  const bool user_game = config.attack_kind == attacks::AttackKind::kUser;
  const int m = config.NumClasses();

  nn::NetworkSpec spec = config.network;
  if (config.defense.kind == defenses::DefenseKind::kVib &&
      !spec.vib.has_value())
    spec.vib = nn::VibConfig{config.defense.vib_latent_dim,
                             config.defense.vib_beta};
  spec.init_seed = master.Derive("init").key();
  spec.Validate();
  const int feature_dim = static_cast<int>(data.train.records.front().x.size());
  if (spec.input_dim() != feature_dim)
    throw std::invalid_argument(
        "network input width " + std::to_string(spec.input_dim()) +
        " does not match the data feature dimension " +
        std::to_string(feature_dim));

  GameResult result;
  result.rounds = rounds;
  result.prior = data.prior;

  result.theta.reserve(config.epochs + 1);
  result.theta.push_back(nn::InitNetwork(spec));
  for (int epoch = 1; epoch <= config.epochs; ++epoch)
    result.theta.push_back(TrainOneEpoch(
        result.theta.back(), data.train, config.defense, config.train_lr,
        config.train_minibatch,
        master.Derive("train-epoch").Derive(static_cast<std::uint64_t>(epoch))));

  // Per-round release observers and attack models, both at theta_{i-1}.
  std::vector<attacks::GradientObserver> observers;
  observers.reserve(rounds.size());
  for (const int round : rounds) {
    const nn::ModelParameters& theta_prev = result.theta[round - 1];
    std::optional<estimators::Estimator> f_phi;
    if (config.defense.kind == defenses::DefenseKind::kAdvPerturb)
      f_phi = TrainDefenderClassifier(
          config, data, theta_prev,
          master.Derive("defender").Derive(static_cast<std::uint64_t>(round)));
    observers.push_back(MakeObserver(theta_prev, config.defense,
                                     f_phi ? &*f_phi : nullptr, user_game));

    const attacks::GradientObserver train_observer =
        config.adaptive ? observers.back()
                        : attacks::CleanObserver(theta_prev);
    const std::vector<attacks::AttackPair> pairs = ShadowPairs(
        config, data, train_observer,
        master.Derive("shadow-pairs").Derive(static_cast<std::uint64_t>(round)));

    estimators::TrainConfig estimator_config = config.estimator;
    estimator_config.seed =
        master.Derive("attack-model").Derive(static_cast<std::uint64_t>(round))
            .key();

    RoundAttackModel model;
    model.round = round;
    switch (config.attack_kind) {
      case attacks::AttackKind::kAttribute:
      case attacks::AttackKind::kProperty:
        model.posterior = attacks::PosteriorModel::Train(
            pairs, config.reducer, estimator_config, m);
        break;
      case attacks::AttackKind::kDistribution:
        model.ordinal = attacks::OrdinalModel::Train(
            pairs, config.bins.m_bins, config.reducer, estimator_config);
        break;
      case attacks::AttackKind::kUser: {
        attacks::EncoderConfig encoder_config = config.encoder;
        encoder_config.seed = estimator_config.seed;
        model.encoder = attacks::UserEncoder::Train(pairs, config.reducer,
                                                    encoder_config);
        break;
      }
    }
    result.models.push_back(std::move(model));
  }

  // Trials: one (sensitive value, batch) draw observed at every round.
  const Rng trial_root = master.Derive("trial");
  result.trials.reserve(config.trials);
  for (int t = 0; t < config.trials; ++t) {
    const Rng trial_rng = trial_root.Derive(static_cast<std::uint64_t>(t));
    TrialRecord record;
    nn::Batch batch;
    std::vector<nn::Batch> candidate_batches;
    if (user_game) {
      Rng candidate_rng = trial_rng.Derive("candidates");
      const std::vector<int> candidates = SampleDistinct(
          static_cast<int>(data.train_users.size()), m, candidate_rng);
      Rng slot_rng = trial_rng.Derive("true-slot");
      record.true_a = slot_rng.UniformInt(m);
      Rng batch_rng = trial_rng.Derive("batch");
      batch = data::SampleUserBatch(data.train_users[candidates[record.true_a]],
                                    config.batch_size, batch_rng);
      candidate_batches.reserve(m);
      for (int j = 0; j < m; ++j) {
        Rng candidate_batch_rng =
            trial_rng.Derive("candidate-batch").Derive(static_cast<std::uint64_t>(j));
        candidate_batches.push_back(data::SampleUserBatch(
            data.train_users[candidates[j]], config.batch_size,
            candidate_batch_rng));
      }
    } else if (config.attack_kind == attacks::AttackKind::kDistribution) {
      Rng sensitive_rng = trial_rng.Derive("sensitive");
      record.true_a = data::SampleSensitive(data.prior, sensitive_rng);
      Rng alpha_rng = trial_rng.Derive("alpha");
      const double alpha = config.bins.SampleAlpha(record.true_a, alpha_rng);
      Rng batch_rng = trial_rng.Derive("batch");
      batch = data::SampleRatioBatch(data.train, config.property_value, alpha,
                                     config.batch_size, batch_rng);
    } else {
      Rng sensitive_rng = trial_rng.Derive("sensitive");
      record.true_a = data::SampleSensitive(data.prior, sensitive_rng);
      Rng batch_rng = trial_rng.Derive("batch");
      batch = data::SampleConditionalBatch(data.train, record.true_a,
                                           config.batch_size, batch_rng);
    }

    record.posteriors.reserve(rounds.size());
    for (std::size_t ri = 0; ri < rounds.size(); ++ri) {
      const int round = rounds[ri];
      Rng observe_rng =
          trial_rng.Derive("observe").Derive(static_cast<std::uint64_t>(round));
      const nn::GradientVector observed =
          observers[ri](batch, record.true_a, observe_rng);
      CheckFinite(observed, "the observed gradient at trial " +
                                std::to_string(t) + ", round " +
                                std::to_string(round));
      std::vector<double> posterior;
      if (user_game) {
        const Rng vib_rng = trial_rng.Derive("candidate-vib")
                                .Derive(static_cast<std::uint64_t>(round));
        posterior = attacks::UiaPosterior(*result.models[ri].encoder, observed,
                                          candidate_batches,
                                          result.theta[round - 1], &vib_rng);
      } else if (config.attack_kind == attacks::AttackKind::kDistribution) {
        posterior = result.models[ri].ordinal->Posterior(observed);
      } else {
        posterior = result.models[ri].posterior->Posterior(observed);
      }
      record.posteriors.push_back(std::move(posterior));
    }

    attacks::AggregateResult aggregate =
        attacks::MultiRoundAggregate(record.posteriors, data.prior);
    record.a_hat = aggregate.a_hat;
    record.log_scores = std::move(aggregate.log_scores);
    result.trials.push_back(std::move(record));
  }
  return result;
}

AttackEvaluation EvaluateAttack(const GameResult& result) {
  if (result.trials.empty())
    throw std::invalid_argument("attack evaluation needs at least one trial");
  AttackEvaluation eval;
  std::vector<int> truths;
  truths.reserve(result.trials.size());
  for (const auto& trial : result.trials) truths.push_back(trial.true_a);

  for (std::size_t ri = 0; ri < result.rounds.size(); ++ri) {
    std::vector<int> predictions;
    predictions.reserve(result.trials.size());
    std::vector<std::vector<double>> posteriors;
    posteriors.reserve(result.trials.size());
    for (const auto& trial : result.trials) {
      posteriors.push_back(trial.posteriors[ri]);
      predictions.push_back(estimators::ArgmaxLowest(trial.posteriors[ri]));
    }
    eval.per_round.push_back(
        metrics::BuildReport(predictions, truths, posteriors, result.prior));
  }

  std::vector<int> predictions;
  predictions.reserve(result.trials.size());
  std::vector<std::vector<double>> fused;
  fused.reserve(result.trials.size());
  for (const auto& trial : result.trials) {
    predictions.push_back(trial.a_hat);
    fused.push_back(SoftmaxOf(trial.log_scores));
  }
  eval.multi_round =
      metrics::BuildReport(predictions, truths, fused, result.prior);
  return eval;
}

std::vector<DefenseCell> RunDefenseEval(
    const GameConfig& base, const std::vector<defenses::DefenseProfile>& profiles,
    const data::Dataset* external) {
  std::vector<DefenseCell> cells;
  cells.reserve(2 * profiles.size());
  for (const auto& profile : profiles)
    for (const bool adaptive : {false, true}) {
      GameConfig config = base;
      config.defense = profile.mechanism;
      config.adaptive = adaptive;
      DefenseCell cell;
      cell.name = profile.name;
      cell.mechanism = profile.mechanism;
      cell.adaptive = adaptive;
      cell.eval = EvaluateAttack(RunInferenceGame(config, external));
      cells.push_back(std::move(cell));
    }
  return cells;
}

std::vector<SweepPoint> PrivacyUtilitySweep(const GameConfig& base,
                                            const data::Dataset* external) {
  std::vector<SweepPoint> points;
  for (const auto& profile : defenses::SweepProfiles()) {
    GameConfig config = base;
    config.defense = profile.mechanism;
    config.adaptive = true;
    const GameResult result = RunInferenceGame(config, external);
    const GameData data = PrepareData(config, external);
    SweepPoint point;
    point.name = profile.name;
    point.mechanism = profile.mechanism;
    point.advantage = EvaluateAttack(result).multi_round.advantage;
    point.task_auroc = TaskAuroc(result.theta.back(), data.test);
    points.push_back(std::move(point));
  }
  return points;
}

}  // namespace gradlab::game
