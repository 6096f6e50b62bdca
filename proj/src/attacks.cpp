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

#include "gradlab/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <utility>

#include "gradlab/optim.hpp"

namespace gradlab::attacks {
namespace {

constexpr double kLogFloor = 1e-12;

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double Norm(std::span<const double> v) { return std::sqrt(Dot(v, v)); }

// Orthonormalizes `rows` (each of length n) in place by modified
// Gram-Schmidt; a row whose residual collapses is replaced with a fresh
// random direction so the basis stays full-rank.
void Orthonormalize(std::vector<std::vector<double>>& rows, Rng& fresh) {
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      for (std::size_t i = 0; i < j; ++i) {
        const double c = Dot(rows[j], rows[i]);
        for (std::size_t t = 0; t < rows[j].size(); ++t)
          rows[j][t] -= c * rows[i][t];
      }
      const double norm = Norm(rows[j]);
      if (norm > 1e-10) {
        for (double& v : rows[j]) v /= norm;
        break;
      }
      if (attempt == 63)
        throw std::runtime_error("basis orthonormalization failed");
      for (double& v : rows[j]) v = fresh.Normal();
    }
  }
}

std::vector<double> SoftmaxOf(std::vector<double> scores) {
  double m = scores[0];
  for (const double v : scores) m = std::max(m, v);
  double total = 0.0;
  for (double& v : scores) {
    v = std::exp(v - m);
    total += v;
  }
  for (double& v : scores) v /= total;
  return scores;
}

}  // namespace

AttackKind AttackKindFromName(const std::string& name) {
  if (name == "aia") return AttackKind::kAttribute;
  if (name == "pia") return AttackKind::kProperty;
  if (name == "dia") return AttackKind::kDistribution;
  if (name == "uia") return AttackKind::kUser;
  throw std::invalid_argument("unknown attack kind: " + name);
}

const char* AttackKindName(AttackKind kind) {
  switch (kind) {
    case AttackKind::kAttribute: return "aia";
    case AttackKind::kProperty: return "pia";
    case AttackKind::kDistribution: return "dia";
    case AttackKind::kUser: return "uia";
  }
  throw std::invalid_argument("unknown attack kind");
}

FeatureReducer FeatureReducer::MaxPool(int kernel) {
  if (kernel < 1) throw std::invalid_argument("max-pool kernel must be >= 1");
  FeatureReducer r;
  r.kind_ = ReducerKind::kMaxPool;
  r.kernel_ = kernel;
  return r;
}

FeatureReducer FeatureReducer::Pca(int dims) {
  if (dims < 1) throw std::invalid_argument("pca dims must be >= 1");
  FeatureReducer r;
  r.kind_ = ReducerKind::kPca;
  r.dims_ = dims;
  return r;
}

void FeatureReducer::Fit(const std::vector<std::vector<double>>& samples,
                         Rng rng) {
  if (kind_ == ReducerKind::kMaxPool) return;
  if (samples.size() < 2)
    throw std::invalid_argument("pca fit needs at least 2 samples");
  const std::size_t n = samples[0].size();
  for (const auto& s : samples)
    if (s.size() != n) throw std::invalid_argument("pca fit on ragged samples");
  if (static_cast<std::size_t>(dims_) > n)
    throw std::invalid_argument("pca dims exceed the input dimension");

  mean_.assign(n, 0.0);
  for (const auto& s : samples)
    for (std::size_t t = 0; t < n; ++t) mean_[t] += s[t];
  for (double& m : mean_) m /= static_cast<double>(samples.size());

  std::vector<std::vector<double>> centered(samples.size(),
                                            std::vector<double>(n));
  for (std::size_t r = 0; r < samples.size(); ++r)
    for (std::size_t t = 0; t < n; ++t)
      centered[r][t] = samples[r][t] - mean_[t];

  Rng init = rng.Derive("pca-init");
  Rng fresh = rng.Derive("pca-degenerate");
  std::vector<std::vector<double>> basis(dims_, std::vector<double>(n));
  for (auto& row : basis)
    for (double& v : row) v = init.Normal();
  Orthonormalize(basis, fresh);

  // Orthogonal iteration on the sample covariance, applied without forming
  // it: Cov * b = mean_r (c_r . b) c_r.
  std::vector<std::vector<double>> next(dims_, std::vector<double>(n));
  for (int iter = 0; iter < 150; ++iter) {
    for (int j = 0; j < dims_; ++j) {
      std::fill(next[j].begin(), next[j].end(), 0.0);
      for (const auto& c : centered) {
        const double proj = Dot(c, basis[j]);
        for (std::size_t t = 0; t < n; ++t) next[j][t] += proj * c[t];
      }
      for (double& v : next[j]) v /= static_cast<double>(centered.size());
    }
    Orthonormalize(next, fresh);
    double delta = 0.0;
    for (int j = 0; j < dims_; ++j)
      delta = std::max(delta, 1.0 - std::abs(Dot(next[j], basis[j])));
    basis.swap(next);
    if (delta < 1e-13) break;
  }

  // Sign canonicalization: the largest-magnitude entry of each component is
  // positive (ties to the lowest index).
  for (auto& row : basis) {
    std::size_t arg = 0;
    for (std::size_t t = 1; t < n; ++t)
      if (std::abs(row[t]) > std::abs(row[arg])) arg = t;
    if (row[arg] < 0.0)
      for (double& v : row) v = -v;
  }

  basis_.clear();
  basis_.reserve(static_cast<std::size_t>(dims_) * n);
  for (const auto& row : basis)
    basis_.insert(basis_.end(), row.begin(), row.end());
  input_dim_ = static_cast<int>(n);
  fitted_ = true;
}

std::vector<double> FeatureReducer::Reduce(std::span<const double> g) const {
  if (kind_ == ReducerKind::kMaxPool) {
    std::vector<double> out;
    out.reserve((g.size() + kernel_ - 1) / kernel_);
    for (std::size_t begin = 0; begin < g.size();
         begin += static_cast<std::size_t>(kernel_)) {
      const std::size_t end =
          std::min(begin + static_cast<std::size_t>(kernel_), g.size());
      double m = g[begin];
      for (std::size_t t = begin + 1; t < end; ++t) m = std::max(m, g[t]);
      out.push_back(m);
    }
    return out;
  }
  if (!fitted_) throw std::logic_error("pca reducer used before Fit");
  if (g.size() != static_cast<std::size_t>(input_dim_))
    throw std::invalid_argument("pca input dimension mismatch");
  std::vector<double> out(dims_, 0.0);
  for (int j = 0; j < dims_; ++j) {
    const double* row = basis_.data() + static_cast<std::size_t>(j) * input_dim_;
    double s = 0.0;
    for (int t = 0; t < input_dim_; ++t) s += (g[t] - mean_[t]) * row[t];
    out[j] = s;
  }
  return out;
}

int FeatureReducer::output_dim(int input_dim) const {
  if (kind_ == ReducerKind::kMaxPool)
    return (input_dim + kernel_ - 1) / kernel_;
  return dims_;
}

std::span<const double> FeatureReducer::component(int j) const {
  if (kind_ != ReducerKind::kPca || !fitted_)
    throw std::logic_error("component only defined for a fitted pca reducer");
  if (j < 0 || j >= dims_) throw std::out_of_range("component index");
  return {basis_.data() + static_cast<std::size_t>(j) * input_dim_,
          static_cast<std::size_t>(input_dim_)};
}

GradientObserver CleanObserver(const nn::ModelParameters& theta) {
  const nn::ModelParameters* params = &theta;
  return [params](const nn::Batch& batch, int /*label*/, Rng rng) {
    if (params->spec.vib.has_value()) {
      Rng noise_rng = rng.Derive("vib-noise");
      const nn::VibNoise noise = nn::VibNoise::Draw(
          noise_rng, batch.size(), params->spec.vib->latent_dim);
      return nn::LossAndGradient(*params, batch, noise).grad;
    }
    return nn::LossAndGradient(*params, batch).grad;
  };
}

std::vector<AttackPair> GenAttackTrainingSet(const data::Dataset& shadow,
                                             const PairGenConfig& config,
                                             const GradientObserver& observe,
                                             const Rng& rng) {
  if (config.kind == AttackKind::kUser)
    throw std::invalid_argument(
        "user pairs come from GenUserTrainingSet(shadow_users, ...)");
  if (config.n_pairs < 0) throw std::invalid_argument("n_pairs must be >= 0");
  if (config.batch_size < 1)
    throw std::invalid_argument("batch_size must be >= 1");
  if (config.kind == AttackKind::kDistribution) config.bins.Validate();

  const Rng pair_root = rng.Derive("pair");
  std::vector<AttackPair> pairs;
  pairs.reserve(config.n_pairs);
  for (int i = 0; i < config.n_pairs; ++i) {
    const Rng pair_rng = pair_root.Derive(static_cast<std::uint64_t>(i));
    Rng batch_rng = pair_rng.Derive("batch");
    Rng observe_rng = pair_rng.Derive("observe");
    int label = 0;
    nn::Batch batch;
    if (config.kind == AttackKind::kDistribution) {
      label = i % config.bins.m_bins;
      Rng alpha_rng = pair_rng.Derive("alpha");
      const double alpha = config.bins.SampleAlpha(label, alpha_rng);
      batch = data::SampleRatioBatch(shadow, config.property_value, alpha,
                                     config.batch_size, batch_rng);
    } else {
      label = i % shadow.m;
      batch = data::SampleConditionalBatch(shadow, label, config.batch_size,
                                           batch_rng);
    }
    pairs.push_back({observe(batch, label, observe_rng), label});
  }
  return pairs;
}

std::vector<AttackPair> GenUserTrainingSet(
    const std::vector<data::UserGroup>& shadow_users, int batch_size,
    int n_pairs, const GradientObserver& observe, const Rng& rng) {
  if (shadow_users.size() < 2)
    throw std::invalid_argument("user pairs need at least 2 shadow users");
  if (n_pairs < 0) throw std::invalid_argument("n_pairs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");

  const Rng pair_root = rng.Derive("pair");
  std::vector<AttackPair> pairs;
  pairs.reserve(n_pairs);
  for (int i = 0; i < n_pairs; ++i) {
    const Rng pair_rng = pair_root.Derive(static_cast<std::uint64_t>(i));
    Rng batch_rng = pair_rng.Derive("batch");
    Rng observe_rng = pair_rng.Derive("observe");
    const int label = i % static_cast<int>(shadow_users.size());
    const nn::Batch batch =
        data::SampleUserBatch(shadow_users[label], batch_size, batch_rng);
    pairs.push_back({observe(batch, label, observe_rng), label});
  }
  return pairs;
}

PosteriorModel PosteriorModel::Train(const std::vector<AttackPair>& pairs,
                                     FeatureReducer reducer,
                                     const estimators::TrainConfig& config,
                                     int num_classes) {
  if (pairs.empty()) throw std::invalid_argument("no training pairs");
  if (!reducer.fitted()) {
    std::vector<std::vector<double>> gradients;
    gradients.reserve(pairs.size());
    for (const auto& p : pairs) gradients.push_back(p.gradient);
    reducer.Fit(gradients, Rng(config.seed).Derive("pca-fit"));
  }
  std::vector<std::vector<double>> xs;
  xs.reserve(pairs.size());
  std::vector<int> ys;
  ys.reserve(pairs.size());
  for (const auto& p : pairs) {
    xs.push_back(reducer.Reduce(p.gradient));
    ys.push_back(p.label);
  }
  estimators::Estimator estimator =
      estimators::Estimator::Train(xs, ys, num_classes, config);
  return PosteriorModel(std::move(reducer), std::move(estimator));
}

std::vector<double> PosteriorModel::Posterior(std::span<const double> g) const {
  return estimator_.Posterior(reducer_.Reduce(g));
}

std::vector<double> OrdinalRecombine(std::span<const double> exceed_probs) {
  if (exceed_probs.size() < 2)
    throw std::invalid_argument("ordinal recombination needs >= 2 thresholds");
  const std::size_t m = exceed_probs.size() + 1;
  std::vector<double> probs(m);
  probs[0] = 1.0 - exceed_probs[0];
  for (std::size_t j = 1; j + 1 < m; ++j)
    probs[j] = exceed_probs[j - 1] - exceed_probs[j];
  probs[m - 1] = exceed_probs[m - 2];
  double total = 0.0;
  for (double& p : probs) {
    p = std::max(p, 0.0);
    total += p;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::fill(probs.begin(), probs.end(), 1.0 / static_cast<double>(m));
    return probs;
  }
  for (double& p : probs) p /= total;
  return probs;
}

OrdinalModel OrdinalModel::Train(const std::vector<AttackPair>& pairs,
                                 int num_bins, FeatureReducer reducer,
                                 const estimators::TrainConfig& config) {
  if (num_bins < 3)
    throw std::invalid_argument("ordinal classification needs >= 3 bins");
  if (pairs.empty()) throw std::invalid_argument("no training pairs");
  for (const auto& p : pairs)
    if (p.label < 0 || p.label >= num_bins)
      throw std::invalid_argument("pair label outside bin range");
  if (!reducer.fitted()) {
    std::vector<std::vector<double>> gradients;
    gradients.reserve(pairs.size());
    for (const auto& p : pairs) gradients.push_back(p.gradient);
    reducer.Fit(gradients, Rng(config.seed).Derive("pca-fit"));
  }

  OrdinalModel model;
  model.num_bins_ = num_bins;
  const Rng seed_root = Rng(config.seed).Derive("ordinal");
  for (int threshold = 1; threshold < num_bins; ++threshold) {
    std::vector<AttackPair> relabeled = pairs;
    for (auto& p : relabeled) p.label = p.label >= threshold ? 1 : 0;
    estimators::TrainConfig binary_config = config;
    binary_config.seed =
        seed_root.Derive(static_cast<std::uint64_t>(threshold)).key();
    model.binaries_.push_back(
        PosteriorModel::Train(relabeled, reducer, binary_config, 2));
  }
  return model;
}

std::vector<double> OrdinalModel::Posterior(std::span<const double> g) const {
  std::vector<double> exceed(binaries_.size());
  for (std::size_t i = 0; i < binaries_.size(); ++i)
    exceed[i] = binaries_[i].Posterior(g)[1];
  return OrdinalRecombine(exceed);
}

UserEncoder UserEncoder::Train(const std::vector<AttackPair>& user_pairs,
                               FeatureReducer reducer,
                               const EncoderConfig& config) {
  if (user_pairs.empty()) throw std::invalid_argument("no training pairs");
  if (config.embedding_dim < 1 || config.hidden < 1)
    throw std::invalid_argument("encoder widths must be >= 1");
  int num_users = 0;
  std::set<int> present;
  for (const auto& p : user_pairs) {
    if (p.label < 0) throw std::invalid_argument("negative user label");
    num_users = std::max(num_users, p.label + 1);
    present.insert(p.label);
  }
  if (present.size() < 2)
    throw std::invalid_argument("user encoder needs >= 2 shadow users");

  UserEncoder encoder;
  if (!reducer.fitted()) {
    std::vector<std::vector<double>> gradients;
    gradients.reserve(user_pairs.size());
    for (const auto& p : user_pairs) gradients.push_back(p.gradient);
    reducer.Fit(gradients, Rng(config.seed).Derive("pca-fit"));
  }
  encoder.reducer_ = std::move(reducer);

  const std::size_t n = user_pairs.size();
  std::vector<std::vector<double>> reduced;
  reduced.reserve(n);
  for (const auto& p : user_pairs)
    reduced.push_back(encoder.reducer_.Reduce(p.gradient));
  const int dim = static_cast<int>(reduced[0].size());

  encoder.mean_.assign(dim, 0.0);
  encoder.inv_std_.assign(dim, 0.0);
  for (const auto& x : reduced)
    for (int c = 0; c < dim; ++c) encoder.mean_[c] += x[c];
  for (double& m : encoder.mean_) m /= static_cast<double>(n);
  for (const auto& x : reduced)
    for (int c = 0; c < dim; ++c) {
      const double d = x[c] - encoder.mean_[c];
      encoder.inv_std_[c] += d * d;
    }
  for (double& v : encoder.inv_std_)
    v = 1.0 / std::max(std::sqrt(v / static_cast<double>(n)), 1e-8);

  std::vector<std::vector<double>> standardized(n, std::vector<double>(dim));
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < dim; ++c)
      standardized[i][c] = (reduced[i][c] - encoder.mean_[c]) *
                           encoder.inv_std_[c];

  // Encoder plus linear classification head, trained end-to-end with
  // cross-entropy over the shadow users.
  nn::NetworkSpec spec;
  spec.layer_widths = {dim, config.hidden, config.embedding_dim, num_users};
  spec.init_seed = Rng(config.seed).Derive("encoder-init").key();
  nn::ModelParameters params = nn::InitNetwork(spec);

  optim::Adam adam(params.flat.size(), config.lr);
  Rng shuffle_rng = Rng(config.seed).Derive("encoder-shuffle");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  const std::size_t batch_size =
      static_cast<std::size_t>(std::max(1, config.batch_size));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1],
                order[shuffle_rng.UniformInt(static_cast<int>(i))]);
    for (std::size_t begin = 0; begin < n; begin += batch_size) {
      const std::size_t end = std::min(begin + batch_size, n);
      nn::Batch batch;
      for (std::size_t i = begin; i < end; ++i) {
        batch.xs.push_back(standardized[order[i]]);
        batch.ys.push_back(user_pairs[order[i]].label);
      }
      nn::LossGrad lg = nn::LossAndGradient(params, batch);
      if (config.weight_decay > 0.0)
        for (std::size_t i = 0; i < lg.grad.size(); ++i)
          lg.grad[i] += config.weight_decay * params.flat[i];
      adam.Step(params.flat, lg.grad);
    }
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> logits = nn::Forward(params, standardized[i]);
    if (estimators::ArgmaxLowest(logits) == user_pairs[i].label) ++correct;
  }
  encoder.train_accuracy_ = static_cast<double>(correct) /
                            static_cast<double>(n);

  // Keep the encoder layers; the classification head is dropped.
  const nn::ModelShape shape(spec);
  for (std::size_t l = 0; l + 1 < shape.layers().size(); ++l) {
    const nn::LayerShape& ls = shape.layers()[l];
    Layer layer;
    layer.in = ls.in;
    layer.out = ls.out;
    layer.relu = ls.relu;
    layer.w.assign(params.flat.begin() + ls.w_offset,
                   params.flat.begin() + ls.w_offset +
                       static_cast<std::size_t>(ls.out) * ls.in);
    layer.b.assign(params.flat.begin() + ls.b_offset,
                   params.flat.begin() + ls.b_offset + ls.out);
    encoder.layers_.push_back(std::move(layer));
  }
  encoder.embedding_dim_ = config.embedding_dim;
  return encoder;
}

std::vector<double> UserEncoder::Embed(std::span<const double> g) const {
  if (layers_.empty()) throw std::logic_error("encoder used before Train");
  std::vector<double> h = reducer_.Reduce(g);
  if (h.size() != mean_.size())
    throw std::invalid_argument("encoder input dimension mismatch");
  for (std::size_t c = 0; c < h.size(); ++c)
    h[c] = (h[c] - mean_[c]) * inv_std_[c];
  for (const Layer& layer : layers_) {
    std::vector<double> out(layer.out);
    for (int r = 0; r < layer.out; ++r) {
      double s = layer.b[r];
      const double* row = layer.w.data() + static_cast<std::size_t>(r) *
                                               layer.in;
      for (int c = 0; c < layer.in; ++c) s += row[c] * h[c];
      out[r] = layer.relu ? std::max(s, 0.0) : s;
    }
    h = std::move(out);
  }
  return h;
}

std::vector<double> UiaPosteriorFromEmbeddings(
    std::span<const double> observed,
    const std::vector<std::vector<double>>& candidates) {
  if (candidates.size() < 2)
    throw std::invalid_argument("need >= 2 candidates");
  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].size() != observed.size())
      throw std::invalid_argument("embedding dimension mismatch");
    double d2 = 0.0;
    for (std::size_t t = 0; t < observed.size(); ++t) {
      const double d = candidates[i][t] - observed[t];
      d2 += d * d;
    }
    scores[i] = -std::sqrt(d2);
  }
  return SoftmaxOf(std::move(scores));
}

std::vector<double> UiaPosterior(const UserEncoder& encoder,
                                 std::span<const double> g_observed,
                                 const std::vector<nn::Batch>& candidate_batches,
                                 const nn::ModelParameters& theta,
                                 const Rng* vib_rng) {
  if (candidate_batches.size() < 2)
    throw std::invalid_argument("need >= 2 candidate batches");
  if (theta.spec.vib.has_value() && vib_rng == nullptr)
    throw std::invalid_argument(
        "candidate gradients at a vib network need an rng");
  std::vector<std::vector<double>> embeddings;
  embeddings.reserve(candidate_batches.size());
  for (std::size_t i = 0; i < candidate_batches.size(); ++i) {
    nn::GradientVector g;
    if (theta.spec.vib.has_value()) {
      Rng noise_rng =
          vib_rng->Derive("candidate").Derive(static_cast<std::uint64_t>(i));
      const nn::VibNoise noise =
          nn::VibNoise::Draw(noise_rng, candidate_batches[i].size(),
                             theta.spec.vib->latent_dim);
      g = nn::LossAndGradient(theta, candidate_batches[i], noise).grad;
    } else {
      g = nn::LossAndGradient(theta, candidate_batches[i]).grad;
    }
    embeddings.push_back(encoder.Embed(g));
  }
  return UiaPosteriorFromEmbeddings(encoder.Embed(g_observed), embeddings);
}

AggregateResult MultiRoundAggregate(
    const std::vector<std::vector<double>>& round_posteriors,
    std::span<const double> prior) {
  if (round_posteriors.empty())
    throw std::invalid_argument("need at least one round posterior");
  const std::size_t m = prior.size();
  if (m < 2) throw std::invalid_argument("prior needs >= 2 classes");
  for (const double p : prior)
    if (!(p > 0.0))
      throw std::invalid_argument("prior must be strictly positive");
  for (const auto& post : round_posteriors)
    if (post.size() != m)
      throw std::invalid_argument("posterior length mismatch");

  AggregateResult result;
  result.log_scores.assign(m, 0.0);
  for (const auto& post : round_posteriors)
    for (std::size_t a = 0; a < m; ++a)
      result.log_scores[a] += std::log(std::max(post[a], kLogFloor));
  const double rounds = static_cast<double>(round_posteriors.size());
  for (std::size_t a = 0; a < m; ++a)
    result.log_scores[a] -= (rounds - 1.0) * std::log(prior[a]);
  result.a_hat = estimators::ArgmaxLowest(result.log_scores);
  return result;
}

AttackConfig AdaptiveWrap(AttackConfig config) {
  config.adaptive = true;
  return config;
}

}  // namespace gradlab::attacks
