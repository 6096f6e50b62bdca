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

#include "gradlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include <boost/math/distributions/beta.hpp>

namespace gradlab::metrics {
namespace {

void CheckBinaryInput(std::span<const double> scores,
                      std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("scores/labels length mismatch");
  if (scores.empty()) throw std::invalid_argument("empty input");
  bool has_pos = false, has_neg = false;
  for (const int y : labels) {
    if (y == 1)
      has_pos = true;
    else if (y == 0)
      has_neg = true;
    else
      throw std::invalid_argument("binary labels must be 0 or 1");
  }
  if (!has_pos || !has_neg)
    throw std::invalid_argument("both classes must be present");
}

std::set<int> PresentClasses(std::span<const int> labels) {
  std::set<int> classes(labels.begin(), labels.end());
  if (classes.size() < 2)
    throw std::invalid_argument("need at least two classes present");
  return classes;
}

void CheckPosteriors(const std::vector<std::vector<double>>& posteriors,
                     std::span<const int> labels) {
  if (posteriors.size() != labels.size())
    throw std::invalid_argument("posteriors/labels length mismatch");
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= static_cast<int>(posteriors[i].size()))
      throw std::invalid_argument("label outside posterior support");
    if (posteriors[i].size() != posteriors[0].size())
      throw std::invalid_argument("ragged posteriors");
  }
}

std::vector<int> OneVsRest(std::span<const int> labels, int positive) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    out[i] = labels[i] == positive ? 1 : 0;
  return out;
}

std::vector<double> ClassScores(
    const std::vector<std::vector<double>>& posteriors, int c) {
  std::vector<double> out(posteriors.size());
  for (std::size_t i = 0; i < posteriors.size(); ++i) out[i] = posteriors[i][c];
  return out;
}

}  // namespace

double Asr(std::span<const int> predictions, std::span<const int> truths) {
  if (predictions.size() != truths.size())
    throw std::invalid_argument("predictions/truths length mismatch");
  if (predictions.empty()) throw std::invalid_argument("empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    hits += predictions[i] == truths[i];
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double BinaryAuroc(std::span<const double> scores,
                   std::span<const int> labels) {
  CheckBinaryInput(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney: sum of average ranks of the positives (ties share ranks).
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] == 1) {
        rank_sum_pos += avg_rank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  const double u = rank_sum_pos -
                   static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double MacroAuroc(const std::vector<std::vector<double>>& posteriors,
                  std::span<const int> labels) {
  CheckPosteriors(posteriors, labels);
  double total = 0.0;
  int evaluated = 0;
  for (const int c : PresentClasses(labels)) {
    total += BinaryAuroc(ClassScores(posteriors, c), OneVsRest(labels, c));
    ++evaluated;
  }
  return total / evaluated;
}

double Advantage(double p, double p_star) {
  if (p < 0.0 || p > 1.0 || p_star < 0.0 || p_star > 1.0)
    throw std::invalid_argument("rates must lie in [0, 1]");
  if (p_star == 1.0) throw std::invalid_argument("baseline rate must be < 1");
  return std::max(p - p_star, 0.0) / (1.0 - p_star);
}

double TprAtFpr(std::span<const double> scores, std::span<const int> labels,
                double fpr_target) {
  CheckBinaryInput(scores, labels);
  if (fpr_target < 0.0 || fpr_target > 1.0)
    throw std::invalid_argument("fpr_target must lie in [0, 1]");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double n_pos = 0.0, n_neg = 0.0;
  for (const int y : labels) (y == 1 ? n_pos : n_neg) += 1.0;
  // Walk the ROC step curve over distinct thresholds; the predict-nothing
  // point (FPR 0, TPR 0) always qualifies.
  double best = 0.0;
  double tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1.0;
      ++j;
    }
    if (fp / n_neg <= fpr_target) best = std::max(best, tp / n_pos);
    i = j;
  }
  return best;
}

double MacroTprAtFpr(const std::vector<std::vector<double>>& posteriors,
                     std::span<const int> labels, double fpr_target) {
  CheckPosteriors(posteriors, labels);
  double total = 0.0;
  int evaluated = 0;
  for (const int c : PresentClasses(labels)) {
    total += TprAtFpr(ClassScores(posteriors, c), OneVsRest(labels, c),
                      fpr_target);
    ++evaluated;
  }
  return total / evaluated;
}

std::pair<double, double> ClopperPearson(int successes, int n,
                                         double confidence) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (successes < 0 || successes > n)
    throw std::invalid_argument("successes must lie in [0, n]");
  if (confidence <= 0.0 || confidence >= 1.0)
    throw std::invalid_argument("confidence must lie in (0, 1)");
  const double alpha = 1.0 - confidence;
  double lo = 0.0, hi = 1.0;
  if (successes > 0) {
    const boost::math::beta_distribution<double> dist(successes,
                                                      n - successes + 1);
    lo = boost::math::quantile(dist, alpha / 2.0);
  }
  if (successes < n) {
    const boost::math::beta_distribution<double> dist(successes + 1,
                                                      n - successes);
    hi = boost::math::quantile(dist, 1.0 - alpha / 2.0);
  }
  return {lo, hi};
}

MetricsReport BuildReport(std::span<const int> predictions,
                          std::span<const int> truths,
                          const std::vector<std::vector<double>>& posteriors,
                          std::span<const double> prior) {
  if (prior.empty()) throw std::invalid_argument("empty prior");
  CheckPosteriors(posteriors, truths);
  MetricsReport report;
  report.trials = static_cast<int>(truths.size());
  report.baseline = *std::max_element(prior.begin(), prior.end());
  report.asr = Asr(predictions, truths);
  report.advantage = Advantage(report.asr, report.baseline);
  const std::set<int> classes(truths.begin(), truths.end());
  if (classes.size() < 2) {
    // Degenerate truth set: ranking metrics are undefined; report chance.
    report.auroc = 0.5;
    report.tpr_at_1pct_fpr = 0.0;
    return report;
  }
  if (posteriors[0].size() == 2) {
    const std::vector<double> s = ClassScores(posteriors, 1);
    const std::vector<int> y(truths.begin(), truths.end());
    report.auroc = BinaryAuroc(s, y);
    report.tpr_at_1pct_fpr = TprAtFpr(s, y, 0.01);
  } else {
    report.auroc = MacroAuroc(posteriors, truths);
    report.tpr_at_1pct_fpr = MacroTprAtFpr(posteriors, truths, 0.01);
  }
  return report;
}

}  // namespace gradlab::metrics
