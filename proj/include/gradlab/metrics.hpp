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

#ifndef GRADLAB_METRICS_HPP_
#define GRADLAB_METRICS_HPP_

#include <span>
#include <utility>
#include <vector>

namespace gradlab::metrics {

struct MetricsReport {
  double asr = 0.0;
  double auroc = 0.0;
  double advantage = 0.0;
  double tpr_at_1pct_fpr = 0.0;
  int trials = 0;
  double baseline = 0.0;  // p*, the best uninformed guess rate
};

// Fraction of exact matches. Throws on length mismatch or empty input.
double Asr(std::span<const int> predictions, std::span<const int> truths);

// Rank-based AUROC for binary labels in {0, 1}; tied scores contribute 1/2.
// Equals trapezoidal integration of the empirical ROC step curve. Throws if
// either class is absent.
double BinaryAuroc(std::span<const double> scores, std::span<const int> labels);

// Unweighted mean of one-vs-rest AUROCs over the classes present in `labels`,
// scoring class c by posterior mass posteriors[i][c]. For two classes this
// equals BinaryAuroc on the positive-class mass. Throws if fewer than two
// classes are present.
double MacroAuroc(const std::vector<std::vector<double>>& posteriors,
                  std::span<const int> labels);

// max(p - p_star, 0) / (1 - p_star). Throws if p_star = 1 or inputs leave
// [0, 1].
double Advantage(double p, double p_star);

// Largest TPR over empirical ROC operating points whose FPR <= fpr_target,
// including the predict-nothing point (0, 0). Throws if either class is
// absent.
double TprAtFpr(std::span<const double> scores, std::span<const int> labels,
                double fpr_target = 0.01);

// Macro one-vs-rest variant, mirroring MacroAuroc.
double MacroTprAtFpr(const std::vector<std::vector<double>>& posteriors,
                     std::span<const int> labels, double fpr_target = 0.01);

// Exact two-sided binomial interval via Beta-quantile inversion.
std::pair<double, double> ClopperPearson(int successes, int n,
                                         double confidence = 0.95);

// Assembles the report for one set of trials: predictions and posteriors per
// trial, true values, and the sensitive prior (baseline p* = max prior mass).
MetricsReport BuildReport(std::span<const int> predictions,
                          std::span<const int> truths,
                          const std::vector<std::vector<double>>& posteriors,
                          std::span<const double> prior);

}  // namespace gradlab::metrics

#endif  // GRADLAB_METRICS_HPP_
