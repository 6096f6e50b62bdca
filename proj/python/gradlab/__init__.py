# Copyright 2026 The GradLab Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Gradient-leakage laboratory: inference games, defenses, and audits."""

from gradlab._core import (
    __version__,
    advantage_upper_bound,
    bayes_error,
    binary_auroc,
    binary_entropy,
    chi_mean,
    clopper_pearson,
    empirical_epsilon,
    entropy,
    fano_error_lower_bound,
    multi_round_aggregate,
    mutual_information_exact,
    ordinal_recombine,
    parse_report_csv,
    run_experiment,
    run_experiment_text,
    selftest,
    theoretical_epsilon,
)

__all__ = [
    "__version__",
    "advantage_upper_bound",
    "bayes_error",
    "binary_auroc",
    "binary_entropy",
    "chi_mean",
    "clopper_pearson",
    "empirical_epsilon",
    "entropy",
    "fano_error_lower_bound",
    "multi_round_aggregate",
    "mutual_information_exact",
    "ordinal_recombine",
    "parse_report_csv",
    "run_experiment",
    "run_experiment_text",
    "selftest",
    "theoretical_epsilon",
]
