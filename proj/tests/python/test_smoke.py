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

import json
import math

import pytest

import gradlab


def test_version_string():
    assert gradlab.__version__ == "1.0.0"


def test_selftest_batteries_all_pass():
    results = gradlab.selftest(seed=3)
    assert len(results) == 5
    for name, passed, failed in results:
        assert passed == 200, name
        assert failed == 0, name


def test_theoretical_epsilon_gaussian_mechanism():
    eps = gradlab.theoretical_epsilon(clip=2.0, sigma=0.1, delta=1e-5)
    assert eps == pytest.approx(96.8997, abs=0.01)
    # More noise gives a strictly smaller epsilon.
    assert gradlab.theoretical_epsilon(2.0, 1.0, 1e-5) < eps


def test_chi_mean_closed_forms():
    assert gradlab.chi_mean(1, 1.0) == pytest.approx(math.sqrt(2.0 / math.pi))
    assert gradlab.chi_mean(2, 1.0) == pytest.approx(math.sqrt(math.pi / 2.0))
    assert gradlab.chi_mean(400, 1.0) == pytest.approx(20.0, rel=1e-3)


def test_information_bounds_on_a_noiseless_channel():
    prior = [0.5, 0.5]
    identity = [[1.0, 0.0], [0.0, 1.0]]
    assert gradlab.entropy(prior) == pytest.approx(math.log(2.0))
    assert gradlab.mutual_information_exact(prior, identity) == pytest.approx(
        math.log(2.0)
    )
    assert gradlab.bayes_error(prior, identity) == pytest.approx(0.0)
    assert gradlab.fano_error_lower_bound(math.log(2.0), math.log(2.0), 2) == (
        pytest.approx(0.0, abs=1e-9)
    )


def test_binary_auroc_orders_separable_scores():
    assert gradlab.binary_auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert gradlab.binary_auroc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0


def test_clopper_pearson_bounds_bracket_the_rate():
    lo, hi = gradlab.clopper_pearson(50, 100)
    assert lo < 0.5 < hi
    lo_zero, _ = gradlab.clopper_pearson(0, 100)
    assert lo_zero == 0.0


def test_multi_round_aggregate_single_round_identity():
    posterior = [0.1, 0.7, 0.2]
    a_hat, log_scores = gradlab.multi_round_aggregate([posterior], [1 / 3] * 3)
    assert a_hat == 1
    z = sum(math.exp(s) for s in log_scores)
    recovered = [math.exp(s) / z for s in log_scores]
    assert recovered == pytest.approx(posterior, abs=1e-9)


def test_ordinal_recombine_is_a_distribution():
    p = gradlab.ordinal_recombine([0.9, 0.6, 0.2])
    assert len(p) == 4
    assert sum(p) == pytest.approx(1.0, abs=1e-12)
    assert all(v >= 0 for v in p)


def test_empirical_epsilon_separated_samples():
    est = gradlab.empirical_epsilon([0.0] * 200, [1.0] * 200, 1e-5)
    assert est["degenerate"]
    assert est["eps_hat"] > 0
    assert est["lo"] <= est["eps_hat"] <= est["hi"]


def test_run_experiment_text_writes_artifacts(tmp_path):
    config = {
        "command": "game",
        "seed": 21,
        "repeats": 1,
        "data": {
            "synthetic": {"feature_dim": 10, "m": 2, "s_a": 2.0, "seed": 7}
        },
        "game": {
            "network_widths": [12, 8, 2],
            "attack": "aia",
            "estimator": {
                "kind": "logistic",
                "epochs": 25,
                "batch_size": 16,
                "lr": 0.05,
            },
            "n_shadow_pairs": 32,
            "batch_size": 4,
            "epochs": 2,
            "trials": 6,
            "dataset_size": 300,
            "shadow_size": 60,
            "train_minibatch": 16,
        },
    }
    out = tmp_path / "run"
    code = gradlab.run_experiment_text(json.dumps(config), out=str(out))
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["version"] == gradlab.__version__
    text = (out / "metrics.csv").read_text()
    manifest_hash, rows = gradlab.parse_report_csv(text)
    assert manifest_hash == manifest["hash"]
    cells = {row["cell"] for row in rows}
    assert {"repeat0", "mean", "std"} <= cells
    assert (out / "trials.csv").exists()


def test_run_experiment_rejects_bad_config(tmp_path):
    out = tmp_path / "bad"
    code = gradlab.run_experiment_text("{\"command\": \"nope\"}", out=str(out))
    assert code == 2
    record = json.loads((out / "error.json").read_text())
    assert record["exit_code"] == 2
    assert any("unknown command" in e for e in record["errors"])
