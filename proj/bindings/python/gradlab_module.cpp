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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gradlab/analysis.hpp"
#include "gradlab/attacks.hpp"
#include "gradlab/audit.hpp"
#include "gradlab/cli.hpp"
#include "gradlab/defenses.hpp"
#include "gradlab/metrics.hpp"

namespace py = pybind11;
using namespace gradlab;

namespace {

cli::RunOverrides MakeOverrides(std::optional<std::uint64_t> seed,
                                std::optional<std::string> out,
                                std::optional<int> repeats) {
  cli::RunOverrides overrides;
  overrides.seed = seed;
  overrides.out_dir = std::move(out);
  overrides.repeats = repeats;
  return overrides;
}

analysis::DiscreteChannel MakeChannel(std::vector<double> prior,
                                      std::vector<std::vector<double>> conditional) {
  analysis::DiscreteChannel channel;
  channel.prior = std::move(prior);
  channel.conditional = std::move(conditional);
  return channel;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gradient-leakage laboratory: inference games, defenses, and audits.";
  m.attr("__version__") = cli::kLibraryVersion;

  // --- experiment runner -----------------------------------------------
  m.def(
      "run_experiment",
      [](const std::string& config_path, std::optional<std::uint64_t> seed,
         std::optional<std::string> out, std::optional<int> repeats) {
        return cli::RunExperiment(config_path, MakeOverrides(seed, std::move(out), repeats));
      },
      py::arg("config_path"), py::arg("seed") = std::nullopt,
      py::arg("out") = std::nullopt, py::arg("repeats") = std::nullopt,
      "Run an experiment from a JSON config file; returns the exit code and "
      "writes manifest/metrics artifacts into the output directory.");
  m.def(
      "run_experiment_text",
      [](const std::string& config_text, std::optional<std::uint64_t> seed,
         std::optional<std::string> out, std::optional<int> repeats) {
        return cli::RunExperimentText(config_text,
                                      MakeOverrides(seed, std::move(out), repeats));
      },
      py::arg("config_text"), py::arg("seed") = std::nullopt,
      py::arg("out") = std::nullopt, py::arg("repeats") = std::nullopt,
      "Run an experiment from JSON config text already in memory.");
  m.def(
      "selftest",
      [](std::uint64_t seed) {
        py::list out;
        for (const cli::SelftestResult& r : cli::RunSelftest(seed))
          out.append(py::make_tuple(r.name, r.passed, r.failed));
        return out;
      },
      py::arg("seed") = 0,
      "Run the built-in invariant batteries; returns (name, passed, failed) "
      "per battery.");
  m.def(
      "parse_report_csv",
      [](const std::string& text) {
        const cli::ParsedReport report = cli::ParseReportCsv(text);
        py::list rows;
        for (const cli::ReportRow& row : report.rows) {
          py::dict d;
          d["cell"] = row.cell;
          d["round"] = row.round;
          d["metric"] = row.metric;
          d["value"] = row.value;
          rows.append(d);
        }
        return py::make_tuple(report.manifest_hash, rows);
      },
      py::arg("text"),
      "Parse an emitted metrics CSV; returns (manifest_hash, rows).");

  // --- privacy accounting ------------------------------------------------
  m.def("theoretical_epsilon", &defenses::TheoreticalEpsilon, py::arg("clip"),
        py::arg("sigma"), py::arg("delta"),
        "Analytic (eps, delta) of the Gaussian mechanism at the given "
        "sensitivity and noise scale.");
  m.def("chi_mean", &audit::ChiMean, py::arg("n"), py::arg("sigma"),
        "Mean of the norm of an n-dimensional isotropic Gaussian.");
  m.def(
      "empirical_epsilon",
      [](const std::vector<double>& h0, const std::vector<double>& h1, double delta) {
        const audit::EpsilonEstimate est = audit::EmpiricalEpsilon(h0, h1, delta);
        py::dict d;
        d["eps_hat"] = est.eps_hat;
        d["lo"] = est.lo;
        d["hi"] = est.hi;
        d["critical_value"] = est.critical_value;
        d["reject_above"] = est.reject_above;
        d["fpr"] = est.fpr;
        d["fnr"] = est.fnr;
        d["degenerate"] = est.degenerate;
        return d;
      },
      py::arg("h0"), py::arg("h1"), py::arg("delta"),
      "Empirical epsilon estimate from audit statistics under both "
      "hypotheses.");

  // --- information-theoretic analysis -------------------------------------
  m.def(
      "entropy", [](const std::vector<double>& p) { return analysis::Entropy(p); },
      py::arg("p"), "Shannon entropy in nats.");
  m.def("binary_entropy", &analysis::BinaryEntropy, py::arg("e"));
  m.def(
      "mutual_information_exact",
      [](std::vector<double> prior, std::vector<std::vector<double>> conditional) {
        return analysis::MutualInformationExact(
            MakeChannel(std::move(prior), std::move(conditional)));
      },
      py::arg("prior"), py::arg("conditional"),
      "Exact mutual information of a discrete channel in nats.");
  m.def(
      "bayes_error",
      [](std::vector<double> prior, std::vector<std::vector<double>> conditional) {
        return analysis::BayesError(
            MakeChannel(std::move(prior), std::move(conditional)));
      },
      py::arg("prior"), py::arg("conditional"),
      "Exact error of the Bayes-optimal predictor of the channel input.");
  m.def("fano_error_lower_bound", &analysis::FanoErrorLowerBound, py::arg("h_x"),
        py::arg("mi"), py::arg("m"),
        "Lower bound on any predictor's error from the input entropy and the "
        "observed mutual information.");
  m.def("advantage_upper_bound", &analysis::AdvantageUpperBound, py::arg("h_a"),
        py::arg("mi"), py::arg("m"), py::arg("p_star"),
        "Upper bound on attack advantage over the best uninformed guess.");

  // --- metrics -------------------------------------------------------------
  m.def(
      "binary_auroc",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        return metrics::BinaryAuroc(scores, labels);
      },
      py::arg("scores"), py::arg("labels"),
      "Rank-based AUROC for binary labels; ties count one half.");
  m.def("clopper_pearson", &metrics::ClopperPearson, py::arg("successes"),
        py::arg("n"), py::arg("confidence") = 0.95,
        "Exact binomial confidence interval.");

  // --- attack primitives ----------------------------------------------------
  m.def(
      "ordinal_recombine",
      [](const std::vector<double>& exceed) {
        return attacks::OrdinalRecombine(exceed);
      },
      py::arg("exceed_probs"),
      "Turn per-threshold exceedance scores into a distribution over ordered "
      "bins.");
  m.def(
      "multi_round_aggregate",
      [](const std::vector<std::vector<double>>& round_posteriors,
         const std::vector<double>& prior) {
        const attacks::AggregateResult agg =
            attacks::MultiRoundAggregate(round_posteriors, prior);
        return py::make_tuple(agg.a_hat, agg.log_scores);
      },
      py::arg("round_posteriors"), py::arg("prior"),
      "Fuse per-round posteriors under conditional independence; returns "
      "(a_hat, log_scores).");
}
