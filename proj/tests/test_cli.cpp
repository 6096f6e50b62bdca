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

#include "gradlab/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace gradlab;

namespace {

fs::path TestDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gradlab-cli-tests" / name;
  fs::remove_all(dir);
  return dir;
}

std::string ReadFile(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(static_cast<bool>(is));
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

bool HasError(const std::vector<std::string>& errors, const std::string& needle) {
  for (const std::string& e : errors)
    if (e.find(needle) != std::string::npos) return true;
  return false;
}

int CountRows(const cli::ParsedReport& report, const std::string& cell,
              const std::string& metric = "") {
  int n = 0;
  for (const cli::ReportRow& row : report.rows)
    if (row.cell == cell && (metric.empty() || row.metric == metric)) ++n;
  return n;
}

double FindValue(const cli::ParsedReport& report, const std::string& cell,
                 const std::string& round, const std::string& metric) {
  for (const cli::ReportRow& row : report.rows)
    if (row.cell == cell && row.round == round && row.metric == metric)
      return row.value;
  FAIL(("missing row " + cell + "/" + round + "/" + metric));
  return 0.0;
}

const char* kGameConfig = R"({
  "command": "game",
  "seed": 21,
  "repeats": 2,
  "format": "csv",
  "data": {"synthetic": {"feature_dim": 10, "m": 2, "s_a": 2.0, "s_y": 1.0,
                         "rho": -0.2, "seed": 7}},
  "game": {
    "network_widths": [12, 8, 2],
    "attack": "aia",
    "estimator": {"kind": "logistic", "epochs": 25, "batch_size": 16, "lr": 0.05},
    "n_shadow_pairs": 32,
    "batch_size": 4,
    "epochs": 2,
    "rounds": [1, 2],
    "trials": 6,
    "dataset_size": 300,
    "shadow_size": 60,
    "train_minibatch": 16
  }
})";

}  // namespace

TEST_CASE("manifest hash matches the reference fnv-1a vectors") {
  CHECK(cli::ManifestHash("") == "cbf29ce484222325");
  CHECK(cli::ManifestHash("a") == "af63dc4c8601ec8c");
  CHECK(cli::ManifestHash("foobar") == "85944171f73967e8");
  CHECK(cli::ManifestHash("x") != cli::ManifestHash("y"));
}

TEST_CASE("csv report emission is stable and header-only when empty") {
  CHECK(cli::FormatReport({}, cli::ReportFormat::kCsv, "abc") ==
        "cell,round,metric,value,manifest\n");
  const std::vector<cli::ReportRow> rows = {
      {"repeat0", "1", "asr", 0.123456789},
      {"repeat0", "multi", "auroc", 1.0},
      {"crafted", "-", "eps_hi", std::numeric_limits<double>::infinity()},
  };
  const std::string text = cli::FormatReport(rows, cli::ReportFormat::kCsv, "deadbeef");
  CHECK(text ==
        "cell,round,metric,value,manifest\n"
        "repeat0,1,asr,0.123457,deadbeef\n"
        "repeat0,multi,auroc,1,deadbeef\n"
        "crafted,-,eps_hi,inf,deadbeef\n");
}

TEST_CASE("csv report round-trips values to six significant digits") {
  std::vector<cli::ReportRow> rows;
  const double values[] = {0.9991, 3.14159265358979, 1e-12, 96.8997, 0.0,
                           -2.5e6, std::numeric_limits<double>::infinity()};
  int i = 0;
  for (double v : values) rows.push_back({"c" + std::to_string(i++), "-", "m", v});
  const std::string text = cli::FormatReport(rows, cli::ReportFormat::kCsv, "ff00");
  const cli::ParsedReport parsed = cli::ParseReportCsv(text);
  CHECK(parsed.manifest_hash == "ff00");
  REQUIRE(parsed.rows.size() == rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CHECK(parsed.rows[k].cell == rows[k].cell);
    if (std::isinf(rows[k].value)) {
      CHECK(std::isinf(parsed.rows[k].value));
    } else if (rows[k].value == 0.0) {
      CHECK(parsed.rows[k].value == 0.0);
    } else {
      CHECK(std::abs(parsed.rows[k].value - rows[k].value) <=
            std::abs(rows[k].value) * 1e-5);
    }
  }
}

TEST_CASE("csv report parsing rejects malformed input") {
  CHECK_THROWS_WITH_AS(cli::ParseReportCsv("bogus\n"),
                       doctest::Contains("malformed report header"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(
      cli::ParseReportCsv("cell,round,metric,value,manifest\na,b,c\n"),
      doctest::Contains("malformed report row"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      cli::ParseReportCsv("cell,round,metric,value,manifest\na,1,m,zzz,h\n"),
      doctest::Contains("malformed report value"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      cli::ParseReportCsv("cell,round,metric,value,manifest\na,1,m,1,h1\nb,1,m,1,h2\n"),
      doctest::Contains("inconsistent manifest hash"), std::runtime_error);
}

TEST_CASE("json report emission is valid json with quoted non-finite values") {
  const std::vector<cli::ReportRow> rows = {
      {"summary", "-", "channels", 25.0},
      {"crafted", "-", "eps_hi", std::numeric_limits<double>::infinity()},
  };
  const std::string text = cli::FormatReport(rows, cli::ReportFormat::kJson, "aa55");
  const nlohmann::json j = nlohmann::json::parse(text);
  CHECK(j.at("manifest").get<std::string>() == "aa55");
  REQUIRE(j.at("rows").size() == 2);
  CHECK(j.at("rows")[0].at("cell") == "summary");
  CHECK(j.at("rows")[0].at("value").get<double>() == 25.0);
  CHECK(j.at("rows")[1].at("value").get<std::string>() == "inf");
  const std::string empty = cli::FormatReport({}, cli::ReportFormat::kJson, "aa55");
  CHECK(nlohmann::json::parse(empty).at("rows").empty());
}

TEST_CASE("experiment config parsing accepts a minimal config") {
  const cli::ParseResult parsed = cli::ParseExperimentConfig(
      R"({"command": "selftest", "seed": 5, "data": {"synthetic": {}}})");
  CHECK(parsed.errors.empty());
  CHECK(parsed.config.command == cli::Command::kSelftest);
  CHECK(parsed.config.seed == 5);
  CHECK(parsed.config.seed_set);
  CHECK(parsed.config.repeats == 1);
  CHECK(parsed.config.format == cli::ReportFormat::kCsv);
  CHECK_FALSE(parsed.config.use_csv);
}

TEST_CASE("experiment config parsing fills game fields") {
  const cli::ParseResult parsed = cli::ParseExperimentConfig(R"({
    "command": "game", "seed": 9, "format": "json",
    "data": {"synthetic": {"feature_dim": 6, "m": 3, "prior": [0.2, 0.3, 0.5]}},
    "game": {
      "network_widths": [9, 5, 2],
      "attack": "dia",
      "adaptive": true,
      "estimator": {"kind": "mlp", "hidden": 32},
      "reducer": {"kind": "pca", "dims": 12},
      "defense": {"kind": "prune", "prune_rate": 0.95},
      "rounds": [2, 4],
      "ratio_bins": 5,
      "train_lr": 0.2
    }
  })");
  REQUIRE(parsed.errors.empty());
  const game::GameConfig& gc = parsed.config.game;
  CHECK(gc.network.layer_widths == std::vector<int>{9, 5, 2});
  CHECK(gc.attack_kind == attacks::AttackKind::kDistribution);
  CHECK(gc.adaptive);
  CHECK(gc.estimator.kind == estimators::EstimatorKind::kMlp);
  CHECK(gc.estimator.hidden == 32);
  CHECK(gc.reducer.kind() == attacks::ReducerKind::kPca);
  CHECK(gc.reducer.dims() == 12);
  CHECK(gc.defense.kind == defenses::DefenseKind::kPrune);
  CHECK(gc.defense.prune_rate == 0.95);
  CHECK(gc.rounds == std::vector<int>{2, 4});
  CHECK(gc.bins.m_bins == 5);
  CHECK(gc.train_lr == 0.2);
  CHECK(gc.data_spec.m == 3);
  CHECK(gc.data_spec.prior == std::vector<double>{0.2, 0.3, 0.5});
  CHECK(parsed.config.format == cli::ReportFormat::kJson);
}

TEST_CASE("experiment config parsing lists every violation") {
  const cli::ParseResult parsed = cli::ParseExperimentConfig(R"({
    "command": "launch",
    "seed": 1,
    "bogus_key": 1,
    "repeats": 0,
    "format": "xml",
    "data": {"synthetic": {}, "csv": {"path": "x.csv", "schema": "s.json"}},
    "game": {
      "epochs": "three",
      "attack": "mia",
      "defense": {"kind": "scramble"},
      "reducer": {"kind": "pca"}
    },
    "audit": {"craft": {"distance": "hamming"}}
  })");
  CHECK(HasError(parsed.errors, "unknown command 'launch'"));
  CHECK(HasError(parsed.errors, "unknown key 'bogus_key'"));
  CHECK(HasError(parsed.errors, "repeats: must be at least 1"));
  CHECK(HasError(parsed.errors, "format: expected 'csv' or 'json'"));
  CHECK(HasError(parsed.errors, "exactly one of 'synthetic' or 'csv'"));
  CHECK(HasError(parsed.errors, "game.epochs: expected an integer"));
  CHECK(HasError(parsed.errors, "unknown attack kind 'mia'"));
  CHECK(HasError(parsed.errors, "unknown defense kind 'scramble'"));
  CHECK(HasError(parsed.errors, "game.reducer.dims: required"));
  CHECK(HasError(parsed.errors, "audit.craft.distance: expected 'mse' or 'cosine'"));
  CHECK(parsed.errors.size() >= 10);
}

TEST_CASE("experiment config parsing rejects invalid json and csv sources") {
  CHECK(HasError(cli::ParseExperimentConfig("{oops").errors, "not valid JSON"));
  CHECK(HasError(cli::ParseExperimentConfig("[1,2]").errors, "must be an object"));
  const cli::ParseResult missing = cli::ParseExperimentConfig(
      R"({"command": "game", "seed": 1, "data": {"csv": {}}})");
  CHECK(HasError(missing.errors, "data.csv.path: required"));
  CHECK(HasError(missing.errors, "data.csv.schema: required"));
  CHECK(missing.config.use_csv);
  const cli::ParseResult no_data =
      cli::ParseExperimentConfig(R"({"command": "game", "seed": 1})");
  CHECK(HasError(no_data.errors, "data: required"));
}

TEST_CASE("canonical config serialization is deterministic and omits the out dir") {
  cli::ExperimentConfig config;
  config.seed = 77;
  config.out_dir = "somewhere/a";
  const std::string a = cli::CanonicalConfigJson(config);
  config.out_dir = "elsewhere/b";
  const std::string b = cli::CanonicalConfigJson(config);
  CHECK(a == b);
  const nlohmann::json j = nlohmann::json::parse(a);
  CHECK(j.at("command") == "game");
  CHECK(j.at("seed") == 77);
  CHECK_FALSE(j.contains("out"));
  config.seed = 78;
  CHECK(cli::CanonicalConfigJson(config) != a);
}

TEST_CASE("selftest command passes every battery and writes artifacts") {
  const fs::path dir = TestDir("selftest");
  const int code = cli::RunExperimentText(
      R"({"command": "selftest", "seed": 3, "data": {"synthetic": {}}})",
      {.out_dir = dir.string()});
  CHECK(code == 0);
  const nlohmann::json manifest = nlohmann::json::parse(ReadFile(dir / "manifest.json"));
  CHECK(manifest.at("version").get<std::string>() == cli::kLibraryVersion);
  CHECK(manifest.at("hash").get<std::string>().size() == 16);
  CHECK(manifest.at("config").at("command") == "selftest");
  const cli::ParsedReport report = cli::ParseReportCsv(ReadFile(dir / "metrics.csv"));
  CHECK(report.manifest_hash == manifest.at("hash").get<std::string>());
  const char* batteries[] = {"stream-splitting", "defense-transforms",
                             "ordinal-recombination", "information-bounds",
                             "score-fusion"};
  for (const char* name : batteries) {
    CHECK(FindValue(report, name, "-", "passed") == 200.0);
    CHECK(FindValue(report, name, "-", "failed") == 0.0);
  }
  CHECK(report.rows.size() == 10);
}

TEST_CASE("game command emits per-round, fused, summary, and trial artifacts") {
  const fs::path dir = TestDir("game");
  REQUIRE(cli::RunExperimentText(kGameConfig, {.out_dir = dir.string()}) == 0);
  const cli::ParsedReport report = cli::ParseReportCsv(ReadFile(dir / "metrics.csv"));
  // Two repeats, each: 2 rounds x 6 metrics + multi x 6 + task_auroc,
  // then mean/std over the 19 series.
  CHECK(report.rows.size() == 2 * 19 + 38);
  for (const char* cell : {"repeat0", "repeat1"}) {
    CHECK(CountRows(report, cell) == 19);
    const double asr = FindValue(report, cell, "multi", "asr");
    CHECK(asr >= 0.0);
    CHECK(asr <= 1.0);
    CHECK(FindValue(report, cell, "multi", "trials") == 6.0);
    CHECK(FindValue(report, cell, "-", "task_auroc") > 0.0);
  }
  CHECK(CountRows(report, "mean") == 19);
  CHECK(CountRows(report, "std") == 19);
  const double m0 = FindValue(report, "repeat0", "multi", "auroc");
  const double m1 = FindValue(report, "repeat1", "multi", "auroc");
  const double mean = FindValue(report, "mean", "multi", "auroc");
  CHECK(mean == doctest::Approx((m0 + m1) / 2).epsilon(1e-4));
  CHECK(FindValue(report, "std", "multi", "trials") == 0.0);

  const std::string trials = ReadFile(dir / "trials.csv");
  std::istringstream is(trials);
  std::string line;
  REQUIRE(std::getline(is, line));
  CHECK(line == "cell,trial,round,true_value,predicted,manifest");
  int rows = 0;
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2 * 6 * 3);  // repeats x trials x (two rounds + multi)
}

TEST_CASE("identical runs produce byte-identical metrics and seeds change them") {
  const fs::path a = TestDir("det-a");
  const fs::path b = TestDir("det-b");
  const fs::path c = TestDir("det-c");
  REQUIRE(cli::RunExperimentText(kGameConfig, {.out_dir = a.string()}) == 0);
  REQUIRE(cli::RunExperimentText(kGameConfig, {.out_dir = b.string()}) == 0);
  REQUIRE(cli::RunExperimentText(kGameConfig,
                                 {.seed = 22, .out_dir = c.string()}) == 0);
  CHECK(ReadFile(a / "metrics.csv") == ReadFile(b / "metrics.csv"));
  CHECK(ReadFile(a / "trials.csv") == ReadFile(b / "trials.csv"));
  CHECK(ReadFile(a / "metrics.csv") != ReadFile(c / "metrics.csv"));
}

TEST_CASE("defense-eval command emits one static and one adaptive cell per profile") {
  const fs::path dir = TestDir("defense-eval");
  const int code = cli::RunExperimentText(R"({
    "command": "defense-eval", "seed": 4,
    "data": {"synthetic": {"feature_dim": 8, "m": 2, "s_a": 2.0, "seed": 5}},
    "game": {
      "network_widths": [10, 6, 2],
      "attack": "aia",
      "estimator": {"kind": "logistic", "epochs": 12, "batch_size": 16, "lr": 0.05},
      "defender": {"kind": "logistic", "epochs": 12, "batch_size": 16, "lr": 0.05},
      "n_shadow_pairs": 24, "batch_size": 4, "epochs": 1, "trials": 4,
      "dataset_size": 200, "shadow_size": 40, "train_minibatch": 16
    }
  })",
                                          {.out_dir = dir.string()});
  REQUIRE(code == 0);
  const cli::ParsedReport report = cli::ParseReportCsv(ReadFile(dir / "metrics.csv"));
  const std::size_t profiles = defenses::SweepProfiles().size();
  CHECK(report.rows.size() == profiles * 2 * 6);
  CHECK(CountRows(report, "identity/static") == 6);
  CHECK(CountRows(report, "identity/adaptive") == 6);
  for (const cli::ReportRow& row : report.rows) {
    CHECK(row.round == "multi");
    CHECK(row.cell.find('/') != std::string::npos);
  }
}

TEST_CASE("sweep command emits advantage and utility per profile") {
  const fs::path dir = TestDir("sweep");
  const int code = cli::RunExperimentText(R"({
    "command": "sweep", "seed": 6,
    "data": {"synthetic": {"feature_dim": 8, "m": 2, "s_a": 2.0, "seed": 5}},
    "game": {
      "network_widths": [10, 6, 2],
      "attack": "aia",
      "estimator": {"kind": "logistic", "epochs": 12, "batch_size": 16, "lr": 0.05},
      "defender": {"kind": "logistic", "epochs": 12, "batch_size": 16, "lr": 0.05},
      "n_shadow_pairs": 24, "batch_size": 4, "epochs": 1, "trials": 4,
      "dataset_size": 200, "shadow_size": 40, "train_minibatch": 16
    }
  })",
                                          {.out_dir = dir.string()});
  REQUIRE(code == 0);
  const cli::ParsedReport report = cli::ParseReportCsv(ReadFile(dir / "metrics.csv"));
  const std::size_t profiles = defenses::SweepProfiles().size();
  CHECK(report.rows.size() == profiles * 2);
  const double auroc = FindValue(report, "identity", "-", "task_auroc");
  CHECK(auroc > 0.0);
  CHECK(auroc <= 1.0);
  for (const cli::ReportRow& row : report.rows)
    CHECK((row.metric == "advantage" || row.metric == "task_auroc"));
}

TEST_CASE("audit command reports random and crafted canary estimates") {
  const fs::path dir = TestDir("audit");
  const int code = cli::RunExperimentText(R"({
    "command": "audit", "seed": 11,
    "data": {"synthetic": {"feature_dim": 6, "m": 2, "s_a": 2.0, "seed": 5}},
    "game": {
      "network_widths": [8, 4, 2],
      "dataset_size": 200, "shadow_size": 40, "train_minibatch": 16
    },
    "audit": {"clip": 2.0, "sigma": 0.1, "trials": 100, "epochs": 1,
              "craft": {"iters": 8, "step": 0.05}}
  })",
                                          {.out_dir = dir.string()});
  REQUIRE(code == 0);
  const cli::ParsedReport report = cli::ParseReportCsv(ReadFile(dir / "metrics.csv"));
  CHECK(report.rows.size() == 2 * 16);
  for (const char* cell : {"random", "crafted"}) {
    CHECK(FindValue(report, cell, "-", "n_h0") +
              FindValue(report, cell, "-", "n_h1") ==
          200.0);
    CHECK(FindValue(report, cell, "-", "eps_hat") >= 0.0);
    CHECK(FindValue(report, cell, "-", "analytic_eps") > 0.0);
    const double h0_mean = FindValue(report, cell, "-", "h0_mean");
    const double expected = FindValue(report, cell, "-", "h0_mean_expected");
    CHECK(h0_mean == doctest::Approx(expected).epsilon(0.25));
  }
  CHECK(FindValue(report, "crafted", "-", "craft_objective") >= 0.0);
}

TEST_CASE("fano command checks bounds on random channels without violations") {
  const fs::path dir = TestDir("fano");
  const int code = cli::RunExperimentText(
      R"({"command": "fano", "seed": 13, "data": {"synthetic": {}},
          "fano": {"channels": 25, "emit_channels": true}})",
      {.out_dir = dir.string()});
  REQUIRE(code == 0);
  const cli::ParsedReport report = cli::ParseReportCsv(ReadFile(dir / "metrics.csv"));
  CHECK(report.rows.size() == 25 * 4 + 4);
  CHECK(FindValue(report, "summary", "-", "channels") == 25.0);
  CHECK(FindValue(report, "summary", "-", "mi_violations") == 0.0);
  CHECK(FindValue(report, "summary", "-", "fano_violations") == 0.0);
  CHECK(FindValue(report, "summary", "-", "advantage_violations") == 0.0);
  CHECK(FindValue(report, "channel0", "-", "bayes_error") >=
        FindValue(report, "channel0", "-", "fano_bound") - 1e-9);
}

TEST_CASE("config violations exit 2 with a machine-readable error record") {
  const fs::path dir = TestDir("errors");
  const int code = cli::RunExperimentText(
      R"({"command": "game", "data": {"synthetic": {}}, "bogus": 1})",
      {.out_dir = dir.string()});
  CHECK(code == 2);
  const nlohmann::json record = nlohmann::json::parse(ReadFile(dir / "error.json"));
  CHECK(record.at("exit_code") == 2);
  REQUIRE(record.at("errors").size() >= 2);
  bool saw_seed = false;
  bool saw_bogus = false;
  for (const auto& e : record.at("errors")) {
    const std::string text = e.get<std::string>();
    saw_seed = saw_seed || text.find("seed: required") != std::string::npos;
    saw_bogus = saw_bogus || text.find("bogus") != std::string::npos;
  }
  CHECK(saw_seed);
  CHECK(saw_bogus);
  CHECK_FALSE(fs::exists(dir / "metrics.csv"));
}

TEST_CASE("runtime failures exit 3 and name the cause") {
  const fs::path dir = TestDir("runtime-error");
  const int code = cli::RunExperimentText(R"({
    "command": "game", "seed": 2,
    "data": {"synthetic": {"feature_dim": 10, "m": 2}},
    "game": {"network_widths": [5, 4, 2], "epochs": 1, "trials": 4,
             "batch_size": 4, "n_shadow_pairs": 16,
             "dataset_size": 200, "shadow_size": 40}
  })",
                                          {.out_dir = dir.string()});
  CHECK(code == 3);
  const nlohmann::json record = nlohmann::json::parse(ReadFile(dir / "error.json"));
  const std::string text = record.at("errors")[0].get<std::string>();
  CHECK(text.find("does not match the data feature dimension") != std::string::npos);
}

TEST_CASE("run entry point reports unreadable config files") {
  const fs::path dir = TestDir("no-config");
  const int code =
      cli::RunExperiment((dir / "missing.json").string(), {.out_dir = dir.string()});
  CHECK(code == 2);
  const nlohmann::json record = nlohmann::json::parse(ReadFile(dir / "error.json"));
  CHECK(record.at("errors")[0].get<std::string>().find("cannot read config file") !=
        std::string::npos);
}

TEST_CASE("seed override fills a missing config seed") {
  const fs::path dir = TestDir("seed-override");
  const int code = cli::RunExperimentText(
      R"({"command": "selftest", "data": {"synthetic": {}}})",
      {.seed = 19, .out_dir = dir.string()});
  CHECK(code == 0);
  const nlohmann::json manifest = nlohmann::json::parse(ReadFile(dir / "manifest.json"));
  CHECK(manifest.at("config").at("seed") == 19);
}
