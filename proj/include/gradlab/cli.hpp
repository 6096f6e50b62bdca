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

#ifndef GRADLAB_CLI_HPP_
#define GRADLAB_CLI_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gradlab/audit.hpp"
#include "gradlab/game.hpp"

namespace gradlab::cli {

inline constexpr const char* kLibraryVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Report emission: long format, one metric per row, stable column order
// cell,round,metric,value,manifest. Floats at 6 significant digits.
// ---------------------------------------------------------------------------

enum class ReportFormat { kCsv, kJson };

ReportFormat ReportFormatFromName(const std::string& name);
const char* ReportFormatName(ReportFormat format);

struct ReportRow {
  std::string cell;    // grouping key: "repeat0", "prune-0.99/static", ...
  std::string round;   // observed round "1".."r", "multi", or "-"
  std::string metric;
  double value = 0.0;
};

// Renders rows in the given format. Every row carries the manifest hash.
// Empty rows yield a header-only file (CSV) or an empty rows array (JSON).
// Non-finite values render as inf/-inf/nan (JSON: quoted strings).
std::string FormatReport(const std::vector<ReportRow>& rows,
                         ReportFormat format,
                         const std::string& manifest_hash);

struct ParsedReport {
  std::string manifest_hash;  // empty for a header-only file
  std::vector<ReportRow> rows;
};

// Inverse of FormatReport for the CSV form; values recover to 6 significant
// digits. Throws std::runtime_error on a malformed header or row.
ParsedReport ParseReportCsv(const std::string& text);

// 64-bit FNV-1a of the canonical config serialization, as 16 hex digits.
std::string ManifestHash(const std::string& canonical_config_json);

// Writes `text` to path, creating parent directories as needed.
void WriteFile(const std::string& path, const std::string& text);

// ---------------------------------------------------------------------------
// Experiment configuration (JSON file driven).
// ---------------------------------------------------------------------------

enum class Command { kGame, kDefenseEval, kSweep, kAudit, kFano, kSelftest };

Command CommandFromName(const std::string& name);
const char* CommandName(Command command);

// CSV data source: records are loaded raw (without the sensitive one-hot);
// attribute games append it themselves.
struct CsvSource {
  std::string csv_path;
  std::string schema_path;
  bool minmax_scale = true;
};

// The audit command: trains the target model on the prepared attribute-game
// splits, then runs the membership-style flip game on a random canary and a
// crafted canary and estimates epsilon for both.
struct AuditCommandConfig {
  double clip = 2.0;
  double sigma = 0.1;
  double delta = 1e-5;
  int trials = 1000;  // per hypothesis
  double sensitivity_factor = 1.0;
  int label = 0;          // canary label
  int epochs = 3;         // target-model training epochs before the audit
  int n_attributes = 0;   // 0 derives base feature count + 1
  audit::CanaryCraftConfig craft;  // seed is filled from the master stream
};

// The fano command: random discrete channels, checking the error and
// advantage lower/upper bounds against the exact Bayes predictor.
struct FanoCommandConfig {
  int channels = 1000;
  bool emit_channels = false;  // per-channel rows in addition to the summary
};

struct ExperimentConfig {
  Command command = Command::kGame;
  std::uint64_t seed = 0;
  bool seed_set = false;  // a seed is required (config key or --seed)
  std::string out_dir = "runs/out";
  int repeats = 1;  // game command: repeat seeds
  ReportFormat format = ReportFormat::kCsv;
  bool use_csv = false;  // exactly one data source: csv or synthetic
  CsvSource csv;
  game::GameConfig game;  // master_seed is filled per run/repeat
  AuditCommandConfig audit;
  FanoCommandConfig fano;
};

struct ParseResult {
  ExperimentConfig config;
  std::vector<std::string> errors;  // exhaustive, not first-only
};

// Parses the JSON experiment config, collecting every schema violation
// (wrong types, unknown keys, bad enum names, missing data source).
ParseResult ParseExperimentConfig(const std::string& json_text);

// Canonical (sorted-key, compact) serialization of the resolved config;
// the manifest hash is taken over kLibraryVersion + "\n" + this string.
// The output directory is excluded: it selects where artifacts land, not
// what gets computed, so runs into different directories hash identically.
std::string CanonicalConfigJson(const ExperimentConfig& config);

// Command-line overrides applied on top of the config file.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> repeats;
};

// Runs the configured experiment and writes artifacts into the output
// directory: manifest.json (config echo + content hash + library version),
// metrics.<csv|json>, per-trial detail for the game command, and error.json
// with the exhaustive error list on failure. Exit codes: 0 success, 1
// selftest failures, 2 config schema violations, 3 runtime failure.
int RunExperiment(const std::string& config_path,
                  const RunOverrides& overrides = {});

// Same, from config text already in memory (path only names the source).
int RunExperimentText(const std::string& config_text,
                      const RunOverrides& overrides = {});

// One randomized invariant battery of the selftest command.
struct SelftestResult {
  std::string name;
  int passed = 0;
  int failed = 0;
};

// Runs the built-in invariant suites (stream splitting, defense transforms,
// ordinal recombination, information bounds, score fusion), 200 randomized
// instances each, seeded from `seed`.
std::vector<SelftestResult> RunSelftest(std::uint64_t seed);

}  // namespace gradlab::cli

#endif  // GRADLAB_CLI_HPP_
