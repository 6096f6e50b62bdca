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

#ifndef GRADLAB_DATA_HPP_
#define GRADLAB_DATA_HPP_

#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "gradlab/nn.hpp"
#include "gradlab/rng.hpp"

namespace gradlab::data {

struct Record {
  std::vector<double> x;
  int y = 0;
  int a = 0;      // sensitive value in [0, m)
  int user = -1;  // user id, or -1 when the dataset has no user column
};

// Origin of a dataset slice. The game refuses to train attack models on
// records tagged kTrain: the private split never feeds the adversary.
enum class Provenance { kUnspecified, kTrain, kTest, kPublic, kShadow };

const char* ProvenanceName(Provenance p);

struct Dataset {
  std::vector<Record> records;
  int num_labels = 2;   // y in [0, num_labels)
  int m = 2;            // a in [0, m)
  Provenance provenance = Provenance::kUnspecified;
  std::vector<std::string> feature_names;

  std::size_t size() const { return records.size(); }
  int feature_dim() const {
    return records.empty() ? 0 : static_cast<int>(records[0].x.size());
  }
  // Throws std::invalid_argument on empty records, ragged features, or
  // out-of-range y/a.
  void Validate() const;
};

// Column declarations for CSV ingestion, parsed from a JSON schema file.
// Categorical feature columns are one-hot expanded in declaration order;
// numeric columns pass through (min-max scaled to [0, 1] by default).
struct ColumnSpec {
  std::string name;
  std::vector<std::string> categories;  // empty => numeric
};

struct Schema {
  std::vector<ColumnSpec> features;
  std::string label_column;
  std::vector<std::string> label_categories;
  std::string sensitive_column;
  std::vector<std::string> sensitive_categories;
  std::optional<std::string> user_column;

  static Schema FromJsonFile(const std::string& path);
  static Schema FromJsonText(const std::string& text);
};

struct LoadOptions {
  // AIA runs include the sensitive column in x (one-hot expanded, appended
  // after the declared features); PIA/DIA runs exclude it.
  bool include_sensitive_in_features = false;
  bool minmax_scale = true;
};

// Reads a header-first CSV against the schema. Throws std::runtime_error
// naming the offending column/cell on any mismatch.
Dataset LoadCsv(const std::string& csv_path, const Schema& schema,
                const LoadOptions& options = {});

// Gaussian mixture with orthogonal signal directions: each record draws
// a ~ prior, y ~ Bernoulli(p(a)) with p(a) = clamp(0.5 + rho * (a - E[a]) *
// rho_scale, 0.05, 0.95), and x = s_a * e_a + s_y * e_{m+y} + noise * N(0, I)
// in d dimensions (e_i the canonical basis). Requires d >= m + num_labels.
struct SyntheticSpec {
  int feature_dim = 20;
  int m = 2;
  std::vector<double> prior = {0.5, 0.5};
  double s_a = 2.0;           // sensitive-signal strength
  double s_y = 1.0;           // label-signal strength
  double rho = 0.0;           // label-sensitive correlation control
  double rho_scale = 1.0;
  double noise_scale = 1.0;
  std::uint64_t seed = 0;
  int num_labels = 2;

  void Validate() const;
  // E[a] under the prior.
  double mean_a() const;
  // P(y = 1 | a).
  double label_prob(int a) const;
};

Dataset SynthGenerate(const SyntheticSpec& spec, int n);

// Same mixture plus a persistent per-user unit direction scaled by
// user_strength; every record carries its user id. Users are the sensitive
// identities for user-level games.
Dataset SynthGenerateUsers(const SyntheticSpec& spec, int n_users,
                           int records_per_user, double user_strength);

// Appends the one-hot encoding of each record's sensitive value to x. The
// appended group occupies the last m feature slots, which is what
// attribute-level games and the audit canary treat as the attribute columns.
Dataset AppendSensitiveOneHot(const Dataset& dataset);

// a ~ prior under the stream.
int SampleSensitive(std::span<const double> prior, Rng& rng);

// k records drawn uniformly with replacement from the subset with sensitive
// value a. Throws if the subset is empty.
nn::Batch SampleConditionalBatch(const Dataset& dataset, int a, int k,
                                 Rng& rng);

// floor(alpha * k) records with property (a == property_value) and the rest
// without, each side bootstrapped. Throws when a required side is empty.
nn::Batch SampleRatioBatch(const Dataset& dataset, int property_value,
                           double alpha, int k, Rng& rng);

// Disjoint (train, test, public) subsets of the given fractions, shuffled
// deterministically by seed and tagged with their provenance.
std::tuple<Dataset, Dataset, Dataset> Split(const Dataset& dataset,
                                            double train_fraction,
                                            double test_fraction,
                                            double public_fraction,
                                            std::uint64_t seed);

// s records from the public split; when balanced, equal counts per sensitive
// value. Throws when a class cannot fill its quota.
Dataset BuildShadow(const Dataset& public_split, int s, bool balanced);

struct UserGroup {
  int user = -1;
  std::vector<Record> records;
};

// Filters out users with fewer than min_samples records, then deterministically
// assigns n_train_users and n_shadow_users disjoint users. Throws when too few
// users qualify.
std::pair<std::vector<UserGroup>, std::vector<UserGroup>> UserPartition(
    const Dataset& dataset, int min_samples, int n_train_users,
    int n_shadow_users, std::uint64_t seed);

// k records bootstrapped from one user's pool.
nn::Batch SampleUserBatch(const UserGroup& user, int k, Rng& rng);

// Ratio-bin boundaries for distribution-level games: bin 0 is exactly {0},
// bin j (1-based) is ((j-1)/(m-1), j/(m-1)]. SampleAlpha draws uniformly
// within a bin.
struct RatioBinSpec {
  int m_bins = 6;

  void Validate() const;  // throws unless m_bins >= 3
  // Upper edge of bin j in [0, m_bins); bin 0's edge is 0.
  double upper_edge(int bin) const;
  double lower_edge(int bin) const;
  int bin_of(double alpha) const;
  double SampleAlpha(int bin, Rng& rng) const;
};

}  // namespace gradlab::data

#endif  // GRADLAB_DATA_HPP_
