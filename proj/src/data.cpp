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

#include "gradlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace gradlab::data {
namespace {

using nlohmann::json;

std::string Trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(Trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

int CategoryIndex(const std::string& value,
                  const std::vector<std::string>& categories,
                  const std::string& column, std::size_t row) {
  for (std::size_t i = 0; i < categories.size(); ++i)
    if (categories[i] == value) return static_cast<int>(i);
  throw std::runtime_error("row " + std::to_string(row) + ", column '" +
                           column + "': unknown category '" + value + "'");
}

double NumericCell(const std::string& value, const std::string& column,
                   std::size_t row) {
  try {
    std::size_t consumed = 0;
    const double v = std::stod(value, &consumed);
    if (consumed != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("row " + std::to_string(row) + ", column '" +
                             column + "': non-numeric cell '" + value + "'");
  }
}

void ParseColumnList(const json& j, std::vector<ColumnSpec>& out) {
  for (const auto& item : j) {
    ColumnSpec col;
    col.name = item.at("name").get<std::string>();
    if (item.contains("categories"))
      col.categories = item.at("categories").get<std::vector<std::string>>();
    out.push_back(std::move(col));
  }
}

std::vector<double> UnitVector(Rng& rng, int dim) {
  std::vector<double> v(dim);
  double norm_sq = 0.0;
  for (double& c : v) {
    c = rng.Normal();
    norm_sq += c * c;
  }
  const double norm = std::sqrt(norm_sq);
  for (double& c : v) c /= norm;
  return v;
}

Record DrawSyntheticRecord(const SyntheticSpec& spec, Rng& rng) {
  Record rec;
  rec.a = rng.Categorical(spec.prior);
  rec.y = rng.Uniform() < spec.label_prob(rec.a) ? 1 : 0;
  rec.x.resize(spec.feature_dim);
  for (double& c : rec.x) c = spec.noise_scale * rng.Normal();
  rec.x[rec.a] += spec.s_a;
  rec.x[spec.m + rec.y] += spec.s_y;
  return rec;
}

std::vector<std::size_t> IndicesWithSensitive(const Dataset& dataset, int a) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < dataset.records.size(); ++i)
    if (dataset.records[i].a == a) idx.push_back(i);
  return idx;
}

void BootstrapInto(const Dataset& dataset,
                   const std::vector<std::size_t>& pool, int count, Rng& rng,
                   nn::Batch& batch) {
  for (int i = 0; i < count; ++i) {
    const std::size_t pick = pool[rng.UniformInt(static_cast<int>(pool.size()))];
    batch.xs.push_back(dataset.records[pick].x);
    batch.ys.push_back(dataset.records[pick].y);
  }
}

}  // namespace

const char* ProvenanceName(Provenance p) {
  switch (p) {
    case Provenance::kTrain:
      return "train";
    case Provenance::kTest:
      return "test";
    case Provenance::kPublic:
      return "public";
    case Provenance::kShadow:
      return "shadow";
    default:
      return "unspecified";
  }
}

void Dataset::Validate() const {
  if (records.empty()) throw std::invalid_argument("dataset is empty");
  const std::size_t dim = records[0].x.size();
  for (const Record& r : records) {
    if (r.x.size() != dim)
      throw std::invalid_argument("dataset has ragged feature vectors");
    if (r.y < 0 || r.y >= num_labels)
      throw std::invalid_argument("dataset label out of range");
    if (r.a < 0 || r.a >= m)
      throw std::invalid_argument("dataset sensitive value out of range");
  }
}

Schema Schema::FromJsonText(const std::string& text) {
  const json j = json::parse(text);
  Schema schema;
  ParseColumnList(j.at("features"), schema.features);
  schema.label_column = j.at("label").at("name").get<std::string>();
  schema.label_categories =
      j.at("label").at("categories").get<std::vector<std::string>>();
  schema.sensitive_column = j.at("sensitive").at("name").get<std::string>();
  schema.sensitive_categories =
      j.at("sensitive").at("categories").get<std::vector<std::string>>();
  if (j.contains("user")) schema.user_column = j.at("user").get<std::string>();
  if (schema.label_categories.size() < 2)
    throw std::runtime_error("schema: label needs at least 2 categories");
  if (schema.sensitive_categories.size() < 2)
    throw std::runtime_error("schema: sensitive needs at least 2 categories");
  return schema;
}

Schema Schema::FromJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schema file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return FromJsonText(buffer.str());
}

Dataset LoadCsv(const std::string& csv_path, const Schema& schema,
                const LoadOptions& options) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open csv file: " + csv_path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("csv file has no header: " + csv_path);
  const std::vector<std::string> header = SplitCsvLine(line);
  std::map<std::string, std::size_t> col_index;
  for (std::size_t i = 0; i < header.size(); ++i) col_index[header[i]] = i;

  const auto require_column = [&](const std::string& name) {
    const auto it = col_index.find(name);
    if (it == col_index.end())
      throw std::runtime_error("csv is missing column '" + name + "'");
    return it->second;
  };

  std::vector<std::size_t> feature_cols;
  for (const ColumnSpec& col : schema.features)
    feature_cols.push_back(require_column(col.name));
  const std::size_t label_col = require_column(schema.label_column);
  const std::size_t sensitive_col = require_column(schema.sensitive_column);
  std::optional<std::size_t> user_col;
  if (schema.user_column) user_col = require_column(*schema.user_column);

  Dataset dataset;
  dataset.num_labels = static_cast<int>(schema.label_categories.size());
  dataset.m = static_cast<int>(schema.sensitive_categories.size());

  std::vector<bool> numeric_slot;  // which expanded feature slots get scaled
  for (const ColumnSpec& col : schema.features) {
    if (col.categories.empty()) {
      dataset.feature_names.push_back(col.name);
      numeric_slot.push_back(true);
    } else {
      for (const std::string& cat : col.categories) {
        dataset.feature_names.push_back(col.name + "=" + cat);
        numeric_slot.push_back(false);
      }
    }
  }
  if (options.include_sensitive_in_features)
    for (const std::string& cat : schema.sensitive_categories) {
      dataset.feature_names.push_back(schema.sensitive_column + "=" + cat);
      numeric_slot.push_back(false);
    }

  std::map<std::string, int> user_ids;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (Trim(line).empty()) continue;
    const std::vector<std::string> cells = SplitCsvLine(line);
    if (cells.size() != header.size())
      throw std::runtime_error("row " + std::to_string(row) +
                               ": expected " + std::to_string(header.size()) +
                               " cells, found " + std::to_string(cells.size()));
    Record rec;
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      const ColumnSpec& col = schema.features[f];
      const std::string& cell = cells[feature_cols[f]];
      if (col.categories.empty()) {
        rec.x.push_back(NumericCell(cell, col.name, row));
      } else {
        const int idx = CategoryIndex(cell, col.categories, col.name, row);
        for (std::size_t c = 0; c < col.categories.size(); ++c)
          rec.x.push_back(c == static_cast<std::size_t>(idx) ? 1.0 : 0.0);
      }
    }
    rec.y = CategoryIndex(cells[label_col], schema.label_categories,
                          schema.label_column, row);
    rec.a = CategoryIndex(cells[sensitive_col], schema.sensitive_categories,
                          schema.sensitive_column, row);
    if (options.include_sensitive_in_features)
      for (int c = 0; c < dataset.m; ++c)
        rec.x.push_back(c == rec.a ? 1.0 : 0.0);
    if (user_col) {
      const std::string& cell = cells[*user_col];
      const auto [it, inserted] =
          user_ids.try_emplace(cell, static_cast<int>(user_ids.size()));
      rec.user = it->second;
      (void)inserted;
    }
    dataset.records.push_back(std::move(rec));
  }
  if (dataset.records.empty())
    throw std::runtime_error("csv has no data rows: " + csv_path);

  if (options.minmax_scale) {
    const std::size_t dim = dataset.records[0].x.size();
    for (std::size_t c = 0; c < dim; ++c) {
      if (!numeric_slot[c]) continue;
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      for (const Record& r : dataset.records) {
        lo = std::min(lo, r.x[c]);
        hi = std::max(hi, r.x[c]);
      }
      const double span = hi - lo;
      for (Record& r : dataset.records)
        r.x[c] = span > 0.0 ? (r.x[c] - lo) / span : 0.0;
    }
  }
  dataset.Validate();
  return dataset;
}

void SyntheticSpec::Validate() const {
  if (feature_dim < 2) throw std::invalid_argument("feature_dim must be >= 2");
  if (m < 2) throw std::invalid_argument("m must be >= 2");
  if (num_labels != 2)
    throw std::invalid_argument("synthetic labels are binary");
  if (static_cast<int>(prior.size()) != m)
    throw std::invalid_argument("prior size must equal m");
  double total = 0.0;
  for (const double p : prior) {
    if (p < 0.0) throw std::invalid_argument("prior mass must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("prior must sum to 1");
  if (s_a < 0.0 || s_y < 0.0)
    throw std::invalid_argument("signal strengths must be >= 0");
  if (rho < -1.0 || rho > 1.0)
    throw std::invalid_argument("rho must lie in [-1, 1]");
  if (noise_scale <= 0.0)
    throw std::invalid_argument("noise scale must be > 0");
  if (feature_dim < m + num_labels)
    throw std::invalid_argument(
        "feature_dim too small to host the sensitive and label directions: "
        "need >= " +
        std::to_string(m + num_labels));
}

double SyntheticSpec::mean_a() const {
  double mean = 0.0;
  for (int a = 0; a < m; ++a) mean += a * prior[a];
  return mean;
}

double SyntheticSpec::label_prob(int a) const {
  const double p = 0.5 + rho * (static_cast<double>(a) - mean_a()) * rho_scale;
  return std::clamp(p, 0.05, 0.95);
}

Dataset SynthGenerate(const SyntheticSpec& spec, int n) {
  spec.Validate();
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  Dataset dataset;
  dataset.num_labels = spec.num_labels;
  dataset.m = spec.m;
  for (int c = 0; c < spec.feature_dim; ++c)
    dataset.feature_names.push_back("f" + std::to_string(c));
  Rng rng = Rng(spec.seed).Derive("synth");
  dataset.records.reserve(n);
  for (int i = 0; i < n; ++i)
    dataset.records.push_back(DrawSyntheticRecord(spec, rng));
  return dataset;
}

Dataset SynthGenerateUsers(const SyntheticSpec& spec, int n_users,
                           int records_per_user, double user_strength) {
  spec.Validate();
  if (n_users < 1 || records_per_user < 1)
    throw std::invalid_argument("need at least one user and one record each");
  if (user_strength < 0.0)
    throw std::invalid_argument("user strength must be >= 0");
  Dataset dataset;
  dataset.num_labels = spec.num_labels;
  dataset.m = spec.m;
  for (int c = 0; c < spec.feature_dim; ++c)
    dataset.feature_names.push_back("f" + std::to_string(c));
  Rng direction_rng = Rng(spec.seed).Derive("user-directions");
  Rng record_rng = Rng(spec.seed).Derive("user-records");
  for (int u = 0; u < n_users; ++u) {
    const std::vector<double> w = UnitVector(direction_rng, spec.feature_dim);
    for (int i = 0; i < records_per_user; ++i) {
      Record rec = DrawSyntheticRecord(spec, record_rng);
      for (int c = 0; c < spec.feature_dim; ++c)
        rec.x[c] += user_strength * w[c];
      rec.user = u;
      dataset.records.push_back(std::move(rec));
    }
  }
  return dataset;
}

Dataset AppendSensitiveOneHot(const Dataset& dataset) {
  dataset.Validate();
  Dataset out = dataset;
  for (int c = 0; c < dataset.m; ++c)
    out.feature_names.push_back("a=" + std::to_string(c));
  for (Record& r : out.records)
    for (int c = 0; c < dataset.m; ++c)
      r.x.push_back(c == r.a ? 1.0 : 0.0);
  return out;
}

int SampleSensitive(std::span<const double> prior, Rng& rng) {
  double total = 0.0;
  for (const double p : prior) {
    if (p < 0.0) throw std::invalid_argument("prior mass must be >= 0");
    total += p;
  }
  if (prior.empty() || std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("prior must sum to 1");
  return rng.Categorical(prior);
}

nn::Batch SampleConditionalBatch(const Dataset& dataset, int a, int k,
                                 Rng& rng) {
  if (k < 1) throw std::invalid_argument("batch size must be >= 1");
  const std::vector<std::size_t> pool = IndicesWithSensitive(dataset, a);
  if (pool.empty())
    throw std::invalid_argument("no record with sensitive value " +
                                std::to_string(a));
  nn::Batch batch;
  BootstrapInto(dataset, pool, k, rng, batch);
  return batch;
}

nn::Batch SampleRatioBatch(const Dataset& dataset, int property_value,
                           double alpha, int k, Rng& rng) {
  if (k < 1) throw std::invalid_argument("batch size must be >= 1");
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("alpha must lie in [0, 1]");
  const int n_with = static_cast<int>(std::floor(alpha * k));
  const int n_without = k - n_with;
  nn::Batch batch;
  if (n_with > 0) {
    const std::vector<std::size_t> pool =
        IndicesWithSensitive(dataset, property_value);
    if (pool.empty())
      throw std::invalid_argument("no record with the property");
    BootstrapInto(dataset, pool, n_with, rng, batch);
  }
  if (n_without > 0) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < dataset.records.size(); ++i)
      if (dataset.records[i].a != property_value) pool.push_back(i);
    if (pool.empty())
      throw std::invalid_argument("no record without the property");
    BootstrapInto(dataset, pool, n_without, rng, batch);
  }
  return batch;
}

std::tuple<Dataset, Dataset, Dataset> Split(const Dataset& dataset,
                                            double train_fraction,
                                            double test_fraction,
                                            double public_fraction,
                                            std::uint64_t seed) {
  dataset.Validate();
  if (train_fraction <= 0.0 || test_fraction <= 0.0 || public_fraction <= 0.0)
    throw std::invalid_argument("split fractions must be positive");
  if (train_fraction + test_fraction + public_fraction > 1.0 + 1e-9)
    throw std::invalid_argument("split fractions must sum to at most 1");
  const std::size_t n = dataset.records.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng(seed).Derive("split");
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[rng.UniformInt(static_cast<int>(i))]);

  const auto take = [&](std::size_t begin, std::size_t count, Provenance tag) {
    Dataset out;
    out.num_labels = dataset.num_labels;
    out.m = dataset.m;
    out.feature_names = dataset.feature_names;
    out.provenance = tag;
    for (std::size_t i = begin; i < begin + count; ++i)
      out.records.push_back(dataset.records[order[i]]);
    return out;
  };

  const auto n_train = static_cast<std::size_t>(train_fraction * n);
  const auto n_test = static_cast<std::size_t>(test_fraction * n);
  const auto n_public = std::min(
      static_cast<std::size_t>(public_fraction * n), n - n_train - n_test);
  if (n_train == 0 || n_test == 0 || n_public == 0)
    throw std::invalid_argument("split produces an empty subset");
  return {take(0, n_train, Provenance::kTrain),
          take(n_train, n_test, Provenance::kTest),
          take(n_train + n_test, n_public, Provenance::kPublic)};
}

Dataset BuildShadow(const Dataset& public_split, int s, bool balanced) {
  public_split.Validate();
  if (s < 1) throw std::invalid_argument("shadow size must be >= 1");
  Dataset shadow;
  shadow.num_labels = public_split.num_labels;
  shadow.m = public_split.m;
  shadow.feature_names = public_split.feature_names;
  shadow.provenance = Provenance::kShadow;
  if (!balanced) {
    if (public_split.records.size() < static_cast<std::size_t>(s))
      throw std::invalid_argument(
          "insufficient records for shadow dataset: need " +
          std::to_string(s) + ", have " +
          std::to_string(public_split.records.size()));
    shadow.records.assign(public_split.records.begin(),
                          public_split.records.begin() + s);
    return shadow;
  }
  for (int c = 0; c < public_split.m; ++c) {
    const int quota = s / public_split.m + (c < s % public_split.m ? 1 : 0);
    int taken = 0;
    for (const Record& r : public_split.records) {
      if (r.a != c) continue;
      shadow.records.push_back(r);
      if (++taken == quota) break;
    }
    if (taken < quota)
      throw std::invalid_argument(
          "insufficient records for balanced shadow: class " +
          std::to_string(c) + " needs " + std::to_string(quota) + ", has " +
          std::to_string(taken));
  }
  return shadow;
}

std::pair<std::vector<UserGroup>, std::vector<UserGroup>> UserPartition(
    const Dataset& dataset, int min_samples, int n_train_users,
    int n_shadow_users, std::uint64_t seed) {
  dataset.Validate();
  if (min_samples < 1) throw std::invalid_argument("min_samples must be >= 1");
  if (n_train_users < 1 || n_shadow_users < 1)
    throw std::invalid_argument("need at least one user per side");
  std::map<int, UserGroup> groups;
  for (const Record& r : dataset.records) {
    if (r.user < 0)
      throw std::invalid_argument("dataset has records without user ids");
    auto& g = groups[r.user];
    g.user = r.user;
    g.records.push_back(r);
  }
  std::vector<UserGroup> qualified;
  for (auto& [id, g] : groups)
    if (static_cast<int>(g.records.size()) >= min_samples)
      qualified.push_back(std::move(g));
  const std::size_t need =
      static_cast<std::size_t>(n_train_users) + n_shadow_users;
  if (qualified.size() < need)
    throw std::invalid_argument(
        "insufficient qualifying users: need " + std::to_string(need) +
        ", have " + std::to_string(qualified.size()));
  Rng rng = Rng(seed).Derive("user-partition");
  for (std::size_t i = qualified.size(); i > 1; --i)
    std::swap(qualified[i - 1], qualified[rng.UniformInt(static_cast<int>(i))]);
  std::vector<UserGroup> train(qualified.begin(),
                               qualified.begin() + n_train_users);
  std::vector<UserGroup> shadow(qualified.begin() + n_train_users,
                                qualified.begin() + need);
  return {std::move(train), std::move(shadow)};
}

nn::Batch SampleUserBatch(const UserGroup& user, int k, Rng& rng) {
  if (k < 1) throw std::invalid_argument("batch size must be >= 1");
  if (user.records.empty()) throw std::invalid_argument("user has no records");
  nn::Batch batch;
  for (int i = 0; i < k; ++i) {
    const Record& r =
        user.records[rng.UniformInt(static_cast<int>(user.records.size()))];
    batch.xs.push_back(r.x);
    batch.ys.push_back(r.y);
  }
  return batch;
}

void RatioBinSpec::Validate() const {
  if (m_bins < 3) throw std::invalid_argument("ratio bins need m >= 3");
}

double RatioBinSpec::upper_edge(int bin) const {
  Validate();
  if (bin < 0 || bin >= m_bins) throw std::invalid_argument("bin out of range");
  return bin == 0 ? 0.0
                  : static_cast<double>(bin) / static_cast<double>(m_bins - 1);
}

double RatioBinSpec::lower_edge(int bin) const {
  Validate();
  if (bin < 0 || bin >= m_bins) throw std::invalid_argument("bin out of range");
  return bin <= 1 ? 0.0
                  : static_cast<double>(bin - 1) /
                        static_cast<double>(m_bins - 1);
}

int RatioBinSpec::bin_of(double alpha) const {
  Validate();
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("alpha must lie in [0, 1]");
  if (alpha == 0.0) return 0;
  for (int bin = 1; bin < m_bins; ++bin)
    if (alpha <= upper_edge(bin)) return bin;
  return m_bins - 1;
}

double RatioBinSpec::SampleAlpha(int bin, Rng& rng) const {
  Validate();
  if (bin < 0 || bin >= m_bins) throw std::invalid_argument("bin out of range");
  if (bin == 0) return 0.0;
  const double lo = lower_edge(bin);
  const double hi = upper_edge(bin);
  // (lo, hi] since the bins are half-open from above.
  return lo + (hi - lo) * (1.0 - rng.Uniform());
}

}  // namespace gradlab::data
