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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "json.hpp"

#include "gradlab/analysis.hpp"
#include "gradlab/attacks.hpp"
#include "gradlab/data.hpp"
#include "gradlab/defenses.hpp"
#include "gradlab/rng.hpp"

namespace gradlab::cli {
namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Formatting helpers.
// ---------------------------------------------------------------------------

std::string FormatValue(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string EscapeJson(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  fields.push_back(field);
  return fields;
}

// ---------------------------------------------------------------------------
// Config parsing: every violation is collected, none aborts the walk.
// ---------------------------------------------------------------------------

std::string Join(const std::string& path, const char* key) {
  return path.empty() ? key : path + "." + key;
}

void CheckKeys(const json& obj, const std::string& path,
               std::initializer_list<const char*> allowed,
               std::vector<std::string>& errors) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) errors.push_back("unknown key '" + Join(path, item.key().c_str()) + "'");
  }
}

bool RequireObject(const json& v, const std::string& where,
                   std::vector<std::string>& errors) {
  if (v.is_object()) return true;
  errors.push_back(where + ": expected an object");
  return false;
}

bool GetDouble(const json& obj, const std::string& path, const char* key,
               double& out, std::vector<std::string>& errors) {
  if (!obj.contains(key)) return false;
  const json& v = obj.at(key);
  if (!v.is_number()) {
    errors.push_back(Join(path, key) + ": expected a number");
    return false;
  }
  out = v.get<double>();
  return true;
}

bool GetInt(const json& obj, const std::string& path, const char* key,
            int& out, std::vector<std::string>& errors) {
  if (!obj.contains(key)) return false;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) {
    errors.push_back(Join(path, key) + ": expected an integer");
    return false;
  }
  out = v.get<int>();
  return true;
}

bool GetUint64(const json& obj, const std::string& path, const char* key,
               std::uint64_t& out, std::vector<std::string>& errors) {
  if (!obj.contains(key)) return false;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                 v.get<std::int64_t>() < 0)) {
    errors.push_back(Join(path, key) + ": expected a nonnegative integer");
    return false;
  }
  out = v.get<std::uint64_t>();
  return true;
}

bool GetBool(const json& obj, const std::string& path, const char* key,
             bool& out, std::vector<std::string>& errors) {
  if (!obj.contains(key)) return false;
  const json& v = obj.at(key);
  if (!v.is_boolean()) {
    errors.push_back(Join(path, key) + ": expected a boolean");
    return false;
  }
  out = v.get<bool>();
  return true;
}

bool GetString(const json& obj, const std::string& path, const char* key,
               std::string& out, std::vector<std::string>& errors) {
  if (!obj.contains(key)) return false;
  const json& v = obj.at(key);
  if (!v.is_string()) {
    errors.push_back(Join(path, key) + ": expected a string");
    return false;
  }
  out = v.get<std::string>();
  return true;
}

bool GetIntVector(const json& obj, const std::string& path, const char* key,
                  std::vector<int>& out, std::vector<std::string>& errors) {
  if (!obj.contains(key)) return false;
  const json& v = obj.at(key);
  if (!v.is_array()) {
    errors.push_back(Join(path, key) + ": expected an array of integers");
    return false;
  }
  std::vector<int> values;
  for (const json& e : v) {
    if (!e.is_number_integer()) {
      errors.push_back(Join(path, key) + ": expected an array of integers");
      return false;
    }
    values.push_back(e.get<int>());
  }
  out = std::move(values);
  return true;
}

bool GetDoubleVector(const json& obj, const std::string& path, const char* key,
                     std::vector<double>& out, std::vector<std::string>& errors) {
  if (!obj.contains(key)) return false;
  const json& v = obj.at(key);
  if (!v.is_array()) {
    errors.push_back(Join(path, key) + ": expected an array of numbers");
    return false;
  }
  std::vector<double> values;
  for (const json& e : v) {
    if (!e.is_number()) {
      errors.push_back(Join(path, key) + ": expected an array of numbers");
      return false;
    }
    values.push_back(e.get<double>());
  }
  out = std::move(values);
  return true;
}

void ParseTrainConfig(const json& obj, const std::string& path,
                      estimators::TrainConfig& cfg,
                      std::vector<std::string>& errors) {
  if (!RequireObject(obj, path, errors)) return;
  CheckKeys(obj, path, {"kind", "hidden", "epochs", "batch_size", "lr", "weight_decay"},
            errors);
  std::string kind;
  if (GetString(obj, path, "kind", kind, errors)) {
    try {
      cfg.kind = estimators::EstimatorKindFromName(kind);
    } catch (const std::exception&) {
      errors.push_back(Join(path, "kind") + ": unknown estimator kind '" + kind + "'");
    }
  }
  GetInt(obj, path, "hidden", cfg.hidden, errors);
  GetInt(obj, path, "epochs", cfg.epochs, errors);
  GetInt(obj, path, "batch_size", cfg.batch_size, errors);
  GetDouble(obj, path, "lr", cfg.lr, errors);
  GetDouble(obj, path, "weight_decay", cfg.weight_decay, errors);
}

void ParseEncoderConfig(const json& obj, const std::string& path,
                        attacks::EncoderConfig& cfg,
                        std::vector<std::string>& errors) {
  if (!RequireObject(obj, path, errors)) return;
  CheckKeys(obj, path,
            {"hidden", "embedding_dim", "epochs", "batch_size", "lr", "weight_decay"},
            errors);
  GetInt(obj, path, "hidden", cfg.hidden, errors);
  GetInt(obj, path, "embedding_dim", cfg.embedding_dim, errors);
  GetInt(obj, path, "epochs", cfg.epochs, errors);
  GetInt(obj, path, "batch_size", cfg.batch_size, errors);
  GetDouble(obj, path, "lr", cfg.lr, errors);
  GetDouble(obj, path, "weight_decay", cfg.weight_decay, errors);
}

void ParseReducer(const json& obj, const std::string& path,
                  attacks::FeatureReducer& reducer,
                  std::vector<std::string>& errors) {
  if (!RequireObject(obj, path, errors)) return;
  CheckKeys(obj, path, {"kind", "kernel", "dims"}, errors);
  std::string kind = "maxpool";
  GetString(obj, path, "kind", kind, errors);
  if (kind == "maxpool") {
    int kernel = 3;
    GetInt(obj, path, "kernel", kernel, errors);
    try {
      reducer = attacks::FeatureReducer::MaxPool(kernel);
    } catch (const std::exception& e) {
      errors.push_back(Join(path, "kernel") + ": " + e.what());
    }
  } else if (kind == "pca") {
    int dims = 0;
    if (!GetInt(obj, path, "dims", dims, errors)) {
      errors.push_back(Join(path, "dims") + ": required for a pca reducer");
      return;
    }
    try {
      reducer = attacks::FeatureReducer::Pca(dims);
    } catch (const std::exception& e) {
      errors.push_back(Join(path, "dims") + ": " + e.what());
    }
  } else {
    errors.push_back(Join(path, "kind") + ": expected 'maxpool' or 'pca'");
  }
}

void ParseDefense(const json& obj, const std::string& path,
                  defenses::DefenseMechanism& mech,
                  std::vector<std::string>& errors) {
  if (!RequireObject(obj, path, errors)) return;
  CheckKeys(obj, path,
            {"kind", "prune_rate", "adv_gamma", "adv_step", "adv_iters", "vib_beta",
             "vib_latent_dim", "dpsgd_clip", "dpsgd_sigma"},
            errors);
  std::string kind;
  if (GetString(obj, path, "kind", kind, errors)) {
    try {
      mech.kind = defenses::DefenseKindFromName(kind);
    } catch (const std::exception&) {
      errors.push_back(Join(path, "kind") + ": unknown defense kind '" + kind + "'");
    }
  }
  GetDouble(obj, path, "prune_rate", mech.prune_rate, errors);
  GetDouble(obj, path, "adv_gamma", mech.adv_gamma, errors);
  GetDouble(obj, path, "adv_step", mech.adv_step, errors);
  GetInt(obj, path, "adv_iters", mech.adv_iters, errors);
  GetDouble(obj, path, "vib_beta", mech.vib_beta, errors);
  GetInt(obj, path, "vib_latent_dim", mech.vib_latent_dim, errors);
  GetDouble(obj, path, "dpsgd_clip", mech.dpsgd_clip, errors);
  GetDouble(obj, path, "dpsgd_sigma", mech.dpsgd_sigma, errors);
}

void ParseSynthetic(const json& obj, const std::string& path,
                    data::SyntheticSpec& spec, std::vector<std::string>& errors) {
  if (!RequireObject(obj, path, errors)) return;
  CheckKeys(obj, path,
            {"feature_dim", "m", "prior", "s_a", "s_y", "rho", "rho_scale",
             "noise_scale", "seed", "num_labels"},
            errors);
  GetInt(obj, path, "feature_dim", spec.feature_dim, errors);
  if (GetInt(obj, path, "m", spec.m, errors)) {
    if (spec.m >= 2 && !obj.contains("prior"))
      spec.prior.assign(spec.m, 1.0 / spec.m);
  }
  GetDoubleVector(obj, path, "prior", spec.prior, errors);
  GetDouble(obj, path, "s_a", spec.s_a, errors);
  GetDouble(obj, path, "s_y", spec.s_y, errors);
  GetDouble(obj, path, "rho", spec.rho, errors);
  GetDouble(obj, path, "rho_scale", spec.rho_scale, errors);
  GetDouble(obj, path, "noise_scale", spec.noise_scale, errors);
  GetUint64(obj, path, "seed", spec.seed, errors);
  GetInt(obj, path, "num_labels", spec.num_labels, errors);
}

void ParseGame(const json& obj, const std::string& path, game::GameConfig& gc,
               std::vector<std::string>& errors) {
  if (!RequireObject(obj, path, errors)) return;
  CheckKeys(obj, path,
            {"network_widths", "attack", "adaptive", "estimator", "defender",
             "encoder", "reducer", "n_shadow_pairs", "batch_size", "epochs",
             "rounds", "trials", "defense", "dataset_size", "train_fraction",
             "test_fraction", "public_fraction", "shadow_size", "ratio_bins",
             "property_value", "uia_candidates", "users_total", "records_per_user",
             "n_train_users", "n_shadow_users", "user_strength", "train_lr",
             "train_minibatch"},
            errors);
  GetIntVector(obj, path, "network_widths", gc.network.layer_widths, errors);
  std::string attack;
  if (GetString(obj, path, "attack", attack, errors)) {
    try {
      gc.attack_kind = attacks::AttackKindFromName(attack);
    } catch (const std::exception&) {
      errors.push_back(Join(path, "attack") + ": unknown attack kind '" + attack + "'");
    }
  }
  GetBool(obj, path, "adaptive", gc.adaptive, errors);
  if (obj.contains("estimator"))
    ParseTrainConfig(obj.at("estimator"), Join(path, "estimator"), gc.estimator, errors);
  if (obj.contains("defender"))
    ParseTrainConfig(obj.at("defender"), Join(path, "defender"), gc.defender, errors);
  if (obj.contains("encoder"))
    ParseEncoderConfig(obj.at("encoder"), Join(path, "encoder"), gc.encoder, errors);
  if (obj.contains("reducer"))
    ParseReducer(obj.at("reducer"), Join(path, "reducer"), gc.reducer, errors);
  GetInt(obj, path, "n_shadow_pairs", gc.n_shadow_pairs, errors);
  GetInt(obj, path, "batch_size", gc.batch_size, errors);
  GetInt(obj, path, "epochs", gc.epochs, errors);
  GetIntVector(obj, path, "rounds", gc.rounds, errors);
  GetInt(obj, path, "trials", gc.trials, errors);
  if (obj.contains("defense"))
    ParseDefense(obj.at("defense"), Join(path, "defense"), gc.defense, errors);
  GetInt(obj, path, "dataset_size", gc.dataset_size, errors);
  GetDouble(obj, path, "train_fraction", gc.train_fraction, errors);
  GetDouble(obj, path, "test_fraction", gc.test_fraction, errors);
  GetDouble(obj, path, "public_fraction", gc.public_fraction, errors);
  GetInt(obj, path, "shadow_size", gc.shadow_size, errors);
  GetInt(obj, path, "ratio_bins", gc.bins.m_bins, errors);
  GetInt(obj, path, "property_value", gc.property_value, errors);
  GetInt(obj, path, "uia_candidates", gc.uia_candidates, errors);
  GetInt(obj, path, "users_total", gc.users_total, errors);
  GetInt(obj, path, "records_per_user", gc.records_per_user, errors);
  GetInt(obj, path, "n_train_users", gc.n_train_users, errors);
  GetInt(obj, path, "n_shadow_users", gc.n_shadow_users, errors);
  GetDouble(obj, path, "user_strength", gc.user_strength, errors);
  GetDouble(obj, path, "train_lr", gc.train_lr, errors);
  GetInt(obj, path, "train_minibatch", gc.train_minibatch, errors);
}

void ParseAudit(const json& obj, const std::string& path, AuditCommandConfig& ac,
                std::vector<std::string>& errors) {
  if (!RequireObject(obj, path, errors)) return;
  CheckKeys(obj, path,
            {"clip", "sigma", "delta", "trials", "sensitivity_factor", "label",
             "epochs", "n_attributes", "craft"},
            errors);
  GetDouble(obj, path, "clip", ac.clip, errors);
  GetDouble(obj, path, "sigma", ac.sigma, errors);
  GetDouble(obj, path, "delta", ac.delta, errors);
  GetInt(obj, path, "trials", ac.trials, errors);
  GetDouble(obj, path, "sensitivity_factor", ac.sensitivity_factor, errors);
  GetInt(obj, path, "label", ac.label, errors);
  GetInt(obj, path, "epochs", ac.epochs, errors);
  GetInt(obj, path, "n_attributes", ac.n_attributes, errors);
  if (obj.contains("craft")) {
    const json& craft = obj.at("craft");
    const std::string craft_path = Join(path, "craft");
    if (RequireObject(craft, craft_path, errors)) {
      CheckKeys(craft, craft_path, {"distance", "iters", "step", "hypothesis_value"},
                errors);
      std::string distance;
      if (GetString(craft, craft_path, "distance", distance, errors)) {
        if (distance == "mse") {
          ac.craft.distance = audit::CanaryDistance::kMse;
        } else if (distance == "cosine") {
          ac.craft.distance = audit::CanaryDistance::kCosine;
        } else {
          errors.push_back(Join(craft_path, "distance") + ": expected 'mse' or 'cosine'");
        }
      }
      GetInt(craft, craft_path, "iters", ac.craft.iters, errors);
      GetDouble(craft, craft_path, "step", ac.craft.step, errors);
      GetInt(craft, craft_path, "hypothesis_value", ac.craft.hypothesis_value, errors);
    }
  }
}

void ParseFano(const json& obj, const std::string& path, FanoCommandConfig& fc,
               std::vector<std::string>& errors) {
  if (!RequireObject(obj, path, errors)) return;
  CheckKeys(obj, path, {"channels", "emit_channels"}, errors);
  GetInt(obj, path, "channels", fc.channels, errors);
  GetBool(obj, path, "emit_channels", fc.emit_channels, errors);
}

// ---------------------------------------------------------------------------
// Canonical config echo (sorted keys via nlohmann's ordered map).
// ---------------------------------------------------------------------------

json JsonOf(const estimators::TrainConfig& cfg) {
  return {{"kind", estimators::EstimatorKindName(cfg.kind)},
          {"hidden", cfg.hidden},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"lr", cfg.lr},
          {"weight_decay", cfg.weight_decay}};
}

json JsonOf(const attacks::EncoderConfig& cfg) {
  return {{"hidden", cfg.hidden},
          {"embedding_dim", cfg.embedding_dim},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"lr", cfg.lr},
          {"weight_decay", cfg.weight_decay}};
}

json JsonOf(const attacks::FeatureReducer& reducer) {
  if (reducer.kind() == attacks::ReducerKind::kMaxPool)
    return {{"kind", "maxpool"}, {"kernel", reducer.kernel()}};
  return {{"kind", "pca"}, {"dims", reducer.dims()}};
}

json JsonOf(const defenses::DefenseMechanism& mech) {
  return {{"kind", defenses::DefenseKindName(mech.kind)},
          {"prune_rate", mech.prune_rate},
          {"adv_gamma", mech.adv_gamma},
          {"adv_step", mech.adv_step},
          {"adv_iters", mech.adv_iters},
          {"vib_beta", mech.vib_beta},
          {"vib_latent_dim", mech.vib_latent_dim},
          {"dpsgd_clip", mech.dpsgd_clip},
          {"dpsgd_sigma", mech.dpsgd_sigma}};
}

json JsonOf(const data::SyntheticSpec& spec) {
  return {{"feature_dim", spec.feature_dim},
          {"m", spec.m},
          {"prior", spec.prior},
          {"s_a", spec.s_a},
          {"s_y", spec.s_y},
          {"rho", spec.rho},
          {"rho_scale", spec.rho_scale},
          {"noise_scale", spec.noise_scale},
          {"seed", spec.seed},
          {"num_labels", spec.num_labels}};
}

json JsonOf(const game::GameConfig& gc) {
  return {{"network_widths", gc.network.layer_widths},
          {"attack", attacks::AttackKindName(gc.attack_kind)},
          {"adaptive", gc.adaptive},
          {"estimator", JsonOf(gc.estimator)},
          {"defender", JsonOf(gc.defender)},
          {"encoder", JsonOf(gc.encoder)},
          {"reducer", JsonOf(gc.reducer)},
          {"n_shadow_pairs", gc.n_shadow_pairs},
          {"batch_size", gc.batch_size},
          {"epochs", gc.epochs},
          {"rounds", gc.rounds},
          {"trials", gc.trials},
          {"defense", JsonOf(gc.defense)},
          {"dataset_size", gc.dataset_size},
          {"train_fraction", gc.train_fraction},
          {"test_fraction", gc.test_fraction},
          {"public_fraction", gc.public_fraction},
          {"shadow_size", gc.shadow_size},
          {"ratio_bins", gc.bins.m_bins},
          {"property_value", gc.property_value},
          {"uia_candidates", gc.uia_candidates},
          {"users_total", gc.users_total},
          {"records_per_user", gc.records_per_user},
          {"n_train_users", gc.n_train_users},
          {"n_shadow_users", gc.n_shadow_users},
          {"user_strength", gc.user_strength},
          {"train_lr", gc.train_lr},
          {"train_minibatch", gc.train_minibatch}};
}

json JsonOf(const AuditCommandConfig& ac) {
  return {{"clip", ac.clip},
          {"sigma", ac.sigma},
          {"delta", ac.delta},
          {"trials", ac.trials},
          {"sensitivity_factor", ac.sensitivity_factor},
          {"label", ac.label},
          {"epochs", ac.epochs},
          {"n_attributes", ac.n_attributes},
          {"craft",
           {{"distance", ac.craft.distance == audit::CanaryDistance::kMse ? "mse" : "cosine"},
            {"iters", ac.craft.iters},
            {"step", ac.craft.step},
            {"hypothesis_value", ac.craft.hypothesis_value}}}};
}

// ---------------------------------------------------------------------------
// Command execution.
// ---------------------------------------------------------------------------

struct TrialDetail {
  std::string cell;
  int trial = 0;
  std::string round;
  int true_value = 0;
  int predicted = 0;
};

struct CommandOutput {
  std::vector<ReportRow> rows;
  std::vector<TrialDetail> details;       // game command only
  std::vector<std::string> stdout_lines;  // selftest / fano summaries
  int exit_code = 0;
};

int ArgmaxLowest(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

// Accumulates (round, metric) series across repeats in first-seen order so
// the mean/std rows come out in a stable sequence.
class SeriesAccumulator {
 public:
  void Add(const std::string& round, const std::string& metric, double value) {
    const std::pair<std::string, std::string> key{round, metric};
    auto it = index_.find(key);
    if (it == index_.end()) {
      index_.emplace(key, order_.size());
      order_.push_back(key);
      values_.emplace_back();
      it = index_.find(key);
    }
    values_[it->second].push_back(value);
  }

  void EmitMeanStd(std::vector<ReportRow>& rows) const {
    for (std::size_t i = 0; i < order_.size(); ++i) {
      const auto& [round, metric] = order_[i];
      const std::vector<double>& v = values_[i];
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double sd = 0.0;
      if (v.size() > 1) {
        for (double x : v) sd += (x - mean) * (x - mean);
        sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
      }
      rows.push_back({"mean", round, metric, mean});
      rows.push_back({"std", round, metric, sd});
    }
  }

 private:
  std::map<std::pair<std::string, std::string>, std::size_t> index_;
  std::vector<std::pair<std::string, std::string>> order_;
  std::vector<std::vector<double>> values_;
};

void AddMetricRows(std::vector<ReportRow>& rows, const std::string& cell,
                   const std::string& round, const metrics::MetricsReport& report,
                   SeriesAccumulator* acc = nullptr) {
  const std::pair<const char*, double> entries[] = {
      {"asr", report.asr},
      {"auroc", report.auroc},
      {"advantage", report.advantage},
      {"tpr_at_1pct_fpr", report.tpr_at_1pct_fpr},
      {"baseline", report.baseline},
      {"trials", static_cast<double>(report.trials)},
  };
  for (const auto& [metric, value] : entries) {
    rows.push_back({cell, round, metric, value});
    if (acc != nullptr) acc->Add(round, metric, value);
  }
}

CommandOutput ExecuteGame(const ExperimentConfig& config,
                          const data::Dataset* external) {
  CommandOutput out;
  SeriesAccumulator acc;
  for (int r = 0; r < config.repeats; ++r) {
    game::GameConfig gc = config.game;
    gc.master_seed = Rng(config.seed).Derive("repeat").Derive(r).key();
    const game::GameResult result = game::RunInferenceGame(gc, external);
    const game::AttackEvaluation eval = game::EvaluateAttack(result);
    const std::string cell = "repeat" + std::to_string(r);
    for (std::size_t i = 0; i < result.rounds.size(); ++i)
      AddMetricRows(out.rows, cell, std::to_string(result.rounds[i]),
                    eval.per_round[i], &acc);
    AddMetricRows(out.rows, cell, "multi", eval.multi_round, &acc);
    const game::GameData data = game::PrepareData(gc, external);
    const double task = game::TaskAuroc(result.theta.back(), data.test);
    out.rows.push_back({cell, "-", "task_auroc", task});
    acc.Add("-", "task_auroc", task);
    for (std::size_t t = 0; t < result.trials.size(); ++t) {
      const game::TrialRecord& trial = result.trials[t];
      for (std::size_t i = 0; i < result.rounds.size(); ++i)
        out.details.push_back({cell, static_cast<int>(t),
                               std::to_string(result.rounds[i]), trial.true_a,
                               ArgmaxLowest(trial.posteriors[i])});
      out.details.push_back(
          {cell, static_cast<int>(t), "multi", trial.true_a, trial.a_hat});
    }
  }
  acc.EmitMeanStd(out.rows);
  return out;
}

CommandOutput ExecuteDefenseEval(const ExperimentConfig& config,
                                 const data::Dataset* external) {
  CommandOutput out;
  game::GameConfig gc = config.game;
  gc.master_seed = config.seed;
  const std::vector<game::DefenseCell> cells =
      game::RunDefenseEval(gc, defenses::SweepProfiles(), external);
  for (const game::DefenseCell& cell : cells) {
    const std::string name = cell.name + "/" + (cell.adaptive ? "adaptive" : "static");
    AddMetricRows(out.rows, name, "multi", cell.eval.multi_round);
  }
  return out;
}

CommandOutput ExecuteSweep(const ExperimentConfig& config,
                           const data::Dataset* external) {
  CommandOutput out;
  game::GameConfig gc = config.game;
  gc.master_seed = config.seed;
  const std::vector<game::SweepPoint> points =
      game::PrivacyUtilitySweep(gc, external);
  for (const game::SweepPoint& p : points) {
    out.rows.push_back({p.name, "-", "advantage", p.advantage});
    out.rows.push_back({p.name, "-", "task_auroc", p.task_auroc});
  }
  return out;
}

CommandOutput ExecuteAudit(const ExperimentConfig& config,
                           const data::Dataset* external) {
  CommandOutput out;
  game::GameConfig gc = config.game;
  // The audit flips an attribute one-hot block, so prepare attribute-game
  // data (sensitive one-hot appended) regardless of the configured attack.
  gc.attack_kind = attacks::AttackKind::kAttribute;
  gc.master_seed = config.seed;
  Rng master(config.seed);
  const game::GameData data = game::PrepareData(gc, external);
  const int feature_dim = data.train.feature_dim();
  const int m = data.train.m;
  if (gc.network.layer_widths.empty() ||
      gc.network.layer_widths.front() != feature_dim) {
    throw std::runtime_error(
        "network input width " +
        std::to_string(gc.network.layer_widths.empty() ? 0
                                                       : gc.network.layer_widths.front()) +
        " does not match the data feature dimension " + std::to_string(feature_dim));
  }
  nn::NetworkSpec spec = gc.network;
  spec.init_seed = master.Derive("init").key();
  nn::ModelParameters theta = nn::InitNetwork(spec);
  const defenses::DefenseMechanism identity;
  for (int e = 1; e <= config.audit.epochs; ++e)
    theta = game::TrainOneEpoch(theta, data.train, identity, gc.train_lr,
                                gc.train_minibatch, master.Derive("train-epoch").Derive(e));

  audit::AttributeSpec attr;
  attr.slot_begin = feature_dim - m;
  attr.num_values = m;
  attr.one_hot = true;
  attr.label = config.audit.label;
  audit::AuditConfig ac;
  ac.clip = config.audit.clip;
  ac.sigma = config.audit.sigma;
  ac.delta = config.audit.delta;
  ac.trials = config.audit.trials;
  ac.sensitivity_factor = config.audit.sensitivity_factor;
  ac.attribute = attr;
  const int n_attributes = config.audit.n_attributes > 0
                               ? config.audit.n_attributes
                               : (feature_dim - m) + 1;

  audit::CanaryCraftConfig random_cfg = config.audit.craft;
  random_cfg.iters = 0;
  random_cfg.seed = master.Derive("canary-random").key();
  audit::CanaryCraftConfig craft_cfg = config.audit.craft;
  craft_cfg.seed = master.Derive("canary").key();

  const std::pair<const char*, audit::CanaryRecord> cells[] = {
      {"random", audit::CraftCanary(theta, attr, 0, ac.clip, random_cfg)},
      {"crafted", audit::CraftCanary(theta, attr, 0, ac.clip, craft_cfg)},
  };
  for (const auto& [cell, record] : cells) {
    ac.seed = master.Derive("audit-game").Derive(cell).key();
    const audit::AuditSamples samples = audit::RunAuditGame(record, theta, ac);
    const audit::EpsilonEstimate est =
        audit::EmpiricalEpsilon(samples.h0, samples.h1, ac.delta);
    const audit::AuditRow report = audit::AuditReport(est, ac, n_attributes);
    double h0_mean = 0.0;
    for (double t : samples.h0) h0_mean += t;
    if (!samples.h0.empty()) h0_mean /= static_cast<double>(samples.h0.size());
    const std::pair<const char*, double> entries[] = {
        {"eps_hat", est.eps_hat},
        {"eps_lo", est.lo},
        {"eps_hi", est.hi},
        {"analytic_eps", report.analytic_eps},
        {"normalized_ratio", report.normalized_ratio},
        {"fpr", est.fpr},
        {"fnr", est.fnr},
        {"critical_value", est.critical_value},
        {"degenerate", est.degenerate ? 1.0 : 0.0},
        {"indistinguishable", report.indistinguishable ? 1.0 : 0.0},
        {"n_h0", static_cast<double>(samples.h0.size())},
        {"n_h1", static_cast<double>(samples.h1.size())},
        {"h0_mean", h0_mean},
        {"h0_mean_expected",
         audit::ChiMean(static_cast<int>(theta.param_count()), ac.sigma)},
        {"craft_objective", record.objective},
        {"craft_nondecreasing_fraction", record.nondecreasing_fraction},
    };
    for (const auto& [metric, value] : entries)
      out.rows.push_back({cell, "-", metric, value});
  }
  return out;
}

std::vector<double> DirichletRow(Rng& rng, int n) {
  std::vector<double> row(n);
  double total = 0.0;
  for (double& v : row) {
    v = -std::log(std::max(rng.Uniform(), 1e-300));
    total += v;
  }
  for (double& v : row) v /= total;
  return row;
}

analysis::DiscreteChannel RandomChannel(Rng& rng) {
  const int m = 2 + rng.UniformInt(3);   // |X| in 2..4
  const int ny = 2 + rng.UniformInt(7);  // |Y| in 2..8
  analysis::DiscreteChannel channel;
  channel.prior = DirichletRow(rng, m);
  channel.conditional.reserve(m);
  for (int x = 0; x < m; ++x) channel.conditional.push_back(DirichletRow(rng, ny));
  return channel;
}

struct ChannelCheck {
  double mi = 0.0;
  double bayes = 0.0;
  double fano_bound = 0.0;
  double adv_bound = 0.0;
  bool mi_ok = false;
  bool fano_ok = false;
  bool adv_ok = false;
};

ChannelCheck CheckChannel(const analysis::DiscreteChannel& channel) {
  ChannelCheck check;
  const int m = static_cast<int>(channel.prior.size());
  const int ny = static_cast<int>(channel.conditional.front().size());
  std::vector<double> marginal(ny, 0.0);
  for (int x = 0; x < m; ++x)
    for (int y = 0; y < ny; ++y)
      marginal[y] += channel.prior[x] * channel.conditional[x][y];
  const double hx = analysis::Entropy(channel.prior);
  const double hy = analysis::Entropy(marginal);
  check.mi = analysis::MutualInformationExact(channel);
  check.mi_ok = check.mi >= -1e-12 && check.mi <= std::min(hx, hy) + 1e-9;
  check.bayes = analysis::BayesError(channel);
  check.fano_bound = analysis::FanoErrorLowerBound(hx, check.mi, m);
  check.fano_ok = check.fano_bound <= check.bayes + 1e-9;
  const double p_star = *std::max_element(channel.prior.begin(), channel.prior.end());
  if (m > 2) {
    check.adv_bound = analysis::AdvantageUpperBound(hx, check.mi, m, p_star);
  } else {
    // Binary alphabets fall outside the closed-form bound; cap the advantage
    // through the error lower bound instead: accuracy <= 1 - fano_bound.
    check.adv_bound =
        p_star < 1.0
            ? std::max(0.0, (1.0 - check.fano_bound - p_star) / (1.0 - p_star))
            : 0.0;
  }
  const double bayes_adv =
      p_star < 1.0 ? (1.0 - check.bayes - p_star) / (1.0 - p_star) : 0.0;
  check.adv_ok = bayes_adv <= check.adv_bound + 1e-9;
  return check;
}

CommandOutput ExecuteFano(const ExperimentConfig& config) {
  CommandOutput out;
  const Rng root = Rng(config.seed).Derive("fano");
  int mi_violations = 0;
  int fano_violations = 0;
  int adv_violations = 0;
  for (int i = 0; i < config.fano.channels; ++i) {
    Rng stream = root.Derive(i);
    const analysis::DiscreteChannel channel = RandomChannel(stream);
    const ChannelCheck check = CheckChannel(channel);
    mi_violations += check.mi_ok ? 0 : 1;
    fano_violations += check.fano_ok ? 0 : 1;
    adv_violations += check.adv_ok ? 0 : 1;
    if (config.fano.emit_channels) {
      const std::string cell = "channel" + std::to_string(i);
      out.rows.push_back({cell, "-", "mi", check.mi});
      out.rows.push_back({cell, "-", "bayes_error", check.bayes});
      out.rows.push_back({cell, "-", "fano_bound", check.fano_bound});
      out.rows.push_back({cell, "-", "advantage_bound", check.adv_bound});
    }
  }
  out.rows.push_back(
      {"summary", "-", "channels", static_cast<double>(config.fano.channels)});
  out.rows.push_back({"summary", "-", "mi_violations", static_cast<double>(mi_violations)});
  out.rows.push_back(
      {"summary", "-", "fano_violations", static_cast<double>(fano_violations)});
  out.rows.push_back(
      {"summary", "-", "advantage_violations", static_cast<double>(adv_violations)});
  out.stdout_lines.push_back("fano: checked " + std::to_string(config.fano.channels) +
                             " channels, violations " +
                             std::to_string(mi_violations + fano_violations + adv_violations));
  return out;
}

CommandOutput ExecuteSelftest(const ExperimentConfig& config) {
  CommandOutput out;
  const std::vector<SelftestResult> results = RunSelftest(config.seed);
  bool any_failed = false;
  for (const SelftestResult& r : results) {
    out.rows.push_back({r.name, "-", "passed", static_cast<double>(r.passed)});
    out.rows.push_back({r.name, "-", "failed", static_cast<double>(r.failed)});
    out.stdout_lines.push_back(r.name + ": passed " + std::to_string(r.passed) +
                               " failed " + std::to_string(r.failed));
    any_failed = any_failed || r.failed > 0;
  }
  out.exit_code = any_failed ? 1 : 0;
  return out;
}

std::string FormatTrialCsv(const std::vector<TrialDetail>& details,
                           const std::string& manifest_hash) {
  std::ostringstream os;
  os << "cell,trial,round,true_value,predicted,manifest\n";
  for (const TrialDetail& d : details)
    os << d.cell << ',' << d.trial << ',' << d.round << ',' << d.true_value << ','
       << d.predicted << ',' << manifest_hash << '\n';
  return os.str();
}

int ExecuteExperiment(const ExperimentConfig& config) {
  const std::string canonical = CanonicalConfigJson(config);
  const std::string hash = ManifestHash(std::string(kLibraryVersion) + "\n" + canonical);
  const std::filesystem::path out_dir(config.out_dir);

  json manifest;
  manifest["version"] = kLibraryVersion;
  manifest["hash"] = hash;
  manifest["out"] = config.out_dir;
  manifest["config"] = json::parse(canonical);
  WriteFile((out_dir / "manifest.json").string(), manifest.dump(2) + "\n");

  std::optional<data::Dataset> external;
  if (config.use_csv) {
    const data::Schema schema = data::Schema::FromJsonFile(config.csv.schema_path);
    data::LoadOptions options;
    options.minmax_scale = config.csv.minmax_scale;
    options.include_sensitive_in_features = false;  // the game appends its own
    external = data::LoadCsv(config.csv.csv_path, schema, options);
  }
  const data::Dataset* external_ptr = external ? &*external : nullptr;

  CommandOutput result;
  switch (config.command) {
    case Command::kGame: result = ExecuteGame(config, external_ptr); break;
    case Command::kDefenseEval: result = ExecuteDefenseEval(config, external_ptr); break;
    case Command::kSweep: result = ExecuteSweep(config, external_ptr); break;
    case Command::kAudit: result = ExecuteAudit(config, external_ptr); break;
    case Command::kFano: result = ExecuteFano(config); break;
    case Command::kSelftest: result = ExecuteSelftest(config); break;
  }

  const char* metrics_name =
      config.format == ReportFormat::kCsv ? "metrics.csv" : "metrics.json";
  WriteFile((out_dir / metrics_name).string(),
            FormatReport(result.rows, config.format, hash));
  if (!result.details.empty())
    WriteFile((out_dir / "trials.csv").string(),
              FormatTrialCsv(result.details, hash));
  for (const std::string& line : result.stdout_lines) std::cout << line << "\n";
  return result.exit_code;
}

int ReportErrors(const ExperimentConfig& config,
                 const std::vector<std::string>& errors, int exit_code) {
  json record;
  record["command"] = CommandName(config.command);
  record["errors"] = errors;
  record["exit_code"] = exit_code;
  WriteFile((std::filesystem::path(config.out_dir) / "error.json").string(),
            record.dump(2) + "\n");
  for (const std::string& e : errors) std::cerr << "error: " << e << "\n";
  return exit_code;
}

}  // namespace

// ---------------------------------------------------------------------------
// Report emission.
// ---------------------------------------------------------------------------

ReportFormat ReportFormatFromName(const std::string& name) {
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "json") return ReportFormat::kJson;
  throw std::invalid_argument("unknown report format: " + name);
}

const char* ReportFormatName(ReportFormat format) {
  return format == ReportFormat::kCsv ? "csv" : "json";
}

std::string FormatReport(const std::vector<ReportRow>& rows, ReportFormat format,
                         const std::string& manifest_hash) {
  std::ostringstream os;
  if (format == ReportFormat::kCsv) {
    os << "cell,round,metric,value,manifest\n";
    for (const ReportRow& row : rows)
      os << row.cell << ',' << row.round << ',' << row.metric << ','
         << FormatValue(row.value) << ',' << manifest_hash << '\n';
    return os.str();
  }
  os << "{\n  \"manifest\": \"" << EscapeJson(manifest_hash) << "\",\n  \"rows\": [";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ReportRow& row = rows[i];
    os << (i == 0 ? "\n" : ",\n");
    os << "    {\"cell\": \"" << EscapeJson(row.cell) << "\", \"round\": \""
       << EscapeJson(row.round) << "\", \"metric\": \"" << EscapeJson(row.metric)
       << "\", \"value\": ";
    if (std::isfinite(row.value)) {
      os << FormatValue(row.value);
    } else {
      os << '"' << FormatValue(row.value) << '"';
    }
    os << "}";
  }
  os << (rows.empty() ? "]\n}\n" : "\n  ]\n}\n");
  return os.str();
}

ParsedReport ParseReportCsv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "cell,round,metric,value,manifest")
    throw std::runtime_error("malformed report header");
  ParsedReport report;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = SplitCsvLine(line);
    if (fields.size() != 5)
      throw std::runtime_error("malformed report row: " + line);
    ReportRow row;
    row.cell = fields[0];
    row.round = fields[1];
    row.metric = fields[2];
    char* end = nullptr;
    row.value = std::strtod(fields[3].c_str(), &end);
    if (end == fields[3].c_str())
      throw std::runtime_error("malformed report value: " + fields[3]);
    if (report.manifest_hash.empty()) {
      report.manifest_hash = fields[4];
    } else if (report.manifest_hash != fields[4]) {
      throw std::runtime_error("inconsistent manifest hash in report");
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string ManifestHash(const std::string& canonical_config_json) {
  std::uint64_t h = 14695981039346656037ull;  // FNV-1a offset basis
  for (unsigned char c : canonical_config_json) {
    h ^= c;
    h *= 1099511628211ull;  // FNV-1a prime
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void WriteFile(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Config parsing entry points.
// ---------------------------------------------------------------------------

Command CommandFromName(const std::string& name) {
  if (name == "game") return Command::kGame;
  if (name == "defense-eval") return Command::kDefenseEval;
  if (name == "sweep") return Command::kSweep;
  if (name == "audit") return Command::kAudit;
  if (name == "fano") return Command::kFano;
  if (name == "selftest") return Command::kSelftest;
  throw std::invalid_argument("unknown command: " + name);
}

const char* CommandName(Command command) {
  switch (command) {
    case Command::kGame: return "game";
    case Command::kDefenseEval: return "defense-eval";
    case Command::kSweep: return "sweep";
    case Command::kAudit: return "audit";
    case Command::kFano: return "fano";
    case Command::kSelftest: return "selftest";
  }
  return "game";
}

ParseResult ParseExperimentConfig(const std::string& json_text) {
  ParseResult result;
  std::vector<std::string>& errors = result.errors;
  const json root = json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  if (root.is_discarded()) {
    errors.push_back("config is not valid JSON");
    return result;
  }
  if (!root.is_object()) {
    errors.push_back("config root must be an object");
    return result;
  }
  ExperimentConfig& config = result.config;
  CheckKeys(root, "",
            {"command", "seed", "out", "repeats", "format", "data", "game", "audit",
             "fano"},
            errors);
  std::string command;
  if (GetString(root, "", "command", command, errors)) {
    try {
      config.command = CommandFromName(command);
    } catch (const std::exception&) {
      errors.push_back("command: unknown command '" + command + "'");
    }
  } else if (!root.contains("command")) {
    errors.push_back("command: required");
  }
  config.seed_set = GetUint64(root, "", "seed", config.seed, errors);
  GetString(root, "", "out", config.out_dir, errors);
  GetInt(root, "", "repeats", config.repeats, errors);
  if (config.repeats < 1) errors.push_back("repeats: must be at least 1");
  std::string format;
  if (GetString(root, "", "format", format, errors)) {
    try {
      config.format = ReportFormatFromName(format);
    } catch (const std::exception&) {
      errors.push_back("format: expected 'csv' or 'json'");
    }
  }

  if (root.contains("data")) {
    const json& data_obj = root.at("data");
    if (RequireObject(data_obj, "data", errors)) {
      CheckKeys(data_obj, "data", {"synthetic", "csv"}, errors);
      const bool has_synth = data_obj.contains("synthetic");
      const bool has_csv = data_obj.contains("csv");
      if (has_synth == has_csv) {
        errors.push_back("data: exactly one of 'synthetic' or 'csv' is required");
      } else if (has_synth) {
        ParseSynthetic(data_obj.at("synthetic"), "data.synthetic",
                       config.game.data_spec, errors);
      } else {
        config.use_csv = true;
        const json& csv = data_obj.at("csv");
        if (RequireObject(csv, "data.csv", errors)) {
          CheckKeys(csv, "data.csv", {"path", "schema", "minmax_scale"}, errors);
          if (!GetString(csv, "data.csv", "path", config.csv.csv_path, errors) &&
              !csv.contains("path"))
            errors.push_back("data.csv.path: required");
          if (!GetString(csv, "data.csv", "schema", config.csv.schema_path, errors) &&
              !csv.contains("schema"))
            errors.push_back("data.csv.schema: required");
          GetBool(csv, "data.csv", "minmax_scale", config.csv.minmax_scale, errors);
        }
      }
    }
  } else {
    errors.push_back("data: required (declare exactly one of 'synthetic' or 'csv')");
  }

  if (root.contains("game")) ParseGame(root.at("game"), "game", config.game, errors);
  if (root.contains("audit")) ParseAudit(root.at("audit"), "audit", config.audit, errors);
  if (root.contains("fano")) ParseFano(root.at("fano"), "fano", config.fano, errors);
  return result;
}

std::string CanonicalConfigJson(const ExperimentConfig& config) {
  // The output location does not influence results, so it stays out of the
  // canonical form: runs into different directories hash identically.
  json j;
  j["command"] = CommandName(config.command);
  j["seed"] = config.seed;
  j["repeats"] = config.repeats;
  j["format"] = ReportFormatName(config.format);
  if (config.use_csv) {
    j["data"] = {{"csv",
                  {{"path", config.csv.csv_path},
                   {"schema", config.csv.schema_path},
                   {"minmax_scale", config.csv.minmax_scale}}}};
  } else {
    j["data"] = {{"synthetic", JsonOf(config.game.data_spec)}};
  }
  j["game"] = JsonOf(config.game);
  j["audit"] = JsonOf(config.audit);
  j["fano"] = {{"channels", config.fano.channels},
               {"emit_channels", config.fano.emit_channels}};
  return j.dump();
}

// ---------------------------------------------------------------------------
// Run entry points.
// ---------------------------------------------------------------------------

int RunExperimentText(const std::string& config_text, const RunOverrides& overrides) {
  ParseResult parsed = ParseExperimentConfig(config_text);
  if (overrides.seed) {
    parsed.config.seed = *overrides.seed;
    parsed.config.seed_set = true;
  }
  if (overrides.out_dir) parsed.config.out_dir = *overrides.out_dir;
  if (overrides.repeats) {
    parsed.config.repeats = *overrides.repeats;
    if (parsed.config.repeats < 1)
      parsed.errors.push_back("repeats: must be at least 1");
  }
  if (!parsed.config.seed_set)
    parsed.errors.push_back("seed: required (config key 'seed' or --seed)");
  if (!parsed.errors.empty()) return ReportErrors(parsed.config, parsed.errors, 2);
  try {
    return ExecuteExperiment(parsed.config);
  } catch (const std::exception& e) {
    return ReportErrors(parsed.config, {e.what()}, 3);
  }
}

int RunExperiment(const std::string& config_path, const RunOverrides& overrides) {
  std::ifstream is(config_path, std::ios::binary);
  if (!is) {
    ExperimentConfig config;
    if (overrides.out_dir) config.out_dir = *overrides.out_dir;
    return ReportErrors(config, {"cannot read config file: " + config_path}, 2);
  }
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return RunExperimentText(buffer.str(), overrides);
}

// ---------------------------------------------------------------------------
// Selftest batteries.
// ---------------------------------------------------------------------------

std::vector<SelftestResult> RunSelftest(std::uint64_t seed) {
  constexpr int kInstances = 200;
  const Rng root = Rng(seed).Derive("selftest");
  std::vector<SelftestResult> results;

  {
    SelftestResult r{"stream-splitting", 0, 0};
    const Rng base = root.Derive("streams");
    for (int i = 0; i < kInstances; ++i) {
      Rng a = base.Derive(i);
      Rng b = base.Derive(i);
      bool ok = true;
      for (int k = 0; k < 8; ++k) ok = ok && a.NextU64() == b.NextU64();
      // Labeled children are independent of sibling consumption.
      Rng parent1 = base.Derive(i);
      Rng child_x = parent1.Derive("x");
      child_x.NextU64();
      const std::uint64_t y1 = parent1.Derive("y").key();
      const std::uint64_t y2 = base.Derive(i).Derive("y").key();
      ok = ok && y1 == y2;
      // Distinct labels give distinct streams.
      bool differs = false;
      Rng da = base.Derive(i).Derive("x");
      Rng db = base.Derive(i).Derive("y");
      for (int k = 0; k < 8 && !differs; ++k) differs = da.NextU64() != db.NextU64();
      ok = ok && differs;
      (ok ? r.passed : r.failed)++;
    }
    results.push_back(r);
  }

  {
    SelftestResult r{"defense-transforms", 0, 0};
    const Rng base = root.Derive("defenses");
    for (int i = 0; i < kInstances; ++i) {
      Rng rng = base.Derive(i);
      const int n = 8 + rng.UniformInt(57);
      std::vector<double> g(n);
      for (double& v : g) v = rng.Normal(0.0, 2.0);
      bool ok = defenses::ApplyIdentity(g) == g;
      const double rate = 0.5 + 0.49 * rng.Uniform();
      const std::vector<double> pruned = defenses::Prune(g, rate);
      int zeros = 0;
      double max_zeroed = 0.0;
      double min_kept = std::numeric_limits<double>::infinity();
      for (int k = 0; k < n; ++k) {
        if (pruned[k] == 0.0) {
          ++zeros;
          max_zeroed = std::max(max_zeroed, std::abs(g[k]));
        } else {
          ok = ok && pruned[k] == g[k];
          min_kept = std::min(min_kept, std::abs(g[k]));
        }
      }
      ok = ok && zeros >= static_cast<int>(std::floor(rate * n));
      ok = ok && (zeros == n || max_zeroed <= min_kept + 1e-15);
      for (double v : defenses::Sign(g))
        ok = ok && (v == -1.0 || v == 0.0 || v == 1.0);
      const double clip = 0.1 + rng.Uniform();
      std::vector<std::vector<double>> per_sample{g};
      Rng noise = rng.Derive("noise");
      const std::vector<double> private_g = defenses::Dpsgd(per_sample, clip, 0.0, noise);
      double norm = 0.0;
      for (double v : private_g) norm += v * v;
      ok = ok && std::sqrt(norm) <= clip + 1e-9;
      (ok ? r.passed : r.failed)++;
    }
    results.push_back(r);
  }

  {
    SelftestResult r{"ordinal-recombination", 0, 0};
    const Rng base = root.Derive("ordinal");
    for (int i = 0; i < kInstances; ++i) {
      Rng rng = base.Derive(i);
      const int m = 3 + rng.UniformInt(6);
      std::vector<double> exceed(m - 1);
      for (double& v : exceed) v = rng.Uniform();
      const std::vector<double> p = attacks::OrdinalRecombine(exceed);
      bool ok = static_cast<int>(p.size()) == m;
      double total = 0.0;
      for (double v : p) {
        ok = ok && v >= 0.0;
        total += v;
      }
      ok = ok && std::abs(total - 1.0) <= 1e-12;
      (ok ? r.passed : r.failed)++;
    }
    results.push_back(r);
  }

  {
    SelftestResult r{"information-bounds", 0, 0};
    const Rng base = root.Derive("channels");
    for (int i = 0; i < kInstances; ++i) {
      Rng rng = base.Derive(i);
      const analysis::DiscreteChannel channel = RandomChannel(rng);
      const ChannelCheck check = CheckChannel(channel);
      (check.mi_ok && check.fano_ok && check.adv_ok ? r.passed : r.failed)++;
    }
    results.push_back(r);
  }

  {
    SelftestResult r{"score-fusion", 0, 0};
    const Rng base = root.Derive("fusion");
    for (int i = 0; i < kInstances; ++i) {
      Rng rng = base.Derive(i);
      const int m = 2 + rng.UniformInt(5);
      const std::vector<double> prior = DirichletRow(rng, m);
      const std::vector<double> p1 = DirichletRow(rng, m);
      const std::vector<double> p2 = DirichletRow(rng, m);
      // One round: fused scores are the log posterior, so the softmax must
      // recover it and the argmax must match.
      const attacks::AggregateResult single = attacks::MultiRoundAggregate({p1}, prior);
      double max_score = *std::max_element(single.log_scores.begin(),
                                           single.log_scores.end());
      double z = 0.0;
      std::vector<double> soft(m);
      for (int k = 0; k < m; ++k) {
        soft[k] = std::exp(single.log_scores[k] - max_score);
        z += soft[k];
      }
      bool ok = true;
      for (int k = 0; k < m; ++k) ok = ok && std::abs(soft[k] / z - p1[k]) <= 1e-9;
      int argmax = 0;
      for (int k = 1; k < m; ++k)
        if (p1[k] > p1[argmax]) argmax = k;
      ok = ok && single.a_hat == argmax;
      // Two rounds: scores decompose as sum of log posteriors minus log prior.
      const attacks::AggregateResult fused = attacks::MultiRoundAggregate({p1, p2}, prior);
      for (int k = 0; k < m; ++k) {
        const double expected = std::log(std::max(p1[k], 1e-12)) +
                                std::log(std::max(p2[k], 1e-12)) -
                                std::log(std::max(prior[k], 1e-12));
        ok = ok && std::abs(fused.log_scores[k] - expected) <= 1e-9;
      }
      (ok ? r.passed : r.failed)++;
    }
    results.push_back(r);
  }

  return results;
}

}  // namespace gradlab::cli
