// Copyright 2026 The bmm-lab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "bmm/csv.hpp"
#include "bmm/data.hpp"
#include "bmm/error.hpp"
#include "bmm/mixup.hpp"
#include "bmm/model.hpp"
#include "bmm/train.hpp"

namespace bmm {

/// Everything one experiment needs, loaded from an INI-style file:
///
///   [data]   n_classes dim_a dim_v n_train n_test snr_a snr_v label_noise_v seed
///   [model]  hidden_dim feat_dim fusion=concat|sum|decision
///   [train]  epochs batch_size lr adam_beta1 adam_beta2 adam_eps seed eval_every
///   [mixup]  mode=none|mm|bmm gamma fixed_lambda alpha warmup_epochs rho_full_pass
///
/// Every key is optional; unknown sections or keys are rejected.
struct ExperimentConfig {
  DatasetSpec data;
  TrainConfig train;

  void validate() const {
    data.validate();
    train.validate();
  }
};

inline FusionKind parse_fusion(const std::string& s, const std::string& key = "fusion") {
  if (s == "concat") return FusionKind::kConcat;
  if (s == "sum") return FusionKind::kSum;
  if (s == "decision") return FusionKind::kDecision;
  throw ConfigError(key, "expected concat|sum|decision, got '" + s + "'");
}

inline MixupMode parse_mode(const std::string& s, const std::string& key = "mode") {
  if (s == "none") return MixupMode::kNone;
  if (s == "mm") return MixupMode::kMM;
  if (s == "bmm") return MixupMode::kBMM;
  throw ConfigError(key, "expected none|mm|bmm, got '" + s + "'");
}

namespace detail {

inline double parse_real_key(const std::string& key, const std::string& text) {
  double v = 0.0;
  if (!parse_real(text, v)) throw ConfigError(key, "expected a real number, got '" + text + "'");
  return v;
}

inline std::uint64_t parse_count_key(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

inline std::uint32_t parse_u32_key(const std::string& key, const std::string& text) {
  const std::uint64_t v = parse_count_key(key, text);
  if (v > 0xFFFFFFFFull) throw ConfigError(key, "value too large");
  return static_cast<std::uint32_t>(v);
}

inline bool parse_bool_key(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key, "expected true|false, got '" + text + "'");
}

}  // namespace detail

/// Applies one `section.key = value` assignment; unknown keys throw.
inline void apply_config_key(ExperimentConfig& cfg, const std::string& section, const std::string& key,
                             const std::string& value) {
  using namespace detail;
  const std::string& k = key;
  DatasetSpec& d = cfg.data;
  TrainConfig& t = cfg.train;
  if (section == "data") {
    if (k == "n_classes") d.n_classes = parse_u32_key(k, value);
    else if (k == "dim_a") d.dim_a = parse_u32_key(k, value);
    else if (k == "dim_v") d.dim_v = parse_u32_key(k, value);
    else if (k == "n_train") d.n_train = parse_u32_key(k, value);
    else if (k == "n_test") d.n_test = parse_u32_key(k, value);
    else if (k == "snr_a") d.snr_a = parse_real_key(k, value);
    else if (k == "snr_v") d.snr_v = parse_real_key(k, value);
    else if (k == "label_noise_v") d.label_noise_v = parse_real_key(k, value);
    else if (k == "seed") d.seed = parse_count_key(k, value);
    else throw ConfigError(section + "." + k, "unknown key");
  } else if (section == "model") {
    if (k == "hidden_dim") t.hidden_dim = parse_count_key(k, value);
    else if (k == "feat_dim") t.feat_dim = parse_count_key(k, value);
    else if (k == "fusion") t.fusion = parse_fusion(value, k);
    else throw ConfigError(section + "." + k, "unknown key");
  } else if (section == "train") {
    if (k == "epochs") t.epochs = parse_count_key(k, value);
    else if (k == "batch_size") t.batch_size = parse_count_key(k, value);
    else if (k == "lr") t.lr = parse_real_key(k, value);
    else if (k == "adam_beta1") t.adam_beta1 = parse_real_key(k, value);
    else if (k == "adam_beta2") t.adam_beta2 = parse_real_key(k, value);
    else if (k == "adam_eps") t.adam_eps = parse_real_key(k, value);
    else if (k == "seed") t.seed = parse_count_key(k, value);
    else if (k == "eval_every") t.eval_every = parse_count_key(k, value);
    else throw ConfigError(section + "." + k, "unknown key");
  } else if (section == "mixup") {
    MixupConfig& m = t.mixup;
    if (k == "mode") m.mode = parse_mode(value, k);
    else if (k == "gamma") m.gamma = parse_real_key(k, value);
    else if (k == "fixed_lambda") m.fixed_lambda = parse_real_key(k, value);
    else if (k == "alpha") m.alpha = parse_real_key(k, value);
    else if (k == "warmup_epochs") m.warmup_epochs = parse_count_key(k, value);
    else if (k == "rho_full_pass") m.rho_full_pass = parse_bool_key(k, value);
    else throw ConfigError(section + "." + k, "unknown key");
  } else {
    throw ConfigError(section, "unknown section");
  }
}

/// Parses and validates a config document.
inline ExperimentConfig parse_config(std::istream& in, const std::string& name = "config") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("", name + ": line " + std::to_string(e.line()) + ": " + e.message());
  }
  ExperimentConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(section, "key outside any section");
    }
    for (const auto& [key, node] : body) apply_config_key(cfg, section, key, node.data());
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in, path.string());
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

}  // namespace bmm
