// Copyright 2026 The bmm-lab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "bmm/array2.hpp"
#include "bmm/autodiff.hpp"
#include "bmm/csv.hpp"
#include "bmm/data.hpp"
#include "bmm/error.hpp"
#include "bmm/mixup.hpp"
#include "bmm/model.hpp"
#include "bmm/rng.hpp"

namespace bmm {

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 64;
  double lr = 5e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  MixupConfig mixup;
  FusionKind fusion = FusionKind::kConcat;
  std::size_t hidden_dim = 64;
  std::size_t feat_dim = 32;
  /// Test metrics are recomputed every `eval_every` epochs (and on the last
  /// epoch); rows in between repeat the latest evaluation.
  std::size_t eval_every = 1;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs", "must be >= 1");
    if (batch_size < 2) throw ConfigError("batch_size", "must be >= 2");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr", "must be > 0");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1", "must lie in (0,1)");
    if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2", "must lie in (0,1)");
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps", "must be > 0");
    if (hidden_dim < 1) throw ConfigError("hidden_dim", "must be >= 1");
    if (feat_dim < 1) throw ConfigError("feat_dim", "must be >= 1");
    if (eval_every < 1) throw ConfigError("eval_every", "must be >= 1");
    mixup.validate();
  }
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamOptions {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Array2> m;
  std::vector<Array2> v;
  std::uint64_t t = 0;
};

/// One bias-corrected Adam update. Moments are created on the first call.
inline void adam_step(std::span<Array2* const> params, std::span<const Array2> grads, AdamState& state,
                      const AdamOptions& opt) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters vs " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    for (const Array2* p : params) {
      state.m.emplace_back(p->rows(), p->cols());
      state.v.emplace_back(p->rows(), p->cols());
    }
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Array2& p = *params[k];
    const Array2& g = grads[k];
    Array2::require_same_shape(p, g, "adam_step");
    Array2& m = state.m[k];
    Array2& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
      p[i] -= opt.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + opt.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc_multi = 0.0;
  double train_acc_a = 0.0;
  double train_acc_v = 0.0;
  double test_acc_multi = 0.0;
  double test_acc_a = 0.0;
  double test_acc_v = 0.0;
  double rho_v = 1.0;
  double lambda_applied = 0.0;
  /// audio | video | balanced | warmup
  std::string strong_modality = "warmup";

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

inline constexpr const char* kMetricsHeader =
    "epoch,train_loss,train_acc_multi,train_acc_a,train_acc_v,test_acc_multi,test_acc_a,test_acc_v,"
    "rho_v,lambda_applied,strong_modality";

inline void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> rows) {
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.epoch << ',' << format_real(r.train_loss) << ',' << format_real(r.train_acc_multi) << ','
        << format_real(r.train_acc_a) << ',' << format_real(r.train_acc_v) << ','
        << format_real(r.test_acc_multi) << ',' << format_real(r.test_acc_a) << ','
        << format_real(r.test_acc_v) << ',' << format_real(r.rho_v) << ','
        << format_real(r.lambda_applied) << ',' << r.strong_modality << '\n';
  }
}

inline std::string metrics_csv(std::span<const EpochMetrics> rows) {
  std::ostringstream os;
  write_metrics_csv(os, rows);
  return os.str();
}

/// Parses a metrics CSV. Errors carry the 1-based line number.
inline std::vector<EpochMetrics> parse_metrics_csv(std::istream& in, const std::string& name = "metrics") {
  std::vector<EpochMetrics> rows;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw FormatError(name + ": line 1: missing header", 1);
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader) throw FormatError(name + ": line 1: unexpected header", 1);
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_fields(line);
    auto fail = [&](const std::string& why) {
      return FormatError(name + ": line " + std::to_string(lineno) + ": " + why, lineno);
    };
    if (f.size() != 11) throw fail("expected 11 fields, found " + std::to_string(f.size()));
    EpochMetrics r;
    double vals[9];
    double epoch = 0.0;
    if (!parse_real(f[0], epoch) || epoch < 0 || epoch != std::floor(epoch)) throw fail("bad epoch");
    r.epoch = static_cast<std::size_t>(epoch);
    for (int k = 0; k < 9; ++k) {
      if (!parse_real(f[1 + k], vals[k])) throw fail("field " + std::to_string(k + 2) + " is not a number");
    }
    r.train_loss = vals[0];
    r.train_acc_multi = vals[1];
    r.train_acc_a = vals[2];
    r.train_acc_v = vals[3];
    r.test_acc_multi = vals[4];
    r.test_acc_a = vals[5];
    r.test_acc_v = vals[6];
    r.rho_v = vals[7];
    r.lambda_applied = vals[8];
    r.strong_modality = f[10];
    if (r.strong_modality != "audio" && r.strong_modality != "video" && r.strong_modality != "balanced" &&
        r.strong_modality != "warmup") {
      throw fail("unknown strong_modality '" + r.strong_modality + "'");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalResult {
  double acc_multi = 0.0;
  double acc_a = 0.0;
  double acc_v = 0.0;
  double loss = 0.0;
  ImbalanceStats stats;
};

/// Full-dataset forward pass without mixup or gradients. Branch accuracies
/// come from the masked-modality logits.
inline EvalResult evaluate(const ModelParams& params, const Dataset& ds) {
  EvalResult r;
  const std::size_t n = ds.size();
  if (n == 0) return r;
  const Array2 z_a = encode_values(params.enc_a, ds.features_a);
  const Array2 z_v = encode_values(params.enc_v, ds.features_v);
  const Array2 logits = fuse_values(params.head, z_a, z_v);
  const UnimodalScores scores = masked_unimodal_scores(params.head, z_a, z_v, ds.labels);
  std::size_t hits = 0, hits_a = 0, hits_v = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = logits.row(i);
    if (ops::argmax(row) == ds.labels[i]) ++hits;
    if (scores.pred_a[i] == ds.labels[i]) ++hits_a;
    if (scores.pred_v[i] == ds.labels[i]) ++hits_v;
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    loss += mx + std::log(z) - row[ds.labels[i]];
  }
  const double dn = static_cast<double>(n);
  r.acc_multi = static_cast<double>(hits) / dn;
  r.acc_a = static_cast<double>(hits_a) / dn;
  r.acc_v = static_cast<double>(hits_v) / dn;
  r.loss = loss / dn;
  r.stats = accumulate_stats({}, scores.s_a, scores.s_v);
  return r;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

/// Owns one run: parameters, optimizer state, RNG streams and the imbalance
/// ratio carried from one epoch to the next.
class Trainer {
 public:
  Trainer(TrainConfig cfg, const Dataset& train, const Dataset& test)
      : cfg_(std::move(cfg)),
        train_(train),
        test_(test),
        beta_rng_(Rng::stream(cfg_.seed, Stream::kBeta)),
        perm_rng_(Rng::stream(cfg_.seed, Stream::kPermutation)) {
    cfg_.validate();
    if (train.dim_a() != test.dim_a() || train.dim_v() != test.dim_v() ||
        train.n_classes != test.n_classes) {
      throw DimensionError("train and test splits disagree on dims or class count");
    }
    ModelDims dims{train.dim_a(), train.dim_v(), cfg_.hidden_dim, cfg_.feat_dim, train.n_classes};
    params_ = init_model(dims, cfg_.fusion, cfg_.seed);
  }

  const ModelParams& params() const { return params_; }
  const TrainConfig& config() const { return cfg_; }
  std::size_t epoch() const { return epoch_; }

  /// Ratio-driven plan for the current epoch: nullopt during warm-up and
  /// before any epoch has finished.
  std::optional<MixupPlan> current_plan() const {
    if (epoch_ < cfg_.mixup.warmup() || !last_rho_) return std::nullopt;
    return plan_from_rho(epoch_, *last_rho_, cfg_.mixup.alpha);
  }

  EpochMetrics train_epoch() {
    const std::size_t e = epoch_;
    const std::optional<MixupPlan> plan = current_plan();
    const MixupMode mode = cfg_.mixup.mode;
    const bool in_warmup = e < cfg_.mixup.warmup();
    const bool mm_active = mode == MixupMode::kMM && !in_warmup;
    const bool bmm_active = mode == MixupMode::kBMM && plan && plan->strong != StrongModality::kBalanced;
    const AdamOptions adam{cfg_.lr, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps};

    ImbalanceStats stats;
    double loss_sum = 0.0, lambda_sum = 0.0;
    std::size_t seen = 0, hits = 0, hits_a = 0, hits_v = 0, mixed_batches = 0;

    const auto batches = make_batches(train_, cfg_.batch_size, e, cfg_.seed);
    std::vector<std::uint32_t> labels;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch& batch = batches[bi];
      const std::size_t n = batch.size();
      labels.resize(n);
      for (std::size_t r = 0; r < n; ++r) labels[r] = train_.labels[batch.indices[r]];

      ad::Tape tape;
      const BoundModel bound = bind(tape, params_);
      const auto [z_a, z_v] = encode(tape, bound, batch);

      // Scores and train accuracy always use the un-mixed features.
      const UnimodalScores scores = masked_unimodal_scores(params_.head, z_a.value(), z_v.value(), labels);
      if (!cfg_.mixup.rho_full_pass) stats = accumulate_stats(stats, scores.s_a, scores.s_v);
      for (std::size_t r = 0; r < n; ++r) {
        if (scores.pred_a[r] == labels[r]) ++hits_a;
        if (scores.pred_v[r] == labels[r]) ++hits_v;
      }

      MixedBatch mixed{z_a, z_v, batch.targets};
      bool touched = false;
      if (mm_active) {
        const double lambda =
            cfg_.mixup.fixed_lambda ? *cfg_.mixup.fixed_lambda : sample_beta(cfg_.mixup.gamma, beta_rng_);
        const auto perm = perm_rng_.permutation(n);
        mixed = mm_mix(z_a, z_v, batch.targets, lambda, perm);
        lambda_sum += lambda;
        touched = true;
      } else if (bmm_active) {
        const auto perm = perm_rng_.permutation(n);
        mixed = bmm_mix(z_a, z_v, batch.targets, *plan, perm);
        lambda_sum += plan->active_lambda();
        touched = true;
      }
      if (touched) ++mixed_batches;

      const ad::Var logits = fuse_logits(bound, mixed.z_a, mixed.z_v);
      const Array2 clean_logits = touched ? fuse_values(params_.head, z_a.value(), z_v.value()) : Array2{};
      const Array2& eval_logits = touched ? clean_logits : logits.value();
      for (std::size_t r = 0; r < n; ++r) {
        if (ops::argmax(eval_logits.row(r)) == labels[r]) ++hits;
      }

      const ad::Var loss = ad::softmax_ce_soft(logits, mixed.targets);
      const double lv = loss.value()(0, 0);
      if (!std::isfinite(lv)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(e) + ", batch " + std::to_string(bi));
      }
      loss_sum += lv * static_cast<double>(n);
      seen += n;

      tape.backward(loss);
      std::vector<Array2> grads;
      grads.reserve(bound.all.size());
      for (const ad::Var& v : bound.all) grads.push_back(v.grad());
      const auto tensors = params_.tensors();
      adam_step(tensors, grads, adam_state_, adam);
    }

    if (cfg_.mixup.rho_full_pass) stats = evaluate(params_, train_).stats;
    const Rho rho = finalize_rho(stats);
    last_rho_ = rho;

    EpochMetrics m;
    m.epoch = e;
    const double dn = static_cast<double>(seen);
    m.train_loss = loss_sum / dn;
    m.train_acc_multi = static_cast<double>(hits) / dn;
    m.train_acc_a = static_cast<double>(hits_a) / dn;
    m.train_acc_v = static_cast<double>(hits_v) / dn;
    if (!last_eval_ || e % cfg_.eval_every == 0 || e + 1 == cfg_.epochs) last_eval_ = evaluate(params_, test_);
    m.test_acc_multi = last_eval_->acc_multi;
    m.test_acc_a = last_eval_->acc_a;
    m.test_acc_v = last_eval_->acc_v;
    m.rho_v = rho.video;
    m.lambda_applied = mixed_batches == 0 ? 0.0 : lambda_sum / static_cast<double>(mixed_batches);
    if (in_warmup) {
      m.strong_modality = "warmup";
    } else {
      m.strong_modality = plan ? to_string(plan->strong) : to_string(StrongModality::kBalanced);
    }
    ++epoch_;
    return m;
  }

 private:
  TrainConfig cfg_;
  const Dataset& train_;
  const Dataset& test_;
  ModelParams params_;
  AdamState adam_state_;
  Rng beta_rng_;
  Rng perm_rng_;
  std::optional<Rho> last_rho_;
  std::optional<EvalResult> last_eval_;
  std::size_t epoch_ = 0;
};

struct RunResult {
  std::vector<EpochMetrics> log;
  ModelParams params;
  double final_test_acc_multi = 0.0;
  double best_test_acc_multi = 0.0;
  std::size_t best_epoch = 0;
};

inline RunResult run_experiment(const TrainConfig& cfg, const Dataset& train, const Dataset& test) {
  Trainer trainer(cfg, train, test);
  RunResult out;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    out.log.push_back(trainer.train_epoch());
    const double acc = out.log.back().test_acc_multi;
    if (e == 0 || acc > out.best_test_acc_multi) {
      out.best_test_acc_multi = acc;
      out.best_epoch = e;
    }
  }
  out.final_test_acc_multi = out.log.back().test_acc_multi;
  out.params = trainer.params();
  return out;
}

inline RunResult run_experiment(const TrainConfig& cfg, const std::filesystem::path& data_dir) {
  const Dataset train = read_dataset(train_file(data_dir));
  const Dataset test = read_dataset(test_file(data_dir));
  return run_experiment(cfg, train, test);
}

}  // namespace bmm
