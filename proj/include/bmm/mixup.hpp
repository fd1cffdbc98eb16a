// Copyright 2026 The bmm-lab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bmm/array2.hpp"
#include "bmm/autodiff.hpp"
#include "bmm/error.hpp"
#include "bmm/rng.hpp"

namespace bmm {

enum class MixupMode { kNone, kMM, kBMM };

inline const char* to_string(MixupMode m) {
  switch (m) {
    case MixupMode::kNone: return "none";
    case MixupMode::kMM: return "mm";
    case MixupMode::kBMM: return "bmm";
  }
  return "?";
}

struct MixupConfig {
  MixupMode mode = MixupMode::kNone;
  /// Beta(gamma, gamma) parameter for MM.
  double gamma = 1.0;
  /// Constant MM coefficient; bypasses Beta sampling when set.
  std::optional<double> fixed_lambda;
  /// tanh slope for the B-MM schedule.
  double alpha = 0.1;
  /// Inert epochs before mixing starts. Unset means 10 for B-MM, 0 otherwise.
  std::optional<std::size_t> warmup_epochs;
  /// Recompute the imbalance ratio with a dedicated pass after each epoch
  /// instead of accumulating it during the epoch's forward passes.
  bool rho_full_pass = false;

  std::size_t warmup() const { return warmup_epochs.value_or(mode == MixupMode::kBMM ? 10 : 0); }

  void validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma", "must be > 0");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha", "must be > 0");
    if (fixed_lambda && !(*fixed_lambda >= 0.0 && *fixed_lambda <= 1.0)) {
      throw ConfigError("fixed_lambda", "must lie in [0,1]");
    }
  }
};

// ---------------------------------------------------------------------------
// Beta sampling
// ---------------------------------------------------------------------------

/// log of a Gamma(shape, 1) variate. Marsaglia-Tsang squeeze/acceptance for
/// shape >= 1; for shape < 1 the shape + 1 draw is boosted by U^(1/shape).
/// Working in logs keeps tiny shapes from underflowing to zero.
inline double sample_log_gamma(double shape, Rng& rng) {
  if (!(shape > 0.0)) throw RangeError("gamma shape must be > 0");
  if (shape < 1.0) {
    const double boosted = sample_log_gamma(shape + 1.0, rng);
    return boosted + std::log(rng.uniform_open()) / shape;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_open();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return std::log(d * v);
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return std::log(d * v);
  }
}

inline double sample_gamma(double shape, Rng& rng) { return std::exp(sample_log_gamma(shape, rng)); }

/// One draw from Beta(gamma, gamma) as g1 / (g1 + g2) with g1, g2 ~ Gamma(gamma, 1).
inline double sample_beta(double gamma, Rng& rng) {
  if (!(gamma > 0.0)) throw RangeError("sample_beta: gamma must be > 0, got " + std::to_string(gamma));
  const double lg1 = sample_log_gamma(gamma, rng);
  const double lg2 = sample_log_gamma(gamma, rng);
  return 1.0 / (1.0 + std::exp(lg2 - lg1));
}

// ---------------------------------------------------------------------------
// Feature-level mixing
// ---------------------------------------------------------------------------

/// Encoder outputs and targets after mixing.
struct MixedBatch {
  ad::Var z_a;
  ad::Var z_v;
  Array2 targets;
};

/// Multimodal mixup: both modalities and the targets share one (lambda, perm).
inline MixedBatch mm_mix(ad::Var z_a, ad::Var z_v, const Array2& targets, double lambda,
                         std::span<const std::size_t> perm) {
  return {ad::lerp_rows(z_a, perm, lambda), ad::lerp_rows(z_v, perm, lambda),
          ad::lerp_rows_values(targets, perm, lambda)};
}

// ---------------------------------------------------------------------------
// Imbalance statistics and schedule
// ---------------------------------------------------------------------------

struct ImbalanceStats {
  double sum_s_a = 0.0;
  double sum_s_v = 0.0;
  std::size_t count = 0;
  double rho_a = 0.0;
  double rho_v = 0.0;
};

inline ImbalanceStats accumulate_stats(ImbalanceStats stats, std::span<const double> s_a,
                                       std::span<const double> s_v) {
  if (s_a.size() != s_v.size()) {
    throw DimensionError("accumulate_stats: " + std::to_string(s_a.size()) + " audio scores vs " +
                         std::to_string(s_v.size()) + " video scores");
  }
  for (std::size_t i = 0; i < s_a.size(); ++i) {
    stats.sum_s_a += s_a[i];
    stats.sum_s_v += s_v[i];
  }
  stats.count += s_a.size();
  return stats;
}

struct Rho {
  double audio = 1.0;
  double video = 1.0;
};

/// rho_v = sum s_v / sum s_a and its reciprocal.
inline Rho finalize_rho(const ImbalanceStats& stats) {
  if (stats.count == 0) throw StateError("finalize_rho: no samples accumulated");
  if (!(stats.sum_s_a > 0.0 && stats.sum_s_v > 0.0)) {
    throw StateError("finalize_rho: score sums must be positive");
  }
  return {stats.sum_s_a / stats.sum_s_v, stats.sum_s_v / stats.sum_s_a};
}

inline ImbalanceStats finalized(ImbalanceStats stats) {
  const Rho r = finalize_rho(stats);
  stats.rho_a = r.audio;
  stats.rho_v = r.video;
  return stats;
}

/// tanh(alpha * rho) when rho > 1, otherwise exactly 0.
inline double schedule_lambda(double rho_u, double alpha) {
  return rho_u > 1.0 ? std::tanh(alpha * rho_u) : 0.0;
}

enum class StrongModality { kAudio, kVideo, kBalanced };

inline const char* to_string(StrongModality s) {
  switch (s) {
    case StrongModality::kAudio: return "audio";
    case StrongModality::kVideo: return "video";
    case StrongModality::kBalanced: return "balanced";
  }
  return "?";
}

/// Per-epoch B-MM coefficients. lambda_a is used when audio is strong (it
/// mixes the video side), lambda_v when video is strong.
struct MixupPlan {
  std::size_t epoch = 0;
  double lambda_a = 0.0;
  double lambda_v = 0.0;
  StrongModality strong = StrongModality::kBalanced;

  double active_lambda() const {
    switch (strong) {
      case StrongModality::kAudio: return lambda_a;
      case StrongModality::kVideo: return lambda_v;
      case StrongModality::kBalanced: return 0.0;
    }
    return 0.0;
  }
};

inline MixupPlan plan_from_rho(std::size_t epoch, const Rho& rho, double alpha) {
  MixupPlan plan;
  plan.epoch = epoch;
  plan.lambda_a = schedule_lambda(rho.audio, alpha);
  plan.lambda_v = schedule_lambda(rho.video, alpha);
  if (rho.audio > 1.0) {
    plan.strong = StrongModality::kAudio;
  } else if (rho.video > 1.0) {
    plan.strong = StrongModality::kVideo;
  }
  return plan;
}

/// Balanced multimodal mixup: the strong modality passes through untouched;
/// the weak modality and the targets are interpolated with the strong side's
/// coefficient.
inline MixedBatch bmm_mix(ad::Var z_a, ad::Var z_v, const Array2& targets, const MixupPlan& plan,
                          std::span<const std::size_t> perm) {
  switch (plan.strong) {
    case StrongModality::kAudio:
      return {z_a, ad::lerp_rows(z_v, perm, plan.lambda_a),
              ad::lerp_rows_values(targets, perm, plan.lambda_a)};
    case StrongModality::kVideo:
      return {ad::lerp_rows(z_a, perm, plan.lambda_v), z_v,
              ad::lerp_rows_values(targets, perm, plan.lambda_v)};
    case StrongModality::kBalanced:
      ad::validate_permutation(perm, targets.rows());
      break;
  }
  return {z_a, z_v, targets};
}

}  // namespace bmm
