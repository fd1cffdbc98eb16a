// Copyright 2026 The bmm-lab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bmm/array2.hpp"
#include "bmm/autodiff.hpp"
#include "bmm/data.hpp"
#include "bmm/error.hpp"
#include "bmm/rng.hpp"

namespace bmm {

enum class FusionKind : std::uint8_t { kConcat = 0, kSum = 1, kDecision = 2 };

inline const char* to_string(FusionKind k) {
  switch (k) {
    case FusionKind::kConcat: return "concat";
    case FusionKind::kSum: return "sum";
    case FusionKind::kDecision: return "decision";
  }
  return "?";
}

struct ModelDims {
  std::size_t dim_a = 32;
  std::size_t dim_v = 32;
  std::size_t hidden_dim = 64;
  std::size_t feat_dim = 32;
  std::size_t n_classes = 6;

  void validate() const {
    if (dim_a < 1) throw ConfigError("dim_a", "must be >= 1");
    if (dim_v < 1) throw ConfigError("dim_v", "must be >= 1");
    if (hidden_dim < 1) throw ConfigError("hidden_dim", "must be >= 1");
    if (feat_dim < 1) throw ConfigError("feat_dim", "must be >= 1");
    if (n_classes < 2) throw ConfigError("n_classes", "must be >= 2");
  }

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Two-layer MLP encoder: z = relu(x W1 + b1) W2 + b2.
struct EncoderParams {
  Array2 w1, b1, w2, b2;

  std::size_t input_dim() const { return w1.rows(); }
  std::size_t hidden_dim() const { return w1.cols(); }
  std::size_t feat_dim() const { return w2.cols(); }

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

/// Logits = [z_a ; z_v] W + b.
struct ConcatHead {
  Array2 w, b;
  friend bool operator==(const ConcatHead&, const ConcatHead&) = default;
};
/// Logits = (z_a + z_v) W + b.
struct SumHead {
  Array2 w, b;
  friend bool operator==(const SumHead&, const SumHead&) = default;
};
/// Logits = (z_a W_a + b_a) + (z_v W_v + b_v); softmax applied once in the loss.
struct DecisionHead {
  Array2 w_a, b_a, w_v, b_v;
  friend bool operator==(const DecisionHead&, const DecisionHead&) = default;
};

using FusionHead = std::variant<ConcatHead, SumHead, DecisionHead>;

inline FusionKind kind_of(const FusionHead& head) { return static_cast<FusionKind>(head.index()); }

struct ModelParams {
  EncoderParams enc_a;
  EncoderParams enc_v;
  FusionHead head;

  FusionKind fusion() const { return kind_of(head); }

  ModelDims dims() const {
    const std::size_t m = std::visit(
        [](const auto& h) {
          if constexpr (std::is_same_v<std::decay_t<decltype(h)>, DecisionHead>) {
            return h.w_a.cols();
          } else {
            return h.w.cols();
          }
        },
        head);
    return {enc_a.input_dim(), enc_v.input_dim(), enc_a.hidden_dim(), enc_a.feat_dim(), m};
  }

  /// Every parameter in the fixed checkpoint order: audio encoder (W1 b1 W2
  /// b2), video encoder (same), then the head's arrays in declaration order.
  std::vector<Array2*> tensors() {
    std::vector<Array2*> out{&enc_a.w1, &enc_a.b1, &enc_a.w2, &enc_a.b2,
                             &enc_v.w1, &enc_v.b1, &enc_v.w2, &enc_v.b2};
    std::visit(
        [&](auto& h) {
          using H = std::decay_t<decltype(h)>;
          if constexpr (std::is_same_v<H, DecisionHead>) {
            out.insert(out.end(), {&h.w_a, &h.b_a, &h.w_v, &h.b_v});
          } else {
            out.insert(out.end(), {&h.w, &h.b});
          }
        },
        head);
    return out;
  }

  std::vector<const Array2*> tensors() const {
    auto mut = const_cast<ModelParams*>(this)->tensors();
    return {mut.begin(), mut.end()};
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

namespace detail {

inline Array2 glorot_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Array2 w(fan_in, fan_out);
  for (double& v : w.flat()) v = rng.uniform(-limit, limit);
  return w;
}

inline EncoderParams init_encoder(Rng& rng, std::size_t in, std::size_t hidden, std::size_t feat) {
  EncoderParams e;
  e.w1 = glorot_uniform(rng, in, hidden);
  e.b1 = Array2(1, hidden);
  e.w2 = glorot_uniform(rng, hidden, feat);
  e.b2 = Array2(1, feat);
  return e;
}

}  // namespace detail

/// Glorot-uniform weights, zero biases, drawn from the model-init stream.
inline ModelParams init_model(const ModelDims& dims, FusionKind kind, std::uint64_t seed) {
  dims.validate();
  Rng rng = Rng::stream(seed, Stream::kModelInit);
  ModelParams p;
  p.enc_a = detail::init_encoder(rng, dims.dim_a, dims.hidden_dim, dims.feat_dim);
  p.enc_v = detail::init_encoder(rng, dims.dim_v, dims.hidden_dim, dims.feat_dim);
  const std::size_t f = dims.feat_dim, m = dims.n_classes;
  switch (kind) {
    case FusionKind::kConcat:
      p.head = ConcatHead{detail::glorot_uniform(rng, 2 * f, m), Array2(1, m)};
      break;
    case FusionKind::kSum:
      p.head = SumHead{detail::glorot_uniform(rng, f, m), Array2(1, m)};
      break;
    case FusionKind::kDecision: {
      DecisionHead h;
      h.w_a = detail::glorot_uniform(rng, f, m);
      h.b_a = Array2(1, m);
      h.w_v = detail::glorot_uniform(rng, f, m);
      h.b_v = Array2(1, m);
      p.head = std::move(h);
      break;
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Differentiable forward pass.
// ---------------------------------------------------------------------------

struct BoundEncoder {
  ad::Var w1, b1, w2, b2;
};

/// Model parameters as tape variables, in ModelParams::tensors() order.
struct BoundModel {
  FusionKind kind = FusionKind::kConcat;
  BoundEncoder enc_a;
  BoundEncoder enc_v;
  std::vector<ad::Var> head;
  std::vector<ad::Var> all;

  static BoundModel from_vars(FusionKind kind, std::span<const ad::Var> vars) {
    const std::size_t head_count = kind == FusionKind::kDecision ? 4 : 2;
    if (vars.size() != 8 + head_count) {
      throw DimensionError("BoundModel: expected " + std::to_string(8 + head_count) +
                           " parameter arrays, got " + std::to_string(vars.size()));
    }
    BoundModel m;
    m.kind = kind;
    m.enc_a = {vars[0], vars[1], vars[2], vars[3]};
    m.enc_v = {vars[4], vars[5], vars[6], vars[7]};
    m.head.assign(vars.begin() + 8, vars.end());
    m.all.assign(vars.begin(), vars.end());
    return m;
  }
};

inline BoundModel bind(ad::Tape& tape, const ModelParams& params) {
  std::vector<ad::Var> vars;
  for (const Array2* t : params.tensors()) vars.push_back(tape.leaf(*t));
  return BoundModel::from_vars(params.fusion(), vars);
}

inline ad::Var encode_branch(const BoundEncoder& enc, ad::Var x) {
  return ad::linear(ad::relu(ad::linear(x, enc.w1, enc.b1)), enc.w2, enc.b2);
}

/// Per-modality encoder outputs for a batch.
inline std::pair<ad::Var, ad::Var> encode(ad::Tape& tape, const BoundModel& model, const Batch& batch) {
  ad::Var xa = tape.constant(batch.features_a);
  ad::Var xv = tape.constant(batch.features_v);
  return {encode_branch(model.enc_a, xa), encode_branch(model.enc_v, xv)};
}

inline ad::Var fuse_logits(const BoundModel& model, ad::Var z_a, ad::Var z_v) {
  const auto& h = model.head;
  switch (model.kind) {
    case FusionKind::kConcat: return ad::linear(ad::concat_cols(z_a, z_v), h[0], h[1]);
    case FusionKind::kSum: return ad::linear(ad::add(z_a, z_v), h[0], h[1]);
    case FusionKind::kDecision: return ad::add(ad::linear(z_a, h[0], h[1]), ad::linear(z_v, h[2], h[3]));
  }
  throw StateError("fuse_logits: unknown fusion kind");
}

// ---------------------------------------------------------------------------
// Evaluation-only forward pass (no tape, no gradients).
// ---------------------------------------------------------------------------

inline Array2 encode_values(const EncoderParams& enc, const Array2& x) {
  return ops::affine(ops::relu(ops::affine(x, enc.w1, &enc.b1)), enc.w2, &enc.b2);
}

namespace detail {
inline void require_feat(const Array2& z, std::size_t rows, std::size_t feat, const char* which) {
  if (z.rows() != rows || z.cols() != feat) {
    throw DimensionError(std::string("fusion head: ") + which + " features " + z.shape() +
                         " do not match expected " + Array2::shape_string(rows, feat));
  }
}

/// Rows [begin, begin + count) of w.
inline Array2 row_block(const Array2& w, std::size_t begin, std::size_t count) {
  Array2 out(count, w.cols());
  std::copy_n(w.row(begin).data(), count * w.cols(), out.flat().data());
  return out;
}
}  // namespace detail

inline Array2 fuse_values(const FusionHead& head, const Array2& z_a, const Array2& z_v) {
  const std::size_t n = z_a.rows();
  return std::visit(
      [&](const auto& h) -> Array2 {
        using H = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<H, ConcatHead>) {
          const std::size_t f = h.w.rows() / 2;
          detail::require_feat(z_a, n, f, "audio");
          detail::require_feat(z_v, n, f, "video");
          Array2 joint(n, 2 * f);
          for (std::size_t i = 0; i < n; ++i) {
            std::copy_n(z_a.row(i).data(), f, &joint(i, 0));
            std::copy_n(z_v.row(i).data(), f, &joint(i, f));
          }
          return ops::affine(joint, h.w, &h.b);
        } else if constexpr (std::is_same_v<H, SumHead>) {
          detail::require_feat(z_a, n, h.w.rows(), "audio");
          detail::require_feat(z_v, n, h.w.rows(), "video");
          return ops::affine(ops::add(z_a, z_v), h.w, &h.b);
        } else {
          detail::require_feat(z_a, n, h.w_a.rows(), "audio");
          detail::require_feat(z_v, n, h.w_v.rows(), "video");
          return ops::add(ops::affine(z_a, h.w_a, &h.b_a), ops::affine(z_v, h.w_v, &h.b_v));
        }
      },
      head);
}

/// Branch logits with the other modality zeroed. Concat and Sum share the
/// fused head and take half its bias; Decision uses each branch's own head
/// with its full bias.
struct MaskedLogits {
  Array2 audio;
  Array2 video;
};

inline MaskedLogits masked_logits(const FusionHead& head, const Array2& z_a, const Array2& z_v) {
  const std::size_t n = z_a.rows();
  return std::visit(
      [&](const auto& h) -> MaskedLogits {
        using H = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<H, ConcatHead>) {
          const std::size_t f = h.w.rows() / 2;
          detail::require_feat(z_a, n, f, "audio");
          detail::require_feat(z_v, n, f, "video");
          const Array2 half_b = ops::scale(h.b, 0.5);
          return {ops::affine(z_a, detail::row_block(h.w, 0, f), &half_b),
                  ops::affine(z_v, detail::row_block(h.w, f, f), &half_b)};
        } else if constexpr (std::is_same_v<H, SumHead>) {
          detail::require_feat(z_a, n, h.w.rows(), "audio");
          detail::require_feat(z_v, n, h.w.rows(), "video");
          const Array2 half_b = ops::scale(h.b, 0.5);
          return {ops::affine(z_a, h.w, &half_b), ops::affine(z_v, h.w, &half_b)};
        } else {
          detail::require_feat(z_a, n, h.w_a.rows(), "audio");
          detail::require_feat(z_v, n, h.w_v.rows(), "video");
          return {ops::affine(z_a, h.w_a, &h.b_a), ops::affine(z_v, h.w_v, &h.b_v)};
        }
      },
      head);
}

/// Softmax probability of the true class under each masked branch, plus the
/// branch predictions (ties to the lowest class index).
struct UnimodalScores {
  std::vector<double> s_a;
  std::vector<double> s_v;
  std::vector<std::size_t> pred_a;
  std::vector<std::size_t> pred_v;
};

inline UnimodalScores masked_unimodal_scores(const FusionHead& head, const Array2& z_a, const Array2& z_v,
                                             std::span<const std::uint32_t> labels) {
  const MaskedLogits ml = masked_logits(head, z_a, z_v);
  const std::size_t n = z_a.rows(), m = ml.audio.cols();
  if (labels.size() != n) {
    throw DimensionError("masked_unimodal_scores: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " rows");
  }
  for (std::uint32_t y : labels) {
    if (y >= m) throw ValidationError("label " + std::to_string(y) + " out of range for " +
                                      std::to_string(m) + " classes");
  }
  const Array2 pa = ops::softmax_rows(ml.audio);
  const Array2 pv = ops::softmax_rows(ml.video);
  UnimodalScores out;
  out.s_a.resize(n);
  out.s_v.resize(n);
  out.pred_a.resize(n);
  out.pred_v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.s_a[i] = pa(i, labels[i]);
    out.s_v[i] = pv(i, labels[i]);
    out.pred_a[i] = ops::argmax(ml.audio.row(i));
    out.pred_v[i] = ops::argmax(ml.video.row(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// MMCK checkpoint (little-endian):
//   "MMCK" | u32 version=1 | u8 fusion kind | u32 dim_a | u32 dim_v |
//   u32 hidden_dim | u32 feat_dim | u32 n_classes |
//   then every ModelParams::tensors() array as rows*cols f64, in order.
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[4] = {'M', 'M', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::vector<char> encode_checkpoint(const ModelParams& params) {
  std::vector<char> buf(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  const ModelDims d = params.dims();
  detail::put<std::uint32_t>(buf, kCheckpointVersion);
  detail::put<std::uint8_t>(buf, static_cast<std::uint8_t>(params.fusion()));
  for (std::size_t v : {d.dim_a, d.dim_v, d.hidden_dim, d.feat_dim, d.n_classes}) {
    detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(v));
  }
  for (const Array2* t : params.tensors()) {
    for (double v : t->flat()) detail::put<double>(buf, v);
  }
  return buf;
}

inline ModelParams decode_checkpoint(const std::vector<char>& buf, const std::string& name = "checkpoint") {
  detail::ByteReader rd(buf, name);
  char magic[4];
  for (char& c : magic) c = rd.get<char>("magic");
  if (!std::equal(std::begin(magic), std::end(magic), std::begin(kCheckpointMagic))) {
    throw FormatError(name + ": bad magic at byte 0 (expected \"MMCK\")", 0);
  }
  const auto version = rd.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError(name + ": unsupported version " + std::to_string(version) + " at byte 4", 4);
  }
  const auto kind = rd.get<std::uint8_t>("fusion kind");
  if (kind > static_cast<std::uint8_t>(FusionKind::kDecision)) {
    throw FormatError(name + ": unknown fusion kind " + std::to_string(kind) + " at byte 8", 8);
  }
  ModelDims d;
  d.dim_a = rd.get<std::uint32_t>("dim_a");
  d.dim_v = rd.get<std::uint32_t>("dim_v");
  d.hidden_dim = rd.get<std::uint32_t>("hidden_dim");
  d.feat_dim = rd.get<std::uint32_t>("feat_dim");
  d.n_classes = rd.get<std::uint32_t>("n_classes");
  try {
    d.validate();
  } catch (const ConfigError& e) {
    throw FormatError(name + ": invalid dims (" + e.what() + ")", 9);
  }
  // Shapes come from a zero-seed init; every value is then overwritten.
  ModelParams p = init_model(d, static_cast<FusionKind>(kind), 0);
  std::size_t expected = rd.pos();
  for (const Array2* t : p.tensors()) expected += 8 * t->size();
  rd.expect_size(expected);
  for (Array2* t : p.tensors()) {
    for (double& v : t->flat()) v = rd.get<double>("parameter");
  }
  return p;
}

inline void write_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  detail::spill(path, encode_checkpoint(params));
}

inline ModelParams read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::slurp(path), path.string());
}

}  // namespace bmm
