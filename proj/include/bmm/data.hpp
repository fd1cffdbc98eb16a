// Copyright 2026 The bmm-lab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "bmm/array2.hpp"
#include "bmm/error.hpp"
#include "bmm/rng.hpp"

namespace bmm {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written with native little-endian stores");

/// Generator knobs for one synthetic two-modality problem.
struct DatasetSpec {
  std::uint32_t n_classes = 6;
  std::uint32_t dim_a = 32;
  std::uint32_t dim_v = 32;
  std::uint32_t n_train = 3000;
  std::uint32_t n_test = 600;
  double snr_a = 3.0;
  double snr_v = 0.8;
  double label_noise_v = 0.2;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the first offending field.
  void validate() const {
    if (n_classes < 2) throw ConfigError("n_classes", "must be >= 2");
    if (dim_a < 1) throw ConfigError("dim_a", "must be >= 1");
    if (dim_v < 1) throw ConfigError("dim_v", "must be >= 1");
    if (n_train < 1) throw ConfigError("n_train", "must be >= 1");
    if (n_train < n_classes) {
      throw ConfigError("n_train", "must be >= n_classes so every class appears");
    }
    if (n_test < 1) throw ConfigError("n_test", "must be >= 1");
    if (!std::isfinite(snr_a) || snr_a < 0.0) throw ConfigError("snr_a", "must be finite and >= 0");
    if (!std::isfinite(snr_v) || snr_v < 0.0) throw ConfigError("snr_v", "must be finite and >= 0");
    if (!(label_noise_v >= 0.0 && label_noise_v < 1.0)) {
      throw ConfigError("label_noise_v", "must lie in [0,1)");
    }
  }

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

/// Paired per-modality features with integer labels. Each row is one sample.
struct Dataset {
  std::uint32_t n_classes = 0;
  Array2 features_a;
  Array2 features_v;
  std::vector<std::uint32_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim_a() const noexcept { return features_a.cols(); }
  std::size_t dim_v() const noexcept { return features_v.cols(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SplitDataset {
  Dataset train;
  Dataset test;
};

/// One mini-batch. Targets are one-hot here; mixing later turns them soft.
struct Batch {
  Array2 features_a;
  Array2 features_v;
  Array2 targets;
  std::vector<std::size_t> indices;

  std::size_t size() const noexcept { return indices.size(); }
};

namespace detail {

inline std::vector<double> unit_vector(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

// Values are rounded through f32 so the on-disk format is lossless.
inline double as_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

inline Dataset draw_split(const DatasetSpec& spec, std::size_t n,
                          const std::vector<std::vector<double>>& proto_a,
                          const std::vector<std::vector<double>>& proto_v, Rng& rng) {
  Dataset ds;
  ds.n_classes = spec.n_classes;
  ds.features_a = Array2(n, spec.dim_a);
  ds.features_v = Array2(n, spec.dim_v);
  ds.labels.resize(n);
  const std::uint32_t m = spec.n_classes;
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = static_cast<std::uint32_t>(i % m);
    ds.labels[i] = label;
    std::uint32_t video_class = label;
    if (spec.label_noise_v > 0.0 && rng.uniform_open() < spec.label_noise_v) {
      // Uniform over the m - 1 wrong classes.
      const auto k = static_cast<std::uint32_t>(rng.below(m - 1));
      video_class = k < label ? k : k + 1;
    }
    for (std::size_t d = 0; d < spec.dim_a; ++d) {
      ds.features_a(i, d) = as_f32(spec.snr_a * proto_a[label][d] + rng.normal());
    }
    for (std::size_t d = 0; d < spec.dim_v; ++d) {
      ds.features_v(i, d) = as_f32(spec.snr_v * proto_v[video_class][d] + rng.normal());
    }
  }
  return ds;
}

}  // namespace detail

/// Class prototypes plus isotropic noise, one unit-norm prototype per class
/// and modality. With probability label_noise_v a sample's video features come
/// from a wrong class's prototype while its label stays put. Labels cycle
/// round-robin, so per-class counts differ by at most one.
inline SplitDataset generate_synthetic(const DatasetSpec& spec) {
  spec.validate();
  Rng rng = Rng::stream(spec.seed, Stream::kDataset);
  std::vector<std::vector<double>> proto_a, proto_v;
  for (std::uint32_t c = 0; c < spec.n_classes; ++c) proto_a.push_back(detail::unit_vector(rng, spec.dim_a));
  for (std::uint32_t c = 0; c < spec.n_classes; ++c) proto_v.push_back(detail::unit_vector(rng, spec.dim_v));
  SplitDataset out;
  out.train = detail::draw_split(spec, spec.n_train, proto_a, proto_v, rng);
  out.test = detail::draw_split(spec, spec.n_test, proto_a, proto_v, rng);
  return out;
}

// ---------------------------------------------------------------------------
// MMDS binary format (little-endian):
//   "MMDS" | u32 version=1 | u32 n_samples | u32 dim_a | u32 dim_v | u32 n_classes
//   then per sample: dim_a x f32 | dim_v x f32 | u32 label
// ---------------------------------------------------------------------------

inline constexpr char kDatasetMagic[4] = {'M', 'M', 'D', 'S'};
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 24;

namespace detail {

template <typename T>
void put(std::vector<char>& buf, T v) {
  const std::size_t at = buf.size();
  buf.resize(at + sizeof(T));
  std::memcpy(buf.data() + at, &v, sizeof(T));
}

/// Bounds-checked little-endian reader over an in-memory file image.
class ByteReader {
 public:
  ByteReader(const std::vector<char>& buf, std::string what) : buf_(buf), what_(std::move(what)) {}

  template <typename T>
  T get(const char* field) {
    if (pos_ + sizeof(T) > buf_.size()) {
      throw FormatError(what_ + ": truncated reading " + field + " at byte " +
                            std::to_string(pos_) + " (file has " + std::to_string(buf_.size()) +
                            " bytes, need " + std::to_string(pos_ + sizeof(T)) + ")",
                        pos_);
    }
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void expect_size(std::size_t expected) const {
    if (buf_.size() != expected) {
      const std::size_t at = std::min(buf_.size(), expected);
      throw FormatError(what_ + ": expected " + std::to_string(expected) + " bytes, found " +
                            std::to_string(buf_.size()),
                        at);
    }
  }

  std::size_t pos() const noexcept { return pos_; }

 private:
  const std::vector<char>& buf_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void spill(const std::filesystem::path& path, const std::vector<char>& buf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

inline std::vector<char> encode_dataset(const Dataset& ds) {
  std::vector<char> buf;
  const std::size_t n = ds.size(), da = ds.dim_a(), dv = ds.dim_v();
  buf.reserve(kDatasetHeaderBytes + n * (4 * (da + dv) + 4));
  buf.resize(sizeof kDatasetMagic);
  std::memcpy(buf.data(), kDatasetMagic, sizeof kDatasetMagic);
  detail::put<std::uint32_t>(buf, kDatasetVersion);
  detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(n));
  detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(da));
  detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(dv));
  detail::put<std::uint32_t>(buf, ds.n_classes);
  for (std::size_t i = 0; i < n; ++i) {
    for (double v : ds.features_a.row(i)) detail::put<float>(buf, static_cast<float>(v));
    for (double v : ds.features_v.row(i)) detail::put<float>(buf, static_cast<float>(v));
    detail::put<std::uint32_t>(buf, ds.labels[i]);
  }
  return buf;
}

inline Dataset decode_dataset(const std::vector<char>& buf, const std::string& name = "dataset") {
  detail::ByteReader rd(buf, name);
  char magic[4];
  for (char& c : magic) c = rd.get<char>("magic");
  if (!std::equal(std::begin(magic), std::end(magic), std::begin(kDatasetMagic))) {
    throw FormatError(name + ": bad magic at byte 0 (expected \"MMDS\")", 0);
  }
  const auto version = rd.get<std::uint32_t>("version");
  if (version != kDatasetVersion) {
    throw FormatError(name + ": unsupported version " + std::to_string(version) + " at byte 4", 4);
  }
  const auto n = rd.get<std::uint32_t>("n_samples");
  const auto da = rd.get<std::uint32_t>("dim_a");
  const auto dv = rd.get<std::uint32_t>("dim_v");
  const auto m = rd.get<std::uint32_t>("n_classes");
  rd.expect_size(kDatasetHeaderBytes + static_cast<std::size_t>(n) * (4ull * (da + dv) + 4));

  Dataset ds;
  ds.n_classes = m;
  ds.features_a = Array2(n, da);
  ds.features_v = Array2(n, dv);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < da; ++d) ds.features_a(i, d) = rd.get<float>("audio feature");
    for (std::size_t d = 0; d < dv; ++d) ds.features_v(i, d) = rd.get<float>("video feature");
    const std::size_t at = rd.pos();
    ds.labels[i] = rd.get<std::uint32_t>("label");
    if (ds.labels[i] >= m) {
      throw FormatError(name + ": label " + std::to_string(ds.labels[i]) + " out of range at byte " +
                            std::to_string(at),
                        at);
    }
  }
  return ds;
}

inline void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  detail::spill(path, encode_dataset(ds));
}

inline Dataset read_dataset(const std::filesystem::path& path) {
  return decode_dataset(detail::slurp(path), path.string());
}

/// Split files inside a data directory.
inline std::filesystem::path train_file(const std::filesystem::path& dir) { return dir / "train.mmds"; }
inline std::filesystem::path test_file(const std::filesystem::path& dir) { return dir / "test.mmds"; }

inline Array2 one_hot(std::span<const std::uint32_t> labels, std::size_t n_classes) {
  Array2 out(labels.size(), n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) out(i, labels[i]) = 1.0;
  return out;
}

/// Rows of `ds` gathered in the order of `indices`.
inline Batch gather(const Dataset& ds, std::span<const std::size_t> indices) {
  Batch b;
  const std::size_t n = indices.size();
  b.features_a = Array2(n, ds.dim_a());
  b.features_v = Array2(n, ds.dim_v());
  b.targets = Array2(n, ds.n_classes);
  b.indices.assign(indices.begin(), indices.end());
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t src = indices[r];
    std::copy_n(ds.features_a.row(src).data(), ds.dim_a(), &b.features_a(r, 0));
    std::copy_n(ds.features_v.row(src).data(), ds.dim_v(), &b.features_v(r, 0));
    b.targets(r, ds.labels[src]) = 1.0;
  }
  return b;
}

/// One epoch of mini-batches over a fresh permutation keyed by (seed, epoch).
/// The trailing partial batch is kept.
inline std::vector<Batch> make_batches(const Dataset& ds, std::size_t batch_size, std::uint64_t epoch,
                                       std::uint64_t seed) {
  if (batch_size < 2) throw ConfigError("batch_size", "must be >= 2 (mixup pairs rows within a batch)");
  Rng rng = Rng::stream(seed, Stream::kShuffle, epoch);
  const auto order = rng.permutation(ds.size());
  std::vector<Batch> out;
  out.reserve((ds.size() + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, order.size() - start);
    out.push_back(gather(ds, std::span(order).subspan(start, len)));
  }
  return out;
}

}  // namespace bmm
