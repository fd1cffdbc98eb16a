// Copyright 2026 The bmm-lab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace bmm {

/// Root of every error the library throws. The CLI maps the concrete
/// subclasses onto its exit-code contract (2 config, 3 IO/format, 4 numeric).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value violates a structural precondition (permutation, distribution, label).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A scalar lies outside its admissible interval.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// An operation was invoked in a state that does not allow it.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration. Carries the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Malformed on-disk data. Carries the byte offset (or line number for
/// text formats) at which the problem was detected.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Training diverged (non-finite loss).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace bmm
