// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace psot {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameter or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericalError : public Error {
 public:
  using Error::Error;
};

enum class FormatErrc {
  kIo,
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kPayloadLengthMismatch,
  kDimension,
  kScalarWidth,
  kNonFinite,
  kAnswerRange,
};

inline const char* to_string(FormatErrc code) {
  switch (code) {
    case FormatErrc::kIo: return "io";
    case FormatErrc::kBadMagic: return "bad_magic";
    case FormatErrc::kVersionMismatch: return "version_mismatch";
    case FormatErrc::kTruncated: return "truncated";
    case FormatErrc::kPayloadLengthMismatch: return "payload_length_mismatch";
    case FormatErrc::kDimension: return "dimension";
    case FormatErrc::kScalarWidth: return "scalar_width";
    case FormatErrc::kNonFinite: return "non_finite";
    case FormatErrc::kAnswerRange: return "answer_range";
  }
  return "unknown";
}

// Parse failure in a bundle or checkpoint file. `field` names the header
// field or payload section that failed validation.
class FormatError : public Error {
 public:
  FormatError(FormatErrc code, std::string field, const std::string& detail)
      : Error(std::string(to_string(code)) + " error in '" + field + "': " + detail),
        code_(code),
        field_(std::move(field)) {}

  FormatErrc code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  FormatErrc code_;
  std::string field_;
};

}  // namespace psot
