// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace instcap {

enum class ErrorKind {
  SchemaViolation,
  WordLimitViolation,
  DecodeError,
  DimensionMismatch,
  EmptyInput,
  NoFrames,
  AdapterError,
  BackendError,
  ParseError,
  ShapeMismatch,
  UnknownPrompt,
  TooFewFrames,
  ManifestParseError,
  ConfigError,
  PreconditionError,
  ContractError,
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::WordLimitViolation: return "WordLimitViolation";
    case ErrorKind::DecodeError: return "DecodeError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::NoFrames: return "NoFrames";
    case ErrorKind::AdapterError: return "AdapterError";
    case ErrorKind::BackendError: return "BackendError";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::UnknownPrompt: return "UnknownPrompt";
    case ErrorKind::TooFewFrames: return "TooFewFrames";
    case ErrorKind::ManifestParseError: return "ManifestParseError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::PreconditionError: return "PreconditionError";
    case ErrorKind::ContractError: return "ContractError";
  }
  return "Unknown";
}

/// Every failure raised by the toolkit. `stage()` is filled in when an error
/// crosses a pipeline or enhancer stage boundary.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string stage = {})
      : std::runtime_error(compose(kind, message, stage)),
        kind_(kind),
        detail_(message),
        stage_(std::move(stage)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }
  const std::string& stage() const noexcept { return stage_; }

  /// Re-raise with a stage tag, keeping kind and detail.
  Error tagged(std::string stage) const { return Error(kind_, detail_, std::move(stage)); }

 private:
  static std::string compose(ErrorKind kind, const std::string& message, const std::string& stage) {
    std::string out;
    if (!stage.empty()) out += "[" + stage + "] ";
    out += std::string(to_string(kind)) + ": " + message;
    return out;
  }

  ErrorKind kind_;
  std::string detail_;
  std::string stage_;
};

}  // namespace instcap
