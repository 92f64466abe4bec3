#pragma once

#include <stdexcept>
#include <string>

namespace ccp {

enum class ErrorCode {
  ParseError,
  PairingError,
  UnknownLabel,
  UnknownCategory,
  MixedDataset,
  EmptyGroupId,
  EmptyInput,
  EmptyGeneration,
  TemplateMismatch,
  MissingCounterfactual,
  RoleViolation,
  TransportError,
  AuthError,
  ScriptGap,
  UnsupportedDataset,
  SingletonGroup,
  MissingGold,
  MissingPrediction,
  UniverseMismatch,
  ConfigError,
  ManifestMismatch,
  DatasetMismatch,
  RunAborted,
  IoError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ccp
