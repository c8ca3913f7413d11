#pragma once

#include <stdexcept>
#include <string>

namespace roughflow {

enum class ErrorCode {
  InvalidArgument,
  OutOfDomain,
  NonFinite,
  StencilOutsideDomain,
  UnknownExample,
  InvalidParam,
  OutOfRange,
  Overflow,
  InvalidThreshold,
  InverseDomain,
  QuadratureFailure,
  DivergentIntegral,
  NoFiniteNorm,
  DomainExit,
  TooCoarse,
  ZeroJacobian,
  InconsistentGrids,
  SupportViolation,
  Schema,
  Io,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace roughflow
