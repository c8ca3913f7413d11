#include "roughflow/error.hpp"

namespace roughflow {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::StencilOutsideDomain: return "StencilOutsideDomain";
    case ErrorCode::UnknownExample: return "UnknownExample";
    case ErrorCode::InvalidParam: return "InvalidParam";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::InvalidThreshold: return "InvalidThreshold";
    case ErrorCode::InverseDomain: return "InverseDomain";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::DivergentIntegral: return "DivergentIntegral";
    case ErrorCode::NoFiniteNorm: return "NoFiniteNorm";
    case ErrorCode::DomainExit: return "DomainExit";
    case ErrorCode::TooCoarse: return "TooCoarse";
    case ErrorCode::ZeroJacobian: return "ZeroJacobian";
    case ErrorCode::InconsistentGrids: return "InconsistentGrids";
    case ErrorCode::SupportViolation: return "SupportViolation";
    case ErrorCode::Schema: return "Schema";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace roughflow
