#include "xrteleop/error.hpp"

namespace xrt {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::CyclicStructure: return "CyclicStructure";
    case ErrorCode::UnsupportedJointType: return "UnsupportedJointType";
    case ErrorCode::UnknownFrame: return "UnknownFrame";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InfeasibleBounds: return "InfeasibleBounds";
    case ErrorCode::InactiveFrame: return "InactiveFrame";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::RangeViolation: return "RangeViolation";
    case ErrorCode::StaleSequence: return "StaleSequence";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::ArityError: return "ArityError";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DegenerateQuaternion: return "DegenerateQuaternion";
    case ErrorCode::UnknownConvention: return "UnknownConvention";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::ConnectFailure: return "ConnectFailure";
    case ErrorCode::SerializationFailure: return "SerializationFailure";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::EmptyStream: return "EmptyStream";
    case ErrorCode::DimensionDrift: return "DimensionDrift";
    case ErrorCode::BufferOverflow: return "BufferOverflow";
    case ErrorCode::UnreliableTracking: return "UnreliableTracking";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace xrt
