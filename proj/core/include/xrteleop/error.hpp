#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xrt {

enum class ErrorCode {
  // kinematics / chain documents
  MalformedDocument,
  DanglingReference,
  CyclicStructure,
  UnsupportedJointType,
  UnknownFrame,
  DimensionMismatch,
  // solvers
  InfeasibleBounds,
  InactiveFrame,
  InvalidArgument,
  // protocol
  MalformedJson,
  SchemaViolation,
  RangeViolation,
  StaleSequence,
  InvariantViolation,
  ArityError,
  NonFiniteValue,
  DegenerateQuaternion,
  UnknownConvention,
  // streaming
  BindFailure,
  ConnectFailure,
  SerializationFailure,
  EmptyWindow,
  EmptyStream,
  DimensionDrift,
  BufferOverflow,
  // teleop
  UnreliableTracking,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one ErrorCode so callers can
/// branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace xrt
