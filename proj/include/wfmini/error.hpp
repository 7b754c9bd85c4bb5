#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wfmini {

enum class ErrorCode {
  // kernel catalog
  UnknownKernel,
  MissingParameter,
  InvalidParameter,
  CommunicatorRequired,
  DuplicateKernel,
  ScratchUnavailable,
  ShortRead,
  ShortWrite,
  CollectiveMismatch,
  SizeMismatch,
  // tasks
  SchemaError,
  InsufficientSlots,
  KernelFailure,
  UnknownParameter,
  // workflows
  UnknownTaskReference,
  CycleDetected,
  InsufficientPool,
  TaskFailed,
  ShapeMismatch,
  // metrics
  EmptyTrace,
  LengthMismatch,
  ZeroDenominator,
  InsufficientSamples,
  // calibration
  NonConvergence,
  RunnerFailure,
  UnmappedKnob,
  PreconditionFailed,
  // exemplars
  InvalidExemplar,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so that
/// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace wfmini
